#include "mesoh/cli.hpp"

int main(int argc, char** argv) { return mesoh::run_cli(argc, argv); }
