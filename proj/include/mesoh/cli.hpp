#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mesoh/hypergraph.hpp"
#include "mesoh/inference.hpp"

namespace mesoh {

/// Exit codes used by the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitUnexpected = 1, kExitValidation = 2, kExitNumeric = 3, kExitIo = 4 };

struct RunConfig {
  std::string command;
  std::string input;
  std::string out_dir = ".";
  std::string checkpoint;
  std::string reference;
  FitConfig fit;
  std::vector<std::size_t> grid_c;
  std::vector<std::size_t> grid_k;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> mask_seed;
  bool aggregate = false;
  ParseOptions parse;
  std::optional<std::uint64_t> max_events;
  std::size_t inclusion_sample = 10000;
  std::size_t inclusion_repeats = 5;
};

struct GridCell {
  std::size_t C = 0, K = 0;
  double L = 0.0;
  double L_uniform = 0.0;
  bool ok = false;
};

struct GridResult {
  std::vector<GridCell> cells;
  std::size_t winner = 0;
};

/// The (C, K) pairs a grid evaluates: every combination with C <= K.
std::vector<std::pair<std::size_t, std::size_t>> grid_pairs(const std::vector<std::size_t>& cs,
                                                            const std::vector<std::size_t>& ks);

/// Fits every grid cell on one shared split and picks the highest L^(uniform).
GridResult run_grid(const Hypergraph& graph, const RunConfig& config);

int cmd_summarize(const RunConfig& config);
int cmd_fit(const RunConfig& config);
int cmd_predict(const RunConfig& config);
int cmd_eval(const RunConfig& config);
int cmd_grid(const RunConfig& config);
int cmd_generate(const RunConfig& config);

/// Parses arguments, dispatches, and maps errors to exit codes.
int run_cli(int argc, char** argv);

}  // namespace mesoh
