#pragma once

#include <stdexcept>
#include <string>

namespace mesoh {

// Each error type maps to one CLI exit code (see cli.hpp).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : ValidationError {
  ParseError(std::size_t line, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_number(line) {}
  std::size_t line_number;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mesoh
