#pragma once

#include <stdexcept>
#include <string>

namespace nmn {

// Shape / dimension mismatch between operands.
struct shape_error : std::runtime_error {
  explicit shape_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A documented precondition or invariant was violated by the caller.
struct contract_error : std::invalid_argument {
  explicit contract_error(const std::string& msg) : std::invalid_argument(msg) {}
};

// Dataset ingestion problem (bad JSON, missing field, conflicting answers).
struct data_error : std::runtime_error {
  explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Program text rejected by the parser or typechecker.
struct parse_error : std::runtime_error {
  parse_error(const std::string& msg, int line, int col)
      : std::runtime_error(msg + " (line " + std::to_string(line) + ", col " +
                           std::to_string(col) + ")"),
        line(line),
        col(col) {}
  int line = 0;
  int col = 0;
};

// Failure while executing a program against a paragraph.
struct exec_error : std::runtime_error {
  explicit exec_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace nmn
