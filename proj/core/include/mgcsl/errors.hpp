#pragma once

#include <stdexcept>
#include <string>

namespace mgcsl {

// Matrix or tensor shapes that do not fit together.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-square input to a square-only routine.
class DimensionError : public ShapeError {
 public:
  using ShapeError::ShapeError;
};

// Iteration failure, non-finite values, loss of definiteness.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid generator / solver configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed input file. Carries the 1-based location when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, long line = 0, long column = 0)
      : std::runtime_error(line > 0 ? what + " (line " + std::to_string(line) + ", column " +
                                          std::to_string(column) + ")"
                                    : what),
        line_(line),
        column_(column) {}

  long line() const { return line_; }
  long column() const { return column_; }

 private:
  long line_;
  long column_;
};

}  // namespace mgcsl
