#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dcrbm {

/// Tensor or vector dimensions disagree with the model or with each other.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Bad input values: non-one-hot labels, non-binary states, empty datasets.
class ValueError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Problems with data files or dataset contents.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file; carries the 1-based line where parsing stopped.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A checkpoint and a dataset (or two artifacts) are not compatible.
class MismatchError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace dcrbm
