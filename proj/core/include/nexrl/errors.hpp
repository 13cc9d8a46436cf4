#pragma once

#include <stdexcept>
#include <string>

namespace nexrl {

/// Bad command line or config file contents. CLI exit code 2.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid or inconsistent input data (missing files, bad shapes on disk,
/// degenerate sample sets). CLI exit code 3.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Shape contract violation between in-memory tensors.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

/// Non-finite values where finite ones are required (diverged training,
/// NaN gradients). CLI exit code 4.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace nexrl
