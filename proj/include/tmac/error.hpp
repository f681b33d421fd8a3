#pragma once

#include <stdexcept>
#include <string>

namespace tmac {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not compose.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A computation produced NaN/Inf, or a loss diverged.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent on-disk data, missing files, bad records.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values or unknown tags supplied by a caller.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace tmac
