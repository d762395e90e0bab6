#pragma once

#include <stdexcept>
#include <string>

namespace sarw {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid numeric domain (non-finite input, nonpositive linear power, ...).
class RadiometryError : public Error {
 public:
  using Error::Error;
};

/// Mismatched grid or tensor dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Bad run configuration (schema violation, degenerate ratio, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Dataset problems: missing files, malformed manifests, truncated tiles.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite activations, diverged training, gradient blow-ups.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failures while writing artifacts.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace sarw
