#pragma once

#include <stdexcept>
#include <string>

namespace hsnd {

// Base of the library error hierarchy. The CLI maps subclasses to exit
// codes: IoError/FormatError -> 1, ConfigError/ArgumentError/ShapeError -> 2,
// NumericError -> 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Missing, unreadable or unwritable files.
struct IoError : Error {
  using Error::Error;
};

// Malformed file contents (WAV headers, checkpoints, CSVs).
struct FormatError : Error {
  using Error::Error;
};

// Bad run configuration or command usage.
struct ConfigError : Error {
  using Error::Error;
};

// Invalid value passed to a library operation.
struct ArgumentError : Error {
  using Error::Error;
};

// Tensor shape disagreement.
struct ShapeError : Error {
  using Error::Error;
};

// Divergence or non-finite values in numeric code.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace hsnd
