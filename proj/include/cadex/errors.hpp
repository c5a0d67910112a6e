#pragma once

#include <stdexcept>
#include <string>

namespace cadex {

/// Root of the library's failure classes. The CLI maps each subclass onto a
/// distinct process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or unknown configuration (bad key, out-of-range knob, empty input set).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Missing, inconsistent or malformed input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Binary layout problems: bad magic, endianness, unknown version, byte count.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

/// Non-finite gradients or parameters during optimization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A point at or behind the camera plane was projected.
class BehindCameraError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A pixel lookup outside the image rectangle under the reject policy.
class OutOfBoundsError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

}  // namespace cadex
