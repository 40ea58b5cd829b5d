#pragma once

#include <stdexcept>
#include <string>

namespace coughxai {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input bytes or text (bad header, truncated payload).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Well-formed container holding an encoding we do not decode.
class UnsupportedFormatError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// A caller passed an out-of-contract argument.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Structurally inconsistent model (layer order, tensor shapes).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Input is valid but carries no usable signal (all-zero frames, constant samples).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Missing or inconsistent data across pipeline stages.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration file or option value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace coughxai
