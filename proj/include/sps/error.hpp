#pragma once

#include <stdexcept>
#include <string>

namespace sps {

/// Base class of every error raised by the library.
///
/// Errors split into two families that the CLI maps onto exit codes:
/// configuration errors (bad flags, invalid hyperparameters) and data errors
/// (malformed files, invariant violations in inputs).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual bool is_config_error() const noexcept { return false; }
};

#define SPS_DEFINE_ERROR(Name)          \
  class Name : public Error {           \
   public:                              \
    using Error::Error;                 \
  }

SPS_DEFINE_ERROR(IoError);
SPS_DEFINE_ERROR(FormatError);
SPS_DEFINE_ERROR(DataError);
SPS_DEFINE_ERROR(SchemaError);
SPS_DEFINE_ERROR(ShapeError);
SPS_DEFINE_ERROR(StaleSubspaceError);
SPS_DEFINE_ERROR(EmptySequenceError);
SPS_DEFINE_ERROR(DegenerateInputError);
SPS_DEFINE_ERROR(EmptySetError);
SPS_DEFINE_ERROR(CalibrationError);
SPS_DEFINE_ERROR(EvalError);

#undef SPS_DEFINE_ERROR

class ConfigError : public Error {
 public:
  using Error::Error;
  bool is_config_error() const noexcept override { return true; }
};

}  // namespace sps
