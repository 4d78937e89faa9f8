#pragma once

#include <stdexcept>
#include <string>

namespace mmr {

struct Error : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

// Incompatible array shapes or dimensions passed to an operation.
struct ShapeError : Error
{
  using Error::Error;
};

// Invalid argument values or configuration documents (CLI exit code 2).
struct ConfigError : Error
{
  using Error::Error;
};

// Missing, corrupt or mismatched files on disk (CLI exit code 3).
struct DataError : Error
{
  using Error::Error;
};

struct VersionError : DataError
{
  using DataError::DataError;
};

// NaN/Inf encountered during optimization (CLI exit code 4).
struct NumericalError : Error
{
  using Error::Error;
};

} // namespace mmr
