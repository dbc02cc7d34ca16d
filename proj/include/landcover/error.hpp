#pragma once

#include <stdexcept>
#include <string>

namespace landcover {

/// Base for every error the pipeline raises. The CLI maps the concrete
/// subclasses onto its exit codes.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Caller passed a value outside an operation's documented domain.
class ArgumentError : public Error {
public:
  using Error::Error;
};

/// Input data is present but malformed (wrong row length, duplicate ids,
/// missing columns).
class SchemaError : public Error {
public:
  using Error::Error;
};

/// A referenced file is missing, unreadable or does not decode.
class LoadError : public Error {
public:
  using Error::Error;
};

/// Batch spatial size is below what a backbone profile accepts.
class InputSizeError : public Error {
public:
  using Error::Error;
};

/// Training diverged (non-finite loss) or could not proceed.
class TrainingError : public Error {
public:
  using Error::Error;
};

/// AUC requested on data where no label has both classes present.
class UndefinedAucError : public Error {
public:
  using Error::Error;
};

/// Pipeline configuration is invalid or references missing inputs.
class ConfigError : public Error {
public:
  using Error::Error;
};

}  // namespace landcover
