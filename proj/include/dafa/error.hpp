#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dafa {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not admit the requested operation.
class DimensionError : public Error {
public:
  using Error::Error;
};

// A scalar argument is outside its admissible range (e.g. tau <= 0).
class ParameterError : public Error {
public:
  using Error::Error;
};

// An API precondition was violated by the caller.
class ContractError : public Error {
public:
  using Error::Error;
};

// Input data fails a documented validity check.
class ValidationError : public Error {
public:
  using Error::Error;
};

// Experiment configuration is malformed or inconsistent.
class ConfigError : public Error {
public:
  using Error::Error;
};

// A model exceeds the complexity budget where passing it is mandatory.
class BudgetError : public Error {
public:
  using Error::Error;
};

// Filesystem-level failure (missing file, failed write).
class IoError : public Error {
public:
  using Error::Error;
};

// A serialized artifact is malformed; carries the offending byte offset.
class FormatError : public Error {
public:
  FormatError(const std::string& msg, std::size_t byte_offset)
      : Error(msg + " (at byte offset " + std::to_string(byte_offset) + ")"),
        offset(byte_offset) {}
  std::size_t offset;
};

}  // namespace dafa
