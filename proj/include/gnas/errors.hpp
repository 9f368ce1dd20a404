#pragma once

#include <stdexcept>
#include <string>

namespace gnas {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed text input (dataset rows, code files, checkpoints).
struct ParseError : Error {
  using Error::Error;
};

// Structurally valid text whose content violates the format contract.
struct FormatError : Error {
  using Error::Error;
};

struct ArgumentError : Error {
  using Error::Error;
};

struct SplitError : Error {
  using Error::Error;
};

struct ShapeError : Error {
  using Error::Error;
};

// Operation called in a state that does not permit it.
struct StateError : Error {
  using Error::Error;
};

struct DecodeError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

// Non-finite values produced where the contract requires finite ones.
struct NumericFault : Error {
  using Error::Error;
};

struct TransferError : Error {
  using Error::Error;
};

struct ContractError : Error {
  using Error::Error;
};

}  // namespace gnas
