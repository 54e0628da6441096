#pragma once

#include <stdexcept>
#include <string>

namespace darcn {

// Shape or dimension mismatch between tensors/operands.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// API misuse: calling an operation outside its documented preconditions.
struct ContractError : std::runtime_error {
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid or inconsistent configuration values.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or unusable external input (files, manifests, degenerate signals).
struct InputError : std::runtime_error {
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure: non-finite values where finite ones are required.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace darcn
