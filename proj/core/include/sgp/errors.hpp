#pragma once

#include <stdexcept>
#include <string>

namespace sgp {

// Error taxonomy shared across the library. The CLI maps these onto process
// exit codes: UsageError -> 1, DataError -> 2, NumericError/ContractError -> 3.

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input data: bad files, unparseable sentences, vocabulary clashes.
class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error(msg) {}
};

// A caller violated an API precondition (wrong shapes, wrong node kind, ...).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& msg) : Error(msg) {}
};

// Numeric breakdown: non-finite values, zero-norm cosine inputs, bad tau.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

// Bad command-line usage or inconsistent option combinations.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& msg) : Error(msg) {}
};

}  // namespace sgp
