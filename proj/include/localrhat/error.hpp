#pragma once

#include <stdexcept>
#include <string>

namespace localrhat {

/// Raised for invalid inputs: bad parameters, malformed files, violated preconditions.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a numerical routine fails to converge or an internal check fails.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace localrhat
