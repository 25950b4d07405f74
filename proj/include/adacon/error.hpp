#pragma once

#include <stdexcept>
#include <string>

namespace adacon {

/// Raised for precondition violations and malformed input.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an optimizer step or loss evaluation would leave finite arithmetic.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace adacon
