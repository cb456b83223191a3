#pragma once

#include <stdexcept>
#include <string>

namespace gazemae {

// Base for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input data or configuration. The CLI maps this to exit code 1;
// any other failure maps to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace gazemae
