#pragma once

#include <stdexcept>
#include <string>

namespace mmlda {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates an operation's precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Operation called on an object in the wrong lifecycle state (e.g. untrained).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Malformed or version-incompatible file.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace mmlda
