#pragma once

#include <stdexcept>
#include <string>

namespace grounding {

// Shapes that cannot be combined (matmul inner dims, broadcasting, ...).
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Inputs that violate a documented precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed files: bad magic, truncated payloads, unparsable JSON.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A NaN or Inf escaped an operation that was given finite inputs.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad command-line or option strings.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace grounding
