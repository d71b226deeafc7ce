#pragma once

#include <stdexcept>
#include <string>

namespace vabokeh {

// Bad argument values or mismatched shapes.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// File could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File was readable but its contents are not a supported encoding.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input is well-formed but too degenerate for the requested operation,
// e.g. fewer occupied histogram bins than requested classes.
class DegenerateInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thin-lens evaluation at the singular configuration D_f == f.
class SingularityError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

}  // namespace vabokeh
