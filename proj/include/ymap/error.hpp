#pragma once

#include <stdexcept>
#include <string>

namespace ymap {

// Base for all library errors. The CLI maps each subclass to its own exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A referenced file does not exist or cannot be opened.
class MissingFileError : public Error {
 public:
  using Error::Error;
};

// File exists but its contents violate the expected format.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Tensor shapes disagree, or a grid is too small for an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Argument or configuration value outside its allowed domain.
class ValueError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ymap
