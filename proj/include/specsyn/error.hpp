#pragma once

#include <stdexcept>
#include <string>

namespace specsyn {

// Base for every failure the library reports as an expected error. The CLI
// turns these into a one-line diagnostic and exit status 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace specsyn
