#pragma once

#include <stdexcept>
#include <string>

namespace listenlab {

// Contract/validation failures. The CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem and serialization failures. The CLI maps these to exit code 3.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace listenlab
