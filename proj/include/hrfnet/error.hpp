#pragma once

#include <stdexcept>
#include <string>

namespace hrfnet {

enum class ErrorKind {
  Usage,      // bad flags / parameters
  Shape,      // tensor or raster dimensions do not fit the contract
  Channels,   // wrong channel count
  Config,     // invalid configuration value
  Placement,  // forgery region cannot be placed
  Data,       // missing / unreadable / inconsistent data on disk
  Numeric,    // non-finite values, undefined statistics
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Process exit codes used by the command-line tool.
inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage:
      return 2;
    case ErrorKind::Numeric:
      return 4;
    default:
      return 3;
  }
}

}  // namespace hrfnet
