#pragma once

#include <stdexcept>
#include <string>

namespace histograph {

enum class ErrorKind {
  Validation,
  EmptyInput,
  Shape,
  Bounds,
  Numeric,
  State,
  Io,
  Version,
  Corrupt,
  Unsupported,
};

// Single exception type for the core library.  The C API maps `kind()` onto
// its status codes, so every throw site must pick the kind deliberately.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace histograph
