#pragma once

#include <stdexcept>
#include <string>

namespace kifmm {

/// Error categories surfaced through the C API as status codes.
enum class ErrorKind {
  Domain,        // point outside the tree domain
  InvalidLevel,  // key operation not defined at this level
  Admissibility, // box pair is near-field
  Input,         // empty or malformed input data
  Parameter,     // bad argument to a numerical routine
  Config,        // inconsistent FMM configuration
  Shape,         // buffer length mismatch
  Numerical,     // factorization failure
  Io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace kifmm
