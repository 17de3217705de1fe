#pragma once

#include <stdexcept>
#include <string>

namespace pcgs {

enum class ErrorKind {
  io,         // file could not be opened, read or written
  format,     // malformed or truncated bitstream / model file
  invariant,  // inputs violate a data-model invariant
  argument,   // caller passed an out-of-range argument
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(what), kind_(kind)
  {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void
fail(ErrorKind kind, const std::string& what)
{
  throw Error(kind, what);
}

}  // namespace pcgs
