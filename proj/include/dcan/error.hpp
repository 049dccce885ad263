#pragma once

#include <stdexcept>
#include <string>

namespace dcan {

enum class ErrorKind {
  shape,
  singular,
  numeric,
  domain,
  config,
  data,
  io,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; `kind` drives the C status code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace dcan
