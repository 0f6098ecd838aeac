#pragma once

#include <stdexcept>
#include <string>

namespace infocir {

enum class ErrorKind {
  kInvalidArgument,  // malformed request or precondition violated by the caller
  kNotFound,
  kConflict,         // call sequence error (no ideals yet, model not fitted, ...)
  kFormat,           // on-disk data is malformed
  kIo,
  kProvider,         // embedding provider unreachable or returned an error
  kInternal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid_argument";
    case ErrorKind::kNotFound: return "not_found";
    case ErrorKind::kConflict: return "conflict";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kProvider: return "provider";
    case ErrorKind::kInternal: return "internal";
  }
  return "internal";
}

}  // namespace infocir
