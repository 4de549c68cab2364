#pragma once

#include <stdexcept>
#include <string>

namespace mrr {

enum class ErrorKind { Config, Io, Numeric, Statistics };

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Statistics: return "statistics";
  }
  return "unknown";
}

/// Every recoverable failure in the toolkit is reported through this type.
/// The CLI maps the kind onto an exit code.
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

}  // namespace mrr
