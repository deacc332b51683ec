#pragma once

#include <stdexcept>
#include <string>

namespace qarwarn {

enum class ErrorKind {
  Argument,
  Parse,
  Schema,
  Conversion,
  State,
  Domain,
  Numeric,
  DegenerateData,
  UndefinedCorrelation,
  Io,
};

const char* to_string(ErrorKind kind) noexcept;

// Single exception type for the library; callers dispatch on kind().
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

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace qarwarn
