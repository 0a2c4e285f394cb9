#pragma once

#include <stdexcept>
#include <string>

namespace srse {

enum class ErrorKind { kUsage, kDataMismatch, kNumeric, kFormat, kIo };

// CLI exit status for an error kind: 2 usage, 3 data (mismatch, corrupt or
// unreadable input), 4 numeric failure.
constexpr int ExitCodeFor(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kUsage:
      return 2;
    case ErrorKind::kNumeric:
      return 4;
    default:
      return 3;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return ExitCodeFor(kind_); }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::kUsage, what) {}
};

// Shapes, scales or file sets that do not line up.
class MismatchError : public Error {
 public:
  explicit MismatchError(const std::string& what)
      : Error(ErrorKind::kDataMismatch, what) {}
};

// NaN/Inf encountered, or a numeric precondition violated.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error(ErrorKind::kNumeric, what) {}
};

// Corrupt, truncated or unsupported file contents.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what)
      : Error(ErrorKind::kFormat, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

}  // namespace srse
