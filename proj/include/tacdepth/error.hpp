#pragma once

#include <stdexcept>
#include <string>

namespace tacdepth {

/// Broad failure class. The CLI maps each one to its own exit code.
enum class ErrorKind {
  kConfig,    // invalid configuration or schema violation
  kIo,        // filesystem / file-format failures
  kShape,     // tensor or image dimension mismatch
  kNumeric,   // divergence, non-finite values
  kDomain,    // argument outside an operation's contract
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Specific file-format problem, reported through IoError.
enum class FormatIssue {
  kNone,
  kOpenFailed,
  kUnsupportedMagic,
  kMalformedHeader,
  kTruncatedPayload,
  kByteCountMismatch,
  kEmptyCloud,
};

inline const char* to_string(FormatIssue issue) {
  switch (issue) {
    case FormatIssue::kNone: return "none";
    case FormatIssue::kOpenFailed: return "open failed";
    case FormatIssue::kUnsupportedMagic: return "unsupported magic number";
    case FormatIssue::kMalformedHeader: return "malformed header";
    case FormatIssue::kTruncatedPayload: return "truncated payload";
    case FormatIssue::kByteCountMismatch: return "byte count mismatch";
    case FormatIssue::kEmptyCloud: return "empty point cloud";
  }
  return "unknown";
}

class IoError : public Error {
 public:
  IoError(FormatIssue issue, const std::string& where)
      : Error(ErrorKind::kIo, where + ": " + to_string(issue)), issue_(issue) {}

  FormatIssue issue() const noexcept { return issue_; }

 private:
  FormatIssue issue_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(ErrorKind::kShape, what) {}
};

class NumericError : public Error {
 public:
  NumericError(const std::string& what, long index = -1)
      : Error(ErrorKind::kNumeric, what), index_(index) {}

  /// Epoch or iteration at which the failure was detected, -1 if unknown.
  long index() const noexcept { return index_; }

 private:
  long index_;
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorKind::kDomain, what) {}
};

}  // namespace tacdepth
