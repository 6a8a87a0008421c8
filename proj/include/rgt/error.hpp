#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rgt {

// Process exit codes surfaced by the command-line tool.
enum class ErrorCode : int {
  kOk = 0,
  kConfig = 2,
  kIo = 3,
  kFingerprint = 4,
  kNumeric = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Invalid argument, violated precondition or bad configuration value.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCode::kConfig, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCode::kIo, what) {}
};

// Malformed file content. Carries the byte offset at which parsing failed.
class ParseError : public IoError {
 public:
  ParseError(std::uint64_t offset, const std::string& what)
      : IoError("parse error at byte " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class FingerprintError : public Error {
 public:
  explicit FingerprintError(const std::string& what) : Error(ErrorCode::kFingerprint, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorCode::kNumeric, what) {}
};

inline const char* error_kind(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOk: return "ok";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kFingerprint: return "fingerprint";
    case ErrorCode::kNumeric: return "numeric";
  }
  return "unknown";
}

inline constexpr const char* kVersion = "0.1.0";

}  // namespace rgt
