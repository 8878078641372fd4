#pragma once

#include <stdexcept>
#include <string>

namespace wordimp {

// Coarse classification used by the CLI to pick an exit code.
enum class ErrorCategory { Config, Data, Internal };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorCategory::Config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what)
      : Error(ErrorCategory::Data, what) {}
};

class InternalError : public Error {
 public:
  explicit InternalError(const std::string& what)
      : Error(ErrorCategory::Internal, what) {}
};

enum class WavErrc { FileNotFound, MalformedHeader, UnsupportedEncoding, WriteFailed };

class WavError : public DataError {
 public:
  WavError(WavErrc code, const std::string& what) : DataError(what), code_(code) {}
  WavErrc code() const noexcept { return code_; }

 private:
  WavErrc code_;
};

const char* to_string(WavErrc code) noexcept;

}  // namespace wordimp
