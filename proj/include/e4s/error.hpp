#pragma once

#include <stdexcept>
#include <string>

namespace e4s {

/// Broad failure class; the CLI maps each one onto a process exit code.
enum class ErrorKind {
  Config = 1,    // usage or configuration problem
  Data = 2,      // malformed or inconsistent input data
  Provider = 3,  // scoring backend or NLI provider failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class ProviderError : public Error {
 public:
  explicit ProviderError(const std::string& what) : Error(ErrorKind::Provider, what) {}
};

}  // namespace e4s
