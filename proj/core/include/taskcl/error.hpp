#pragma once

#include <stdexcept>
#include <string>

namespace taskcl {

// Failure categories map onto the CLI exit codes.
enum class ErrorKind { Config = 2, Data = 3, Numeric = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

}  // namespace taskcl
