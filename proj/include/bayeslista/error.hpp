#pragma once

#include <stdexcept>
#include <string>

namespace bayeslista {

// Failure categories; the numeric values double as CLI exit codes.
enum class ErrorKind : int {
  kInvalidArgument = 1,
  kConfig = 2,
  kData = 3,
  kNumeric = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error invalid_argument(const std::string& what) {
  return Error(ErrorKind::kInvalidArgument, what);
}
inline Error config_error(const std::string& what) {
  return Error(ErrorKind::kConfig, what);
}
inline Error data_error(const std::string& what) {
  return Error(ErrorKind::kData, what);
}
inline Error numeric_error(const std::string& what) {
  return Error(ErrorKind::kNumeric, what);
}

}  // namespace bayeslista
