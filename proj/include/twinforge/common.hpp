#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace twinforge {

// Domain error with a stable machine-readable kind (e.g. "invalid-input",
// "rank-deficiency"). The CLI maps any Error to exit code 1 and prints
// "error[<kind>]: <message>" on stderr.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error("error[" + kind + "]: " + message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

[[noreturn]] inline void fail(const std::string& kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool cond, const std::string& kind, const std::string& message) {
  if (!cond) fail(kind, message);
}

}  // namespace twinforge
