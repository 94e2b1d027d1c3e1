#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace rscale {

using Count = std::int64_t;

// Errors carry a module-qualified code, e.g. "stats_core.domain" or
// "smoothing.infeasible", so the CLI can surface them machine-readably.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

namespace detail {

[[noreturn]] inline void fail(const char* code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, const char* code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace detail
}  // namespace rscale
