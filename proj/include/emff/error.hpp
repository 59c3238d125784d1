#pragma once

#include <stdexcept>
#include <string>

namespace emff {

// Runtime failure with a stable machine-readable code (e.g. "care_no_convergence")
// plus a human-readable detail string.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& detail)
      : std::runtime_error(code + ": " + detail), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

}  // namespace emff
