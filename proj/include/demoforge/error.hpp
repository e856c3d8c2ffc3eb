#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace demoforge {

// All library failures carry a short machine-readable code (e.g.
// "PLACEMENT_INFEASIBLE", "DUPLICATE_STEP") next to the human message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace demoforge
