#pragma once

#include <stdexcept>
#include <string>

namespace hedseg {

/// Library-wide exception. `code` is a short machine-readable tag
/// ("shape_mismatch", "no_series", "missing_stage", ...).
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace hedseg
