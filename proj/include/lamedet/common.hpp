#pragma once

#include <stdexcept>
#include <string>

namespace lamedet {

// Error categories double as the machine-parseable tokens the CLI prints on
// failure, e.g. "error: missing-prerequisite: ...".
enum class ErrorCategory { config, io, data, prerequisite, internal };

inline const char* to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config: return "config-error";
    case ErrorCategory::io: return "io-error";
    case ErrorCategory::data: return "data-error";
    case ErrorCategory::prerequisite: return "missing-prerequisite";
    case ErrorCategory::internal: return "internal-error";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

}  // namespace lamedet
