#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace claimcheck {

enum class ErrorCode {
  kParse,
  kValidation,
  kEmptyCorpus,
  kMagicMismatch,
  kShapeMismatch,
  kNonFinite,
  kDimensionMismatch,
  kInvalidArgument,
  kNotConverged,
  kIo,
};

std::string_view error_code_name(ErrorCode code);

// All library failures are reported through this exception. The code lets
// callers (and the CLI exit-status mapping) distinguish failure classes
// without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace claimcheck
