#include "claimcheck/error.hpp"

namespace claimcheck {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kValidation: return "validation error";
    case ErrorCode::kEmptyCorpus: return "empty corpus";
    case ErrorCode::kMagicMismatch: return "magic mismatch";
    case ErrorCode::kShapeMismatch: return "shape mismatch";
    case ErrorCode::kNonFinite: return "non-finite value";
    case ErrorCode::kDimensionMismatch: return "dimension mismatch";
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kNotConverged: return "not converged";
    case ErrorCode::kIo: return "i/o error";
  }
  return "error";
}

}  // namespace claimcheck
