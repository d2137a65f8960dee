#include "mrsynth/error.hpp"

namespace mrsynth {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kRange: return "range_violation";
    case ErrorCode::kEncoding: return "encoding_error";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kSchema: return "schema_error";
    case ErrorCode::kDegenerateInput: return "degenerate_input";
    case ErrorCode::kDomain: return "domain_error";
    case ErrorCode::kShape: return "shape_error";
    case ErrorCode::kConfig: return "config_error";
    case ErrorCode::kNumeric: return "numeric_error";
    case ErrorCode::kInsufficientData: return "insufficient_data";
    case ErrorCode::kVersion: return "version_mismatch";
    case ErrorCode::kCorrupt: return "corrupt_file";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kIncomplete: return "incomplete_session";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kUnavailable: return "service_unavailable";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kBalance: return "balance_violation";
  }
  return "unknown";
}

}  // namespace mrsynth
