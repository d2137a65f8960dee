#pragma once

#include <stdexcept>
#include <string>

namespace mrsynth {

enum class ErrorCode {
  kRange,
  kEncoding,
  kParse,
  kSchema,
  kDegenerateInput,
  kDomain,
  kShape,
  kConfig,
  kNumeric,
  kInsufficientData,
  kVersion,
  kCorrupt,
  kDivergence,
  kIncomplete,
  kNotFound,
  kUnavailable,
  kIo,
  kBalance,
};

const char* to_string(ErrorCode code) noexcept;

// Single exception type for the library. `field()` names the offending input
// when there is one (condition field, manifest column, request key).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string field = {})
      : std::runtime_error(message), code_(code), field_(std::move(field)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorCode code_;
  std::string field_;
};

}  // namespace mrsynth
