#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fixwal {

enum class ErrorCode {
  kRecordTooLarge,
  kMalformedHeader,
  kTruncatedRecord,
  kCorruptRecord,
  kInvalidSegmentSize,
  kDurabilityError,
  kRecoveryCorruption,
  kIntegrityFailure,
  kKeyNotFound,
  kUnregistered,
  kInsufficientReplicas,
  kInsufficientQuorums,
  kCommitTimeout,
  kNotFound,
  kUnrecoverableSegment,
  kInvalidPrior,
  kInsufficientTrials,
  kNoData,
  kUnknownSize,
  kInvalidSpec,
  kInvalidConfig,
  kTransportError,
};

std::string_view error_code_name(ErrorCode code) noexcept;

// Every failure surfaced by the library is an Error carrying a stable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fixwal
