#include "fixwal/error.hpp"

namespace fixwal {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kRecordTooLarge: return "RecordTooLarge";
    case ErrorCode::kMalformedHeader: return "MalformedHeader";
    case ErrorCode::kTruncatedRecord: return "TruncatedRecord";
    case ErrorCode::kCorruptRecord: return "CorruptRecord";
    case ErrorCode::kInvalidSegmentSize: return "InvalidSegmentSize";
    case ErrorCode::kDurabilityError: return "DurabilityError";
    case ErrorCode::kRecoveryCorruption: return "RecoveryCorruption";
    case ErrorCode::kIntegrityFailure: return "IntegrityFailure";
    case ErrorCode::kKeyNotFound: return "KeyNotFound";
    case ErrorCode::kUnregistered: return "Unregistered";
    case ErrorCode::kInsufficientReplicas: return "InsufficientReplicas";
    case ErrorCode::kInsufficientQuorums: return "InsufficientQuorums";
    case ErrorCode::kCommitTimeout: return "CommitTimeout";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kUnrecoverableSegment: return "UnrecoverableSegment";
    case ErrorCode::kInvalidPrior: return "InvalidPrior";
    case ErrorCode::kInsufficientTrials: return "InsufficientTrials";
    case ErrorCode::kNoData: return "NoData";
    case ErrorCode::kUnknownSize: return "UnknownSize";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kTransportError: return "TransportError";
  }
  return "Unknown";
}

}  // namespace fixwal
