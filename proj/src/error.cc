#include "arclab/error.h"

namespace arclab {

const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kZeroVector: return "ZeroVector";
    case ErrorKind::kNotUnitNorm: return "NotUnitNorm";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kInvalidDimension: return "InvalidDimension";
    case ErrorKind::kThetaOutOfRange: return "ThetaOutOfRange";
    case ErrorKind::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::kNonFiniteInput: return "NonFiniteInput";
    case ErrorKind::kNonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::kDivergenceDetected: return "DivergenceDetected";
    case ErrorKind::kRejectionExhausted: return "RejectionExhausted";
    case ErrorKind::kEmptyClass: return "EmptyClass";
    case ErrorKind::kNoPositivePairs: return "NoPositivePairs";
    case ErrorKind::kEmptyPairSet: return "EmptyPairSet";
    case ErrorKind::kInvalidShardCount: return "InvalidShardCount";
    case ErrorKind::kChecksumMismatch: return "ChecksumMismatch";
    case ErrorKind::kBadRange: return "BadRange";
    case ErrorKind::kConfig: return "ConfigError";
    case ErrorKind::kIo: return "IoError";
  }
  return "Unknown";
}

}  // namespace arclab
