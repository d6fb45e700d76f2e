#ifndef ARCLAB_ERROR_H_
#define ARCLAB_ERROR_H_

#include <stdexcept>
#include <string>

namespace arclab {

enum class ErrorKind {
  kZeroVector,
  kNotUnitNorm,
  kDimensionMismatch,
  kInvalidDimension,
  kThetaOutOfRange,
  kLabelOutOfRange,
  kNonFiniteInput,
  kNonFiniteGradient,
  kDivergenceDetected,
  kRejectionExhausted,
  kEmptyClass,
  kNoPositivePairs,
  kEmptyPairSet,
  kInvalidShardCount,
  kChecksumMismatch,
  kBadRange,
  kConfig,
  kIo,
};

const char* ErrorKindName(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (and the
// CLI's exit-code mapping) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(ErrorKindName(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace arclab

#endif  // ARCLAB_ERROR_H_
