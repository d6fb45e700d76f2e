#ifndef ARCLAB_PENALTIES_H_
#define ARCLAB_PENALTIES_H_

#include <optional>
#include <string_view>

#include "arclab/hypersphere.h"
#include "arclab/margin.h"

namespace arclab {

// Gradients are with respect to the unit rows/columns taken as free
// variables; callers chain through the normalization themselves.
struct PenaltyOutput {
  double value = 0.0;
  Matrix grad_features;  // N x d (zero when the penalty ignores features)
  Matrix grad_centres;   // d x n (zero when the penalty ignores centres)
};

// d arccos(c) / dc with sin floored at kMinSinTheta; 0 outside [-1, 1].
double ArccosSlope(double c);

// Mean sample-to-centre angle divided by pi.
PenaltyOutput IntraPenalty(const EmbeddingBatch& features, const CentreMatrix& centres,
                           const Labels& labels);

// Negative mean angle between each sample's centre and every other centre,
// divided by pi. Only centres receive gradient.
PenaltyOutput InterPenalty(const CentreMatrix& centres, const Labels& labels);

struct TripletOutput {
  double loss = 0.0;
  Vector grad_anchor;
  Vector grad_positive;
  Vector grad_negative;
};

// max(0, angle(a, p) + margin - angle(a, n)). Zero gradient at and below the
// hinge.
TripletOutput AngularTriplet(const UnitVector& anchor, const UnitVector& positive,
                             const UnitVector& negative, double margin);

// Batch-hard mining: every anchor that has both a positive and a negative
// in the batch is paired with its farthest positive and nearest negative.
// Mean over those anchors; zero when none exist.
PenaltyOutput BatchTripletPenalty(const EmbeddingBatch& features, const Labels& labels,
                                  double margin);

enum class LossKind {
  kCombined,
  kCombinedIntra,
  kCombinedInter,
  kCombinedTriplet,
  kTripletOnly,
  kSoftmaxUnnormalized,
};

inline constexpr std::array<LossKind, 6> kAllLossKinds = {
    LossKind::kCombined,        LossKind::kCombinedIntra, LossKind::kCombinedInter,
    LossKind::kCombinedTriplet, LossKind::kTripletOnly,   LossKind::kSoftmaxUnnormalized,
};

std::string_view LossKindName(LossKind kind);
std::optional<LossKind> ParseLossKind(std::string_view name);

struct ObjectiveConfig {
  LossKind kind = LossKind::kCombined;
  MarginSpec margin;
  double penalty_weight = 1.0;
  double triplet_margin = 0.35;
};

// Training objective on raw embeddings (N x d) and raw centres (d x n).
// kSoftmaxUnnormalized uses the raw inner products with zero bias.
LossOutput EvaluateObjective(const Matrix& features, const Matrix& centres, const Labels& labels,
                             const ObjectiveConfig& config);

}  // namespace arclab

#endif  // ARCLAB_PENALTIES_H_
