#ifndef ARCLAB_MARGIN_H_
#define ARCLAB_MARGIN_H_

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "arclab/hypersphere.h"

namespace arclab {

// Combined margin cos(m1 * theta + m2) - m3 applied to the ground-truth
// logit, followed by rescaling with s.
struct MarginSpec {
  double m1 = 1.0;  // multiplicative angular margin
  double m2 = 0.0;  // additive angular margin, radians
  double m3 = 0.0;  // additive cosine margin
  double s = 64.0;  // feature scale

  bool IsIdentity() const { return m1 == 1.0 && m2 == 0.0 && m3 == 0.0; }
  bool operator==(const MarginSpec&) const = default;
};

enum class Preset { kSoftmax, kSphereFace, kArcFace, kCosFace, kCM1, kCM2 };

inline constexpr std::array<Preset, 6> kAllPresets = {
    Preset::kSoftmax, Preset::kSphereFace, Preset::kArcFace,
    Preset::kCosFace, Preset::kCM1,        Preset::kCM2,
};

MarginSpec PresetSpec(Preset preset);
std::string_view PresetName(Preset preset);
std::optional<Preset> ParsePreset(std::string_view name);

// Throws kBadRange when a field is outside its domain.
void ValidateMarginSpec(const MarginSpec& spec);

// Angle beyond which m1 * theta + m2 exceeds pi and the linear fallback
// takes over. +inf when the main branch covers all of [0, pi].
double BranchPoint(const MarginSpec& spec);

// Main branch: cos(m1 theta + m2) - m3. Past the branch point the value
// continues as cos(theta) - (1 + cos(theta*)) - m3, which meets the main
// branch at theta* and keeps decreasing. Throws kThetaOutOfRange outside
// [0, pi].
double TargetLogit(double theta, const MarginSpec& spec);

// d TargetLogit / d cos(theta). The main-branch expression divides by
// sin(theta), which is floored at kMinSinTheta; zero where the arccos
// input clamp is active (|cos| > 1).
double TargetLogitSlope(double cos_theta, const MarginSpec& spec);

inline constexpr double kMinSinTheta = 1e-7;

struct CurvePoint {
  double theta_deg = 0.0;
  double value = 0.0;
};

// Degrees in [lo, hi] with the given step (hi included when it lands on the
// grid). Throws kBadRange on an empty or inverted range.
std::vector<double> DegreeGrid(double lo_deg, double hi_deg, double step_deg);
std::vector<CurvePoint> TargetLogitCurve(const MarginSpec& spec, std::span<const double> grid_deg);

enum class LogitStage { kPreScale, kPostScale };

struct LogitBlock {
  Matrix values;  // N x n
  LogitStage stage = LogitStage::kPreScale;
};

// Replaces each ground-truth cosine with its target logit and multiplies
// the whole block by s.
LogitBlock MarginForward(const LogitBlock& cosines, const Labels& labels, const MarginSpec& spec);

struct XentResult {
  double loss = 0.0;
  Matrix grad_scores;  // (softmax - onehot) / N
};

// Mean softmax cross entropy with max subtraction.
XentResult SoftmaxXent(const LogitBlock& scores, const Labels& labels);

struct LossOutput {
  double loss = 0.0;
  Matrix grad_features;  // N x d
  Matrix grad_centres;   // d x n
};

// Loss and gradients for already-normalized inputs; gradients are with
// respect to the unit rows/columns taken as free variables.
LossOutput CombinedLossOnSphere(const EmbeddingBatch& features, const CentreMatrix& centres,
                                const Labels& labels, const MarginSpec& spec);

// Normalizes raw features (rows) and raw centres (columns), applies the
// margin and softmax, and returns gradients with respect to the raw
// entries.
LossOutput CombinedLoss(const Matrix& features, const Matrix& centres, const Labels& labels,
                        const MarginSpec& spec);

// Chain rule through x -> x / |x| for each row (or column).
Matrix BackpropRowNormalization(const Matrix& raw, const Matrix& grad_unit);
Matrix BackpropColumnNormalization(const Matrix& raw, const Matrix& grad_unit);

// Binary decision boundary: the class-1 angle theta1 with
// TargetLogit(theta1) == cos(theta2). nullopt when no such angle exists.
std::optional<double> DecisionBoundary(const MarginSpec& spec, double theta2);

void CheckLabels(const Labels& labels, int num_samples, int num_classes);

}  // namespace arclab

#endif  // ARCLAB_MARGIN_H_
