#include "arclab/margin.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "arclab/error.h"

namespace arclab {

using std::numbers::pi;

MarginSpec PresetSpec(Preset preset) {
  switch (preset) {
    case Preset::kSoftmax: return {1.0, 0.0, 0.0, 64.0};
    case Preset::kSphereFace: return {1.35, 0.0, 0.0, 64.0};
    case Preset::kArcFace: return {1.0, 0.5, 0.0, 64.0};
    case Preset::kCosFace: return {1.0, 0.0, 0.35, 64.0};
    case Preset::kCM1: return {1.0, 0.3, 0.2, 64.0};
    case Preset::kCM2: return {0.9, 0.4, 0.15, 64.0};
  }
  return {};
}

std::string_view PresetName(Preset preset) {
  switch (preset) {
    case Preset::kSoftmax: return "softmax";
    case Preset::kSphereFace: return "sphereface";
    case Preset::kArcFace: return "arcface";
    case Preset::kCosFace: return "cosface";
    case Preset::kCM1: return "cm1";
    case Preset::kCM2: return "cm2";
  }
  return "";
}

std::optional<Preset> ParsePreset(std::string_view name) {
  for (Preset p : kAllPresets) {
    if (PresetName(p) == name) return p;
  }
  return std::nullopt;
}

void ValidateMarginSpec(const MarginSpec& spec) {
  const bool finite = std::isfinite(spec.m1) && std::isfinite(spec.m2) && std::isfinite(spec.m3) &&
                      std::isfinite(spec.s);
  if (!finite) throw Error(ErrorKind::kBadRange, "margin parameters must be finite");
  if (spec.m1 < 0.0) throw Error(ErrorKind::kBadRange, "m1 must be >= 0");
  if (spec.m2 < 0.0 || spec.m2 >= pi) throw Error(ErrorKind::kBadRange, "m2 must lie in [0, pi)");
  if (spec.m3 < 0.0) throw Error(ErrorKind::kBadRange, "m3 must be >= 0");
  if (spec.s <= 0.0) throw Error(ErrorKind::kBadRange, "s must be > 0");
}

double BranchPoint(const MarginSpec& spec) {
  if (spec.m1 <= 0.0) return std::numeric_limits<double>::infinity();
  return (pi - spec.m2) / spec.m1;
}

namespace {

double FallbackOffset(const MarginSpec& spec) { return 1.0 + std::cos(BranchPoint(spec)); }

// theta is assumed to be in [0, pi].
double TargetLogitUnchecked(double theta, const MarginSpec& spec) {
  const double arg = spec.m1 * theta + spec.m2;
  if (arg <= pi) return std::cos(arg) - spec.m3;
  return std::cos(theta) - FallbackOffset(spec) - spec.m3;
}

}  // namespace

double TargetLogit(double theta, const MarginSpec& spec) {
  if (!(theta >= 0.0 && theta <= pi)) {
    throw Error(ErrorKind::kThetaOutOfRange, "theta " + std::to_string(theta) + " not in [0, pi]");
  }
  return TargetLogitUnchecked(theta, spec);
}

double TargetLogitSlope(double cos_theta, const MarginSpec& spec) {
  if (spec.m1 == 1.0 && spec.m2 == 0.0) return 1.0;
  if (cos_theta > 1.0 || cos_theta < -1.0) return 0.0;
  const double theta = std::acos(cos_theta);
  const double arg = spec.m1 * theta + spec.m2;
  if (arg > pi) return 1.0;
  return spec.m1 * std::sin(arg) / std::max(std::sin(theta), kMinSinTheta);
}

std::vector<double> DegreeGrid(double lo_deg, double hi_deg, double step_deg) {
  if (!(step_deg > 0.0) || !(lo_deg <= hi_deg) || lo_deg < 0.0 || hi_deg > 180.0) {
    throw Error(ErrorKind::kBadRange, "grid must satisfy 0 <= lo <= hi <= 180 and step > 0");
  }
  std::vector<double> grid;
  const auto count = static_cast<long>(std::floor((hi_deg - lo_deg) / step_deg + 1e-9));
  for (long i = 0; i <= count; ++i) grid.push_back(lo_deg + static_cast<double>(i) * step_deg);
  return grid;
}

std::vector<CurvePoint> TargetLogitCurve(const MarginSpec& spec, std::span<const double> grid_deg) {
  std::vector<CurvePoint> curve;
  curve.reserve(grid_deg.size());
  for (double deg : grid_deg) curve.push_back({deg, TargetLogit(deg * pi / 180.0, spec)});
  return curve;
}

void CheckLabels(const Labels& labels, int num_samples, int num_classes) {
  if (static_cast<int>(labels.size()) != num_samples) {
    throw Error(ErrorKind::kDimensionMismatch, "label count " + std::to_string(labels.size()) +
                                                   " != sample count " + std::to_string(num_samples));
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) {
      throw Error(ErrorKind::kLabelOutOfRange,
                  "label " + std::to_string(y) + " not in [0, " + std::to_string(num_classes) + ")");
    }
  }
}

LogitBlock MarginForward(const LogitBlock& cosines, const Labels& labels, const MarginSpec& spec) {
  if (cosines.stage != LogitStage::kPreScale) {
    throw Error(ErrorKind::kBadRange, "margin must be applied to pre-scale cosines");
  }
  const Matrix& cos = cosines.values;
  CheckLabels(labels, static_cast<int>(cos.rows()), static_cast<int>(cos.cols()));
  LogitBlock out{cos, LogitStage::kPostScale};
  for (Eigen::Index i = 0; i < cos.rows(); ++i) {
    const int y = labels[i];
    const double theta = std::acos(std::clamp(cos(i, y), -1.0, 1.0));
    out.values(i, y) = TargetLogitUnchecked(theta, spec);
  }
  out.values *= spec.s;
  return out;
}

XentResult SoftmaxXent(const LogitBlock& scores, const Labels& labels) {
  const Matrix& z = scores.values;
  if (!z.allFinite()) throw Error(ErrorKind::kNonFiniteInput, "scores contain inf/nan");
  const Eigen::Index rows = z.rows();
  const Eigen::Index cols = z.cols();
  CheckLabels(labels, static_cast<int>(rows), static_cast<int>(cols));

  XentResult out;
  out.grad_scores.resize(rows, cols);
  const double inv_n = 1.0 / static_cast<double>(rows);
  double total = 0.0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    double row_max = z(i, 0);
    for (Eigen::Index j = 1; j < cols; ++j) row_max = std::max(row_max, z(i, j));
    double sum = 0.0;
    for (Eigen::Index j = 0; j < cols; ++j) sum += std::exp(z(i, j) - row_max);
    total += std::log(sum) + row_max - z(i, labels[i]);
    for (Eigen::Index j = 0; j < cols; ++j) {
      out.grad_scores(i, j) = std::exp(z(i, j) - row_max) / sum * inv_n;
    }
    out.grad_scores(i, labels[i]) -= inv_n;
  }
  out.loss = total * inv_n;
  return out;
}

LossOutput CombinedLossOnSphere(const EmbeddingBatch& features, const CentreMatrix& centres,
                                const Labels& labels, const MarginSpec& spec) {
  if (features.dim() != centres.dim()) {
    throw Error(ErrorKind::kDimensionMismatch, "feature and centre dimensions differ");
  }
  const Matrix& x = features.rows();
  const Matrix& w = centres.columns();
  CheckLabels(labels, features.size(), centres.num_classes());

  LogitBlock cosines{x * w, LogitStage::kPreScale};
  const LogitBlock scores = MarginForward(cosines, labels, spec);
  XentResult xent = SoftmaxXent(scores, labels);

  Matrix grad_cos = spec.s * xent.grad_scores;
  for (Eigen::Index i = 0; i < grad_cos.rows(); ++i) {
    grad_cos(i, labels[i]) *= TargetLogitSlope(cosines.values(i, labels[i]), spec);
  }
  LossOutput out;
  out.loss = xent.loss;
  out.grad_features = grad_cos * w.transpose();
  out.grad_centres = x.transpose() * grad_cos;
  return out;
}

Matrix BackpropRowNormalization(const Matrix& raw, const Matrix& grad_unit) {
  Matrix out(raw.rows(), raw.cols());
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const double norm = raw.row(i).norm();
    const Eigen::RowVectorXd unit = raw.row(i) / norm;
    out.row(i) = (grad_unit.row(i) - unit * unit.dot(grad_unit.row(i))) / norm;
  }
  return out;
}

Matrix BackpropColumnNormalization(const Matrix& raw, const Matrix& grad_unit) {
  Matrix out(raw.rows(), raw.cols());
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    const double norm = raw.col(j).norm();
    const Vector unit = raw.col(j) / norm;
    out.col(j) = (grad_unit.col(j) - unit * unit.dot(grad_unit.col(j))) / norm;
  }
  return out;
}

LossOutput CombinedLoss(const Matrix& features, const Matrix& centres, const Labels& labels,
                        const MarginSpec& spec) {
  const EmbeddingBatch x = NormalizeRows(features);
  const CentreMatrix w = NormalizeColumns(centres);
  LossOutput unit = CombinedLossOnSphere(x, w, labels, spec);
  LossOutput out;
  out.loss = unit.loss;
  out.grad_features = BackpropRowNormalization(features, unit.grad_features);
  out.grad_centres = BackpropColumnNormalization(centres, unit.grad_centres);
  return out;
}

std::optional<double> DecisionBoundary(const MarginSpec& spec, double theta2) {
  if (!(theta2 >= 0.0 && theta2 <= pi)) {
    throw Error(ErrorKind::kThetaOutOfRange, "theta2 not in [0, pi]");
  }
  const double target = std::cos(theta2);
  if (target > TargetLogitUnchecked(0.0, spec)) return std::nullopt;
  if (target < TargetLogitUnchecked(pi, spec)) return std::nullopt;
  double lo = 0.0;
  double hi = pi;
  // TargetLogit is decreasing, so keep lo on the >= side of the target.
  for (int iter = 0; iter < 200 && hi - lo > 1e-13; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (TargetLogitUnchecked(mid, spec) >= target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace arclab
