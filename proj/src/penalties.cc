#include "arclab/penalties.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "arclab/error.h"

namespace arclab {

using std::numbers::pi;

double ArccosSlope(double c) {
  if (c > 1.0 || c < -1.0) return 0.0;
  return -1.0 / std::max(std::sqrt(1.0 - c * c), kMinSinTheta);
}

PenaltyOutput IntraPenalty(const EmbeddingBatch& features, const CentreMatrix& centres,
                           const Labels& labels) {
  if (features.dim() != centres.dim()) {
    throw Error(ErrorKind::kDimensionMismatch, "feature and centre dimensions differ");
  }
  CheckLabels(labels, features.size(), centres.num_classes());
  const Matrix& x = features.rows();
  const Matrix& w = centres.columns();
  const int n_samples = features.size();
  const double scale = 1.0 / (pi * n_samples);

  PenaltyOutput out;
  out.grad_features = Matrix::Zero(x.rows(), x.cols());
  out.grad_centres = Matrix::Zero(w.rows(), w.cols());
  double total = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    const int y = labels[i];
    const double c = x.row(i).dot(w.col(y));
    total += std::acos(std::clamp(c, -1.0, 1.0));
    const double g = scale * ArccosSlope(c);
    out.grad_features.row(i) += g * w.col(y).transpose();
    out.grad_centres.col(y) += g * x.row(i).transpose();
  }
  out.value = scale * total;
  return out;
}

PenaltyOutput InterPenalty(const CentreMatrix& centres, const Labels& labels) {
  const int n = centres.num_classes();
  CheckLabels(labels, static_cast<int>(labels.size()), n);
  const Matrix& w = centres.columns();
  const auto n_samples = static_cast<double>(labels.size());
  const double scale = -1.0 / (pi * n_samples * (n - 1));

  std::vector<int> count(n, 0);
  for (int y : labels) ++count[y];

  PenaltyOutput out;
  out.grad_centres = Matrix::Zero(w.rows(), w.cols());
  double total = 0.0;
  for (int y = 0; y < n; ++y) {
    if (count[y] == 0) continue;
    double row_sum = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == y) continue;
      const double c = w.col(y).dot(w.col(j));
      row_sum += std::acos(std::clamp(c, -1.0, 1.0));
      const double g = scale * count[y] * ArccosSlope(c);
      out.grad_centres.col(y) += g * w.col(j);
      out.grad_centres.col(j) += g * w.col(y);
    }
    total += count[y] * row_sum;
  }
  out.value = scale * total;
  return out;
}

TripletOutput AngularTriplet(const UnitVector& anchor, const UnitVector& positive,
                             const UnitVector& negative, double margin) {
  if (anchor.dim() != positive.dim() || anchor.dim() != negative.dim()) {
    throw Error(ErrorKind::kDimensionMismatch, "triplet members differ in dimension");
  }
  const Vector& a = anchor.components();
  const Vector& p = positive.components();
  const Vector& n = negative.components();
  const double cp = a.dot(p);
  const double cn = a.dot(n);
  const double hinge = std::acos(std::clamp(cp, -1.0, 1.0)) + margin -
                       std::acos(std::clamp(cn, -1.0, 1.0));
  TripletOutput out;
  out.grad_anchor = Vector::Zero(a.size());
  out.grad_positive = Vector::Zero(a.size());
  out.grad_negative = Vector::Zero(a.size());
  if (hinge <= 0.0) return out;
  out.loss = hinge;
  const double sp = ArccosSlope(cp);
  const double sn = ArccosSlope(cn);
  out.grad_anchor = sp * p - sn * n;
  out.grad_positive = sp * a;
  out.grad_negative = -sn * a;
  return out;
}

PenaltyOutput BatchTripletPenalty(const EmbeddingBatch& features, const Labels& labels,
                                  double margin) {
  const Matrix& x = features.rows();
  const int n_samples = features.size();
  if (static_cast<int>(labels.size()) != n_samples) {
    throw Error(ErrorKind::kDimensionMismatch, "label count differs from sample count");
  }
  const Matrix gram = x * x.transpose();

  PenaltyOutput out;
  out.grad_features = Matrix::Zero(x.rows(), x.cols());
  double total = 0.0;
  int anchors = 0;
  for (int i = 0; i < n_samples; ++i) {
    int pos = -1;
    int neg = -1;
    for (int j = 0; j < n_samples; ++j) {
      if (j == i) continue;
      if (labels[j] == labels[i]) {
        if (pos < 0 || gram(i, j) < gram(i, pos)) pos = j;
      } else if (neg < 0 || gram(i, j) > gram(i, neg)) {
        neg = j;
      }
    }
    if (pos < 0 || neg < 0) continue;
    ++anchors;
    const double cp = gram(i, pos);
    const double cn = gram(i, neg);
    const double hinge = std::acos(std::clamp(cp, -1.0, 1.0)) + margin -
                         std::acos(std::clamp(cn, -1.0, 1.0));
    if (hinge <= 0.0) continue;
    total += hinge;
    const double sp = ArccosSlope(cp);
    const double sn = ArccosSlope(cn);
    out.grad_features.row(i) += sp * x.row(pos) - sn * x.row(neg);
    out.grad_features.row(pos) += sp * x.row(i);
    out.grad_features.row(neg) -= sn * x.row(i);
  }
  if (anchors > 0) {
    out.value = total / anchors;
    out.grad_features /= anchors;
  }
  return out;
}

std::string_view LossKindName(LossKind kind) {
  switch (kind) {
    case LossKind::kCombined: return "combined";
    case LossKind::kCombinedIntra: return "combined+intra";
    case LossKind::kCombinedInter: return "combined+inter";
    case LossKind::kCombinedTriplet: return "combined+triplet";
    case LossKind::kTripletOnly: return "triplet-only";
    case LossKind::kSoftmaxUnnormalized: return "softmax-unnormalized";
  }
  return "";
}

std::optional<LossKind> ParseLossKind(std::string_view name) {
  for (LossKind k : kAllLossKinds) {
    if (LossKindName(k) == name) return k;
  }
  return std::nullopt;
}

LossOutput EvaluateObjective(const Matrix& features, const Matrix& centres, const Labels& labels,
                             const ObjectiveConfig& config) {
  if (features.cols() != centres.rows()) {
    throw Error(ErrorKind::kDimensionMismatch, "feature and centre dimensions differ");
  }
  CheckLabels(labels, static_cast<int>(features.rows()), static_cast<int>(centres.cols()));

  if (config.kind == LossKind::kSoftmaxUnnormalized) {
    const XentResult xent = SoftmaxXent({features * centres, LogitStage::kPostScale}, labels);
    return {xent.loss, xent.grad_scores * centres.transpose(), features.transpose() * xent.grad_scores};
  }

  const EmbeddingBatch x = NormalizeRows(features);
  if (config.kind == LossKind::kTripletOnly) {
    const PenaltyOutput t = BatchTripletPenalty(x, labels, config.triplet_margin);
    return {t.value, BackpropRowNormalization(features, t.grad_features),
            Matrix::Zero(centres.rows(), centres.cols())};
  }

  const CentreMatrix w = NormalizeColumns(centres);
  LossOutput unit = CombinedLossOnSphere(x, w, labels, config.margin);
  const double weight = config.penalty_weight;
  switch (config.kind) {
    case LossKind::kCombinedIntra: {
      const PenaltyOutput p = IntraPenalty(x, w, labels);
      unit.loss += weight * p.value;
      unit.grad_features += weight * p.grad_features;
      unit.grad_centres += weight * p.grad_centres;
      break;
    }
    case LossKind::kCombinedInter: {
      const PenaltyOutput p = InterPenalty(w, labels);
      unit.loss += weight * p.value;
      unit.grad_centres += weight * p.grad_centres;
      break;
    }
    case LossKind::kCombinedTriplet: {
      const PenaltyOutput p = BatchTripletPenalty(x, labels, config.triplet_margin);
      unit.loss += weight * p.value;
      unit.grad_features += weight * p.grad_features;
      break;
    }
    default:
      break;
  }
  return {unit.loss, BackpropRowNormalization(features, unit.grad_features),
          BackpropColumnNormalization(centres, unit.grad_centres)};
}

}  // namespace arclab
