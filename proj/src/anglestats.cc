#include "arclab/anglestats.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "arclab/error.h"

namespace arclab {
namespace {

constexpr double kDegPerRad = 180.0 / std::numbers::pi;

double RowAngleDeg(const Matrix& rows, int i, int j) {
  const Eigen::RowVectorXd a = rows.row(i);
  const Eigen::RowVectorXd b = rows.row(j);
  return UnitAngle(a.data(), b.data(), static_cast<int>(a.size())) * kDegPerRad;
}

double ColumnAngleDeg(const Matrix& a, int i, const Matrix& b, int j) {
  return UnitAngle(a.col(i).data(), b.col(j).data(), static_cast<int>(a.rows())) * kDegPerRad;
}

}  // namespace

CentreMatrix ClassCentres(const EmbeddingBatch& embeddings, const Labels& labels, int num_classes) {
  if (static_cast<int>(labels.size()) != embeddings.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "label count differs from sample count");
  }
  Matrix sums = Matrix::Zero(embeddings.dim(), num_classes);
  std::vector<int> count(num_classes, 0);
  for (int i = 0; i < embeddings.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= num_classes) throw Error(ErrorKind::kLabelOutOfRange, std::to_string(y));
    sums.col(y) += embeddings.rows().row(i).transpose();
    ++count[y];
  }
  for (int c = 0; c < num_classes; ++c) {
    if (count[c] == 0) throw Error(ErrorKind::kEmptyClass, "class " + std::to_string(c));
    // A cancelled mean is reported as a degenerate class, not a rounding tail.
    if (sums.col(c).norm() < 1e-9 * count[c]) {
      throw Error(ErrorKind::kZeroVector, "mean of class " + std::to_string(c) + " cancels");
    }
  }
  return NormalizeColumns(sums);
}

double MeanNearestAngleDeg(const CentreMatrix& centres) {
  const Matrix& w = centres.columns();
  const int n = centres.num_classes();
  double total = 0.0;
  for (int j = 0; j < n; ++j) {
    double nearest = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n; ++k) {
      if (k != j) nearest = std::min(nearest, ColumnAngleDeg(w, j, w, k));
    }
    total += nearest;
  }
  return total / n;
}

AngleReport ComputeAngleReport(const EmbeddingBatch& embeddings, const Labels& labels,
                               const std::optional<CentreMatrix>& learned_centres) {
  int num_classes = 0;
  for (int y : labels) num_classes = std::max(num_classes, y + 1);
  if (learned_centres) num_classes = std::max(num_classes, learned_centres->num_classes());
  const CentreMatrix empirical = ClassCentres(embeddings, labels, num_classes);
  const Matrix& e = empirical.columns();

  AngleReport report;
  if (learned_centres) {
    if (learned_centres->dim() != embeddings.dim()) {
      throw Error(ErrorKind::kDimensionMismatch, "learned centres have the wrong dimension");
    }
    const Matrix& w = learned_centres->columns();
    double w_ec = 0.0;
    for (int j = 0; j < num_classes; ++j) w_ec += ColumnAngleDeg(w, j, e, j);
    report.w_ec = w_ec / num_classes;
    report.w_inter = MeanNearestAngleDeg(*learned_centres);
  }
  double intra = 0.0;
  for (int i = 0; i < embeddings.size(); ++i) {
    const Eigen::RowVectorXd x = embeddings.rows().row(i);
    intra += UnitAngle(x.data(), e.col(labels[i]).data(), embeddings.dim()) * kDegPerRad;
  }
  report.intra = intra / embeddings.size();
  report.inter = MeanNearestAngleDeg(empirical);
  return report;
}

PairSet SamplePairs(const EmbeddingBatch& embeddings, const Labels& labels,
                    std::optional<long> n_neg, std::uint64_t seed) {
  const int n = embeddings.size();
  if (static_cast<int>(labels.size()) != n) {
    throw Error(ErrorKind::kDimensionMismatch, "label count differs from sample count");
  }
  const Matrix& x = embeddings.rows();
  PairSet pairs;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (labels[i] == labels[j]) pairs.positives.push_back({i, j, RowAngleDeg(x, i, j)});
    }
  }
  if (pairs.positives.empty()) throw Error(ErrorKind::kNoPositivePairs, "no class has two samples");

  const long all_pairs = static_cast<long>(n) * (n - 1) / 2;
  const long all_negatives = all_pairs - static_cast<long>(pairs.positives.size());
  const long wanted =
      n_neg.value_or(std::min(all_negatives, 5L * static_cast<long>(pairs.positives.size())));
  if (wanted >= all_negatives) {
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (labels[i] != labels[j]) pairs.negatives.push_back({i, j, RowAngleDeg(x, i, j)});
      }
    }
    return pairs;
  }
  Rng rng(seed);
  std::uniform_int_distribution<int> pick(0, n - 1);
  pairs.negatives.reserve(static_cast<std::size_t>(wanted));
  while (static_cast<long>(pairs.negatives.size()) < wanted) {
    const int i = pick(rng);
    const int j = pick(rng);
    if (labels[i] == labels[j]) continue;
    const int a = std::min(i, j);
    const int b = std::max(i, j);
    pairs.negatives.push_back({a, b, RowAngleDeg(x, a, b)});
  }
  return pairs;
}

PairHistogram HistogramPairs(const PairSet& pairs, double bin_width_deg) {
  if (!(bin_width_deg > 0.0 && bin_width_deg <= 180.0)) {
    throw Error(ErrorKind::kBadRange, "bin width must lie in (0, 180]");
  }
  PairHistogram h;
  h.bin_width_deg = bin_width_deg;
  const auto bins = static_cast<std::size_t>(std::ceil(180.0 / bin_width_deg - 1e-9));
  h.positive.assign(bins, 0);
  h.negative.assign(bins, 0);
  auto bin_of = [&](double angle) {
    const auto b = static_cast<std::size_t>(std::max(0.0, std::floor(angle / bin_width_deg)));
    return std::min(b, bins - 1);
  };
  for (const auto& p : pairs.positives) ++h.positive[bin_of(p.angle_deg)];
  for (const auto& p : pairs.negatives) ++h.negative[bin_of(p.angle_deg)];
  return h;
}

PairHistogram MakePairHistogram(const EmbeddingBatch& embeddings, const Labels& labels,
                                std::optional<long> n_neg, std::uint64_t seed,
                                double bin_width_deg) {
  return HistogramPairs(SamplePairs(embeddings, labels, n_neg, seed), bin_width_deg);
}

double OverlapMass(const PairHistogram& histogram) {
  double pos_total = 0.0;
  double neg_total = 0.0;
  for (long c : histogram.positive) pos_total += static_cast<double>(c);
  for (long c : histogram.negative) neg_total += static_cast<double>(c);
  if (pos_total == 0.0 || neg_total == 0.0) return 0.0;
  double overlap = 0.0;
  for (std::size_t b = 0; b < histogram.positive.size(); ++b) {
    overlap += std::min(histogram.positive[b] / pos_total, histogram.negative[b] / neg_total);
  }
  return overlap;
}

VerificationResult VerificationAccuracy(const PairSet& pairs) {
  if (pairs.positives.empty() || pairs.negatives.empty()) {
    throw Error(ErrorKind::kEmptyPairSet, "need at least one positive and one negative pair");
  }
  struct Scored {
    double angle;
    bool positive;
  };
  std::vector<Scored> all;
  all.reserve(pairs.positives.size() + pairs.negatives.size());
  for (const auto& p : pairs.positives) all.push_back({p.angle_deg, true});
  for (const auto& p : pairs.negatives) all.push_back({p.angle_deg, false});
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) { return a.angle < b.angle; });

  const auto total = static_cast<double>(all.size());
  const auto negatives = static_cast<double>(pairs.negatives.size());
  // Threshold at the smallest angle: nothing is strictly below it.
  VerificationResult best{negatives / total, all.front().angle};
  long pos_below = 0;
  long neg_below = 0;
  for (std::size_t k = 1; k <= all.size(); ++k) {
    if (all[k - 1].positive) {
      ++pos_below;
    } else {
      ++neg_below;
    }
    double threshold;
    if (k == all.size()) {
      threshold = all.back().angle + 1.0;
    } else if (all[k].angle > all[k - 1].angle) {
      threshold = 0.5 * (all[k - 1].angle + all[k].angle);
    } else {
      continue;
    }
    const double accuracy = (static_cast<double>(pos_below) + negatives - static_cast<double>(neg_below)) / total;
    if (accuracy > best.accuracy) best = {accuracy, threshold};
  }
  return best;
}

}  // namespace arclab
