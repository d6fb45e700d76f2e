#include "arclab/hypersphere.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "arclab/error.h"

namespace arclab {
namespace {

void CheckUnitNorm(double norm, const char* what) {
  if (!(std::abs(norm - 1.0) <= kUnitNormTolerance)) {
    throw Error(ErrorKind::kNotUnitNorm,
                std::string(what) + " is not unit norm (norm " + std::to_string(norm) + ")");
  }
}

double ClampCos(double c) { return std::clamp(c, -1.0, 1.0); }

}  // namespace

UnitVector UnitVector::Normalize(const Vector& raw) {
  if (raw.size() < 2) throw Error(ErrorKind::kInvalidDimension, "unit vectors need d >= 2");
  const double norm = raw.norm();
  if (!(norm >= kMinNorm)) throw Error(ErrorKind::kZeroVector, "cannot normalize a zero vector");
  return UnitVector(raw / norm);
}

UnitVector UnitVector::FromUnit(const Vector& unit) {
  if (unit.size() < 2) throw Error(ErrorKind::kInvalidDimension, "unit vectors need d >= 2");
  CheckUnitNorm(unit.norm(), "vector");
  return UnitVector(unit);
}

EmbeddingBatch EmbeddingBatch::FromUnitRows(Matrix rows) {
  if (rows.rows() < 1) throw Error(ErrorKind::kInvalidDimension, "embedding batch is empty");
  if (rows.cols() < 2) throw Error(ErrorKind::kInvalidDimension, "embeddings need d >= 2");
  for (Eigen::Index i = 0; i < rows.rows(); ++i) CheckUnitNorm(rows.row(i).norm(), "embedding row");
  return EmbeddingBatch(std::move(rows));
}

CentreMatrix CentreMatrix::FromUnitColumns(Matrix columns) {
  if (columns.cols() < 2) throw Error(ErrorKind::kInvalidDimension, "centre matrix needs n >= 2");
  if (columns.rows() < 2) throw Error(ErrorKind::kInvalidDimension, "centres need d >= 2");
  for (Eigen::Index j = 0; j < columns.cols(); ++j) CheckUnitNorm(columns.col(j).norm(), "centre column");
  return CentreMatrix(std::move(columns));
}

EmbeddingBatch NormalizeRows(const Matrix& matrix) {
  Matrix out(matrix.rows(), matrix.cols());
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    const double norm = matrix.row(i).norm();
    if (!std::isfinite(norm)) {
      throw Error(ErrorKind::kNonFiniteInput, "row " + std::to_string(i) + " is not finite");
    }
    if (!(norm >= kMinNorm)) {
      throw Error(ErrorKind::kZeroVector, "row " + std::to_string(i) + " has zero norm");
    }
    out.row(i) = matrix.row(i) / norm;
  }
  return EmbeddingBatch::FromUnitRows(std::move(out));
}

Matrix UnitColumns(const Matrix& matrix) {
  Matrix out(matrix.rows(), matrix.cols());
  for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
    const double norm = matrix.col(j).norm();
    if (!std::isfinite(norm)) {
      throw Error(ErrorKind::kNonFiniteInput, "column " + std::to_string(j) + " is not finite");
    }
    if (!(norm >= kMinNorm)) {
      throw Error(ErrorKind::kZeroVector, "column " + std::to_string(j) + " has zero norm");
    }
    out.col(j) = matrix.col(j) / norm;
  }
  return out;
}

CentreMatrix NormalizeColumns(const Matrix& matrix) {
  return CentreMatrix::FromUnitColumns(UnitColumns(matrix));
}

double OrderedDot(const double* a, const double* b, int d) {
  double acc = 0.0;
  for (int k = 0; k < d; ++k) acc += a[k] * b[k];
  return acc;
}

double UnitAngle(const double* u, const double* v, int d) {
  return std::acos(ClampCos(OrderedDot(u, v, d)));
}

double Angle(const UnitVector& u, const UnitVector& v) {
  if (u.dim() != v.dim()) {
    throw Error(ErrorKind::kDimensionMismatch,
                std::to_string(u.dim()) + " vs " + std::to_string(v.dim()));
  }
  return UnitAngle(u.components().data(), v.components().data(), u.dim());
}

UnitVector SampleUniformSphere(int d, Rng& rng) {
  if (d < 2) throw Error(ErrorKind::kInvalidDimension, "sphere sampling needs d >= 2");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(d);
  double norm = 0.0;
  do {
    for (int k = 0; k < d; ++k) v[k] = gauss(rng);
    norm = v.norm();
  } while (norm < kMinNorm);
  return UnitVector::Normalize(v);
}

CentreMatrix SampleUniformCentres(int d, int n, Rng& rng) {
  Matrix columns(d, n);
  for (int j = 0; j < n; ++j) columns.col(j) = SampleUniformSphere(d, rng).components();
  return CentreMatrix::FromUnitColumns(std::move(columns));
}

double MinPairwiseAngle(const CentreMatrix& centres) {
  constexpr Eigen::Index kBlock = 512;
  // Far above the rounding error of a blocked dot product; any pair whose
  // Gram entry is within this of the running best is re-evaluated exactly.
  constexpr double kSlack = 1e-9;

  const Matrix& x = centres.columns();
  const int d = centres.dim();
  const Eigen::Index n = x.cols();
  double best = -std::numeric_limits<double>::infinity();
  Matrix gram;
  for (Eigen::Index i0 = 0; i0 < n; i0 += kBlock) {
    const Eigen::Index bi = std::min(kBlock, n - i0);
    for (Eigen::Index j0 = i0; j0 < n; j0 += kBlock) {
      const Eigen::Index bj = std::min(kBlock, n - j0);
      gram.noalias() = x.middleCols(i0, bi).transpose() * x.middleCols(j0, bj);
      const bool diagonal = (i0 == j0);

      double block_max = -std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < bj; ++c) {
        const Eigen::Index r_end = diagonal ? c : bi;
        for (Eigen::Index r = 0; r < r_end; ++r) block_max = std::max(block_max, gram(r, c));
      }
      if (block_max < best - kSlack) continue;
      const double threshold = std::max(best, block_max) - kSlack;
      for (Eigen::Index c = 0; c < bj; ++c) {
        const Eigen::Index r_end = diagonal ? c : bi;
        for (Eigen::Index r = 0; r < r_end; ++r) {
          if (gram(r, c) < threshold) continue;
          const double exact = ClampCos(OrderedDot(x.col(i0 + r).data(), x.col(j0 + c).data(), d));
          best = std::max(best, exact);
        }
      }
    }
  }
  return std::acos(best);
}

double ExpectedNearestSeparation(int d, double n) {
  if (d < 2) throw Error(ErrorKind::kInvalidDimension, "d must be >= 2, got " + std::to_string(d));
  if (!(n >= 2.0)) throw Error(ErrorKind::kInvalidDimension, "class count must be >= 2");
  const double k = d - 1.0;
  // Gamma(d/2) overflows doubles for d >= ~344, so everything stays in logs.
  const double log_ratio = std::lgamma(d / 2.0) -
                           std::log(2.0 * std::sqrt(std::numbers::pi) * k) -
                           std::lgamma(k / 2.0);
  const double log_value = -(2.0 / k) * std::log(n) + std::lgamma(1.0 + 1.0 / k) - log_ratio / k;
  return std::exp(log_value);
}

SeparationEstimate MonteCarloNearestSeparation(int d, int n, int trials, std::uint64_t seed) {
  if (d < 2) throw Error(ErrorKind::kInvalidDimension, "d must be >= 2");
  if (n < 2) throw Error(ErrorKind::kInvalidDimension, "n must be >= 2");
  if (trials < 1) throw Error(ErrorKind::kBadRange, "need at least one trial");
  std::vector<double> samples(trials);
  for (int t = 0; t < trials; ++t) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(t)};
    Rng rng(seq);
    samples[t] = MinPairwiseAngle(SampleUniformCentres(d, n, rng));
  }
  SeparationEstimate est;
  est.trials = trials;
  for (double s : samples) est.mean += s;
  est.mean /= trials;
  if (trials > 1) {
    double ss = 0.0;
    for (double s : samples) ss += (s - est.mean) * (s - est.mean);
    est.stddev = std::sqrt(ss / (trials - 1));
  }
  return est;
}

}  // namespace arclab
