#ifndef ARCLAB_HYPERSPHERE_H_
#define ARCLAB_HYPERSPHERE_H_

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace arclab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Labels = std::vector<int>;
using Rng = std::mt19937_64;

// Maximum deviation of a stored unit vector's norm from 1.
inline constexpr double kUnitNormTolerance = 1e-12;
// Rows/columns with a smaller norm cannot be normalized.
inline constexpr double kMinNorm = 1e-30;

class UnitVector {
 public:
  // Throws kZeroVector for degenerate input, kInvalidDimension for d < 2.
  static UnitVector Normalize(const Vector& raw);
  // Wraps an already-normalized vector; throws if the norm is off by more
  // than kUnitNormTolerance.
  static UnitVector FromUnit(const Vector& unit);

  const Vector& components() const { return components_; }
  int dim() const { return static_cast<int>(components_.size()); }

 private:
  explicit UnitVector(Vector v) : components_(std::move(v)) {}
  Vector components_;
};

// N x d, one unit-norm sample per row.
class EmbeddingBatch {
 public:
  static EmbeddingBatch FromUnitRows(Matrix rows);

  const Matrix& rows() const { return rows_; }
  int size() const { return static_cast<int>(rows_.rows()); }
  int dim() const { return static_cast<int>(rows_.cols()); }

 private:
  explicit EmbeddingBatch(Matrix rows) : rows_(std::move(rows)) {}
  Matrix rows_;
};

// d x n, one unit-norm class centre per column.
class CentreMatrix {
 public:
  static CentreMatrix FromUnitColumns(Matrix columns);

  const Matrix& columns() const { return columns_; }
  int dim() const { return static_cast<int>(columns_.rows()); }
  int num_classes() const { return static_cast<int>(columns_.cols()); }

 private:
  explicit CentreMatrix(Matrix columns) : columns_(std::move(columns)) {}
  Matrix columns_;
};

EmbeddingBatch NormalizeRows(const Matrix& matrix);
CentreMatrix NormalizeColumns(const Matrix& matrix);
// Column normalization without the n >= 2 centre-matrix requirement (a
// shard may own a single class).
Matrix UnitColumns(const Matrix& matrix);

// Sequential dot product; the accumulation order is fixed so that every
// angle in the library is computed bit-identically.
double OrderedDot(const double* a, const double* b, int d);

double Angle(const UnitVector& u, const UnitVector& v);
// Angle between two unit vectors given as raw storage of length d.
double UnitAngle(const double* u, const double* v, int d);

UnitVector SampleUniformSphere(int d, Rng& rng);
// d x n matrix of independent uniform directions.
CentreMatrix SampleUniformCentres(int d, int n, Rng& rng);

// Minimum angle over all unordered column pairs. Uses a blocked Gram
// product to locate candidates and re-evaluates them with UnitAngle, so the
// result equals the exhaustive pair scan exactly.
double MinPairwiseAngle(const CentreMatrix& centres);

// Asymptotic expectation of the smallest pairwise angle among n uniform
// points on the unit sphere in R^d. Valid as n grows large relative to d.
double ExpectedNearestSeparation(int d, double n);

struct SeparationEstimate {
  double mean = 0.0;
  double stddev = 0.0;
  int trials = 0;
};

// Monte-Carlo counterpart of ExpectedNearestSeparation. Trial t uses its own
// generator seeded from (seed, t), so trials can be split across workers.
SeparationEstimate MonteCarloNearestSeparation(int d, int n, int trials, std::uint64_t seed);

}  // namespace arclab

#endif  // ARCLAB_HYPERSPHERE_H_
