#include "arclab/penalties.h"

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "expect_error.h"
#include "oracles.h"

namespace arclab {
namespace {

using oracle::Real;
using std::numbers::pi;

Vector OnCircle(double angle) {
  Vector v(2);
  v << std::cos(angle), std::sin(angle);
  return v;
}

TEST(IntraPenalty, ZeroWhenFeaturesSitOnCentres) {
  const CentreMatrix w = NormalizeColumns(Matrix::Identity(3, 3));
  const EmbeddingBatch x = NormalizeRows(Matrix::Identity(3, 3));
  EXPECT_EQ(IntraPenalty(x, w, {0, 1, 2}).value, 0.0);
}

TEST(IntraPenalty, HalfWhenOrthogonal) {
  const CentreMatrix w = NormalizeColumns(Matrix::Identity(3, 3));
  const EmbeddingBatch x = NormalizeRows(Matrix::Identity(3, 3));
  EXPECT_NEAR(IntraPenalty(x, w, {1, 2, 0}).value, 0.5, 1e-15);
}

TEST(InterPenalty, OrthonormalCentres) {
  const CentreMatrix w = NormalizeColumns(Matrix::Identity(4, 4));
  EXPECT_NEAR(InterPenalty(w, {0, 3, 3, 1, 2}).value, -0.5, 1e-15);
}

TEST(InterPenalty, AntipodalPair) {
  Matrix m(2, 2);
  m << 1, -1, 0, 0;
  EXPECT_NEAR(InterPenalty(NormalizeColumns(m), {0, 1, 1}).value, -1.0, 1e-15);
}

TEST(InterPenalty, OnlyCentresGetGradient) {
  Rng rng(1);
  const CentreMatrix w = NormalizeColumns(oracle::Gaussian(3, 5, rng));
  const PenaltyOutput out = InterPenalty(w, {0, 1, 4});
  EXPECT_EQ(out.grad_centres.rows(), 3);
  EXPECT_EQ(out.grad_centres.cols(), 5);
  EXPECT_EQ(out.grad_features.size() == 0 || out.grad_features.isZero(), true);
}

// Penalty gradients are taken on the sphere; chaining them through the
// normalization must reproduce finite differences of the raw-input oracle.
TEST(IntraPenalty, GradientMatchesFiniteDifferences) {
  Rng rng(2);
  int checked = 0;
  while (checked < 30) {
    const Matrix x = oracle::Gaussian(6, 4, rng);
    const Matrix w = oracle::Gaussian(4, 5, rng);
    const Labels y = oracle::RandomLabels(6, 5, rng);
    bool near_clamp = false;
    for (int i = 0; i < 6; ++i) {
      const Real t = oracle::AngleBetween(oracle::UnitRow(x, i), oracle::UnitCol(w, y[i]));
      near_clamp = near_clamp || t < 1e-3 || t > pi - 1e-3;
    }
    if (near_clamp) continue;
    const PenaltyOutput out = IntraPenalty(NormalizeRows(x), NormalizeColumns(w), y);
    EXPECT_NEAR(out.value, static_cast<double>(oracle::IntraPenalty(x, w, y)), 1e-14);
    const Matrix gx = BackpropRowNormalization(x, out.grad_features);
    const Matrix gw = BackpropColumnNormalization(w, out.grad_centres);
    auto by_x = [&](const Matrix& m) { return static_cast<double>(oracle::IntraPenalty(m, w, y)); };
    auto by_w = [&](const Matrix& m) { return static_cast<double>(oracle::IntraPenalty(x, m, y)); };
    EXPECT_LE(oracle::RelErr(gx, oracle::CentralDifference(by_x, x, 1e-5)), 1e-6);
    EXPECT_LE(oracle::RelErr(gw, oracle::CentralDifference(by_w, w, 1e-5)), 1e-6);
    ++checked;
  }
}

TEST(InterPenalty, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  for (int t = 0; t < 30; ++t) {
    const Matrix w = oracle::Gaussian(5, 6, rng);
    const Labels y = oracle::RandomLabels(7, 6, rng);
    const PenaltyOutput out = InterPenalty(NormalizeColumns(w), y);
    EXPECT_NEAR(out.value, static_cast<double>(oracle::InterPenalty(w, y)), 1e-14);
    const Matrix gw = BackpropColumnNormalization(w, out.grad_centres);
    auto by_w = [&](const Matrix& m) { return static_cast<double>(oracle::InterPenalty(m, y)); };
    EXPECT_LE(oracle::RelErr(gw, oracle::CentralDifference(by_w, w, 1e-5)), 1e-6);
  }
}

TEST(AngularTriplet, SatisfiedHingeIsZero) {
  const TripletOutput out = AngularTriplet(UnitVector::FromUnit(OnCircle(0)), UnitVector::FromUnit(OnCircle(0.2)),
                                           UnitVector::FromUnit(OnCircle(-1.0)), 0.35);
  EXPECT_EQ(out.loss, 0.0);
  EXPECT_TRUE(out.grad_anchor.isZero());
  EXPECT_TRUE(out.grad_positive.isZero());
  EXPECT_TRUE(out.grad_negative.isZero());
}

TEST(AngularTriplet, ActiveHingeArithmetic) {
  const TripletOutput out = AngularTriplet(UnitVector::FromUnit(OnCircle(0)), UnitVector::FromUnit(OnCircle(0.9)),
                                           UnitVector::FromUnit(OnCircle(1.0)), 0.35);
  EXPECT_NEAR(out.loss, 0.25, 1e-14);
}

// Hinge as a function of three free vectors (no renormalization), matching
// the convention that gradients treat the unit vectors as free variables.
double FreeHinge(const Vector& a, const Vector& p, const Vector& n, double m) {
  auto ang = [](const Vector& u, const Vector& v) {
    Real d = 0;
    for (Eigen::Index k = 0; k < u.size(); ++k) d += static_cast<Real>(u(k)) * v(k);
    return std::acos(oracle::Clamp1(d));
  };
  return static_cast<double>(std::max<Real>(0, ang(a, p) + m - ang(a, n)));
}

TEST(AngularTriplet, ActiveGradientMatchesFiniteDifferences) {
  Rng rng(4);
  int checked = 0;
  while (checked < 40) {
    const UnitVector a = SampleUniformSphere(5, rng);
    const UnitVector p = SampleUniformSphere(5, rng);
    const UnitVector n = SampleUniformSphere(5, rng);
    const double hinge = Angle(a, p) + 0.35 - Angle(a, n);
    if (hinge < 1e-3) continue;
    const TripletOutput out = AngularTriplet(a, p, n, 0.35);
    EXPECT_NEAR(out.loss, hinge, 1e-14);
    const Vector& av = a.components();
    const Vector& pv = p.components();
    const Vector& nv = n.components();
    auto by_a = [&](const Matrix& m) { return FreeHinge(m, pv, nv, 0.35); };
    auto by_p = [&](const Matrix& m) { return FreeHinge(av, m, nv, 0.35); };
    auto by_n = [&](const Matrix& m) { return FreeHinge(av, pv, m, 0.35); };
    EXPECT_LE(oracle::RelErr(out.grad_anchor, oracle::CentralDifference(by_a, av, 1e-6)), 1e-6);
    EXPECT_LE(oracle::RelErr(out.grad_positive, oracle::CentralDifference(by_p, pv, 1e-6)), 1e-6);
    EXPECT_LE(oracle::RelErr(out.grad_negative, oracle::CentralDifference(by_n, nv, 1e-6)), 1e-6);
    ++checked;
  }
}

// Batch-hard triplet on raw features, written independently.
double BatchHardOracle(const Matrix& x, const Labels& y, double margin) {
  Real total = 0;
  int anchors = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Real far_pos = -1;
    Real near_neg = 10;
    for (Eigen::Index j = 0; j < x.rows(); ++j) {
      if (j == i) continue;
      const Real t = oracle::AngleBetween(oracle::UnitRow(x, i), oracle::UnitRow(x, j));
      if (y[j] == y[i]) {
        far_pos = std::max(far_pos, t);
      } else {
        near_neg = std::min(near_neg, t);
      }
    }
    if (far_pos < 0 || near_neg > 5) continue;
    ++anchors;
    total += std::max<Real>(0, far_pos + margin - near_neg);
  }
  return anchors == 0 ? 0.0 : static_cast<double>(total / anchors);
}

TEST(BatchTripletPenalty, MatchesOracleValue) {
  Rng rng(5);
  for (int t = 0; t < 30; ++t) {
    const Matrix x = oracle::Gaussian(8, 3, rng);
    const Labels y = oracle::RandomLabels(8, 3, rng);
    EXPECT_NEAR(BatchTripletPenalty(NormalizeRows(x), y, 0.35).value, BatchHardOracle(x, y, 0.35), 1e-13);
  }
}

TEST(BatchTripletPenalty, NoValidAnchorsGivesZero) {
  Rng rng(6);
  const Matrix x = oracle::Gaussian(4, 3, rng);
  const PenaltyOutput out = BatchTripletPenalty(NormalizeRows(x), {0, 1, 2, 3}, 0.35);
  EXPECT_EQ(out.value, 0.0);
  EXPECT_TRUE(out.grad_features.isZero());
}

double XentOracle(const Matrix& x, const Matrix& w, const Labels& y) {
  Real total = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    std::vector<Real> z(w.cols());
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index k = 0; k < x.cols(); ++k) z[j] += static_cast<Real>(x(i, k)) * w(k, j);
    }
    const Real zmax = *std::max_element(z.begin(), z.end());
    Real sum = 0;
    for (Real v : z) sum += std::exp(v - zmax);
    total += std::log(sum) + zmax - z[y[i]];
  }
  return static_cast<double>(total / x.rows());
}

TEST(EvaluateObjective, UnnormalizedSoftmaxUsesRawInnerProducts) {
  Rng rng(7);
  for (int t = 0; t < 20; ++t) {
    const Matrix x = oracle::Gaussian(5, 4, rng);
    const Matrix w = oracle::Gaussian(4, 6, rng);
    const Labels y = oracle::RandomLabels(5, 6, rng);
    const ObjectiveConfig cfg{LossKind::kSoftmaxUnnormalized, MarginSpec{}, 1.0, 0.35};
    const LossOutput out = EvaluateObjective(x, w, y, cfg);
    EXPECT_NEAR(out.loss, XentOracle(x, w, y), 1e-13);
    auto by_x = [&](const Matrix& m) { return XentOracle(m, w, y); };
    auto by_w = [&](const Matrix& m) { return XentOracle(x, m, y); };
    EXPECT_LE(oracle::RelErr(out.grad_features, oracle::CentralDifference(by_x, x, 1e-5)), 1e-6);
    EXPECT_LE(oracle::RelErr(out.grad_centres, oracle::CentralDifference(by_w, w, 1e-5)), 1e-6);
  }
}

TEST(EvaluateObjective, CompositesAddWeightedPenalty) {
  Rng rng(8);
  const Matrix x = oracle::Gaussian(8, 4, rng);
  const Matrix w = oracle::Gaussian(4, 3, rng);
  const Labels y = {0, 0, 1, 1, 2, 2, 0, 1};
  const MarginSpec arc = PresetSpec(Preset::kArcFace);
  const double base = EvaluateObjective(x, w, y, {LossKind::kCombined, arc, 1.0, 0.35}).loss;
  const double intra = static_cast<double>(oracle::IntraPenalty(x, w, y));
  const double inter = static_cast<double>(oracle::InterPenalty(w, y));
  const double trip = BatchHardOracle(x, y, 0.35);
  EXPECT_NEAR(EvaluateObjective(x, w, y, {LossKind::kCombinedIntra, arc, 2.5, 0.35}).loss, base + 2.5 * intra, 1e-12);
  EXPECT_NEAR(EvaluateObjective(x, w, y, {LossKind::kCombinedInter, arc, 2.5, 0.35}).loss, base + 2.5 * inter, 1e-12);
  EXPECT_NEAR(EvaluateObjective(x, w, y, {LossKind::kCombinedTriplet, arc, 2.5, 0.35}).loss, base + 2.5 * trip,
              1e-12);
  const LossOutput only = EvaluateObjective(x, w, y, {LossKind::kTripletOnly, arc, 2.5, 0.35});
  EXPECT_NEAR(only.loss, trip, 1e-12);
  EXPECT_TRUE(only.grad_centres.isZero());
}

TEST(LossKind, NamesRoundTrip) {
  for (LossKind k : kAllLossKinds) EXPECT_EQ(ParseLossKind(LossKindName(k)), k);
  EXPECT_FALSE(ParseLossKind("combined+both").has_value());
}

TEST(ArccosSlope, ClampRegionHasZeroSlope) {
  EXPECT_EQ(ArccosSlope(1.0 + 1e-12), 0.0);
  EXPECT_EQ(ArccosSlope(-1.0 - 1e-12), 0.0);
  EXPECT_NEAR(ArccosSlope(0.0), -1.0, 1e-15);
  EXPECT_EQ(ArccosSlope(1.0), -1.0 / kMinSinTheta);
}

}  // namespace
}  // namespace arclab
