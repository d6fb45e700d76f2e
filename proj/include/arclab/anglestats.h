#ifndef ARCLAB_ANGLESTATS_H_
#define ARCLAB_ANGLESTATS_H_

#include <cstdint>
#include <optional>
#include <vector>

#include "arclab/hypersphere.h"

namespace arclab {

// Normalized mean of each class's embeddings. Throws kEmptyClass when a
// class has no samples and kZeroVector when its mean cancels out.
CentreMatrix ClassCentres(const EmbeddingBatch& embeddings, const Labels& labels, int num_classes);

// All fields in degrees. w_ec and w_inter are absent for models without a
// learned centre matrix (triplet-only training).
struct AngleReport {
  std::optional<double> w_ec;     // mean angle(W_j, empirical centre j)
  std::optional<double> w_inter;  // mean over j of min_{k != j} angle(W_j, W_k)
  double intra = 0.0;             // mean angle(x_i, empirical centre of y_i)
  double inter = 0.0;             // mean over j of min_{k != j} angle between empirical centres
};

AngleReport ComputeAngleReport(const EmbeddingBatch& embeddings, const Labels& labels,
                               const std::optional<CentreMatrix>& learned_centres);

// Mean over columns of the angle to the nearest other column, in degrees.
double MeanNearestAngleDeg(const CentreMatrix& centres);

struct AngularPair {
  int first = 0;
  int second = 0;
  double angle_deg = 0.0;
};

struct PairSet {
  std::vector<AngularPair> positives;
  std::vector<AngularPair> negatives;
};

// Every same-class pair, plus n_neg different-class pairs drawn uniformly
// (with replacement) from the seeded generator. When n_neg is absent it
// defaults to min(all negatives, 5 * positives); asking for at least as many
// as exist enumerates them all. Throws kNoPositivePairs.
PairSet SamplePairs(const EmbeddingBatch& embeddings, const Labels& labels,
                    std::optional<long> n_neg, std::uint64_t seed);

struct PairHistogram {
  double bin_width_deg = 1.0;
  std::vector<long> positive;
  std::vector<long> negative;

  double bin_start(std::size_t b) const { return static_cast<double>(b) * bin_width_deg; }
};

// Fixed-width bins covering [0, 180]; 180 itself lands in the last bin.
PairHistogram HistogramPairs(const PairSet& pairs, double bin_width_deg);

PairHistogram MakePairHistogram(const EmbeddingBatch& embeddings, const Labels& labels,
                                std::optional<long> n_neg, std::uint64_t seed,
                                double bin_width_deg);

// Shared mass of the two normalized histograms, sum_b min(p_b, q_b).
double OverlapMass(const PairHistogram& histogram);

struct VerificationResult {
  double accuracy = 0.0;
  double threshold_deg = 0.0;
};

// A pair is called "same" when its angle is strictly below the threshold.
// Candidates are the smallest angle (everything "different"), the midpoints
// between adjacent distinct angles, and one degree past the largest angle
// (everything "same"); ties resolve to the smallest threshold.
VerificationResult VerificationAccuracy(const PairSet& pairs);

}  // namespace arclab

#endif  // ARCLAB_ANGLESTATS_H_
