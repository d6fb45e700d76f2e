#ifndef ARCLAB_AUTONET_H_
#define ARCLAB_AUTONET_H_

#include <cstdint>
#include <vector>

#include "arclab/hypersphere.h"
#include "arclab/margin.h"
#include "arclab/penalties.h"

namespace arclab {

// affine -> ReLU -> affine feature extractor.
struct ToyNet {
  Matrix w1;  // d_in x h
  Vector b1;  // h
  Matrix w2;  // h x d_emb
  Vector b2;  // d_emb

  int input_dim() const { return static_cast<int>(w1.rows()); }
  int hidden_dim() const { return static_cast<int>(w1.cols()); }
  int embedding_dim() const { return static_cast<int>(w2.cols()); }
};

// He-scaled Gaussian weights, zero biases.
ToyNet MakeToyNet(int input_dim, int hidden_dim, int embedding_dim, Rng& rng);

// Raw (unnormalized) embeddings, one row per input row.
Matrix Forward(const ToyNet& net, const Matrix& inputs);

struct NetGradients {
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;
};

// Exact chain rule for d loss / d parameters given d loss / d embeddings.
// The ReLU derivative at 0 is taken as 0.
NetGradients Backward(const ToyNet& net, const Matrix& inputs, const Matrix& grad_embeddings);

struct SgdHyper {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

// v <- momentum * v + grad + weight_decay * param; param <- param - lr * v.
// Throws kNonFiniteGradient before touching any state.
void SgdStep(Eigen::Ref<Matrix> param, const Eigen::Ref<const Matrix>& grad,
             Eigen::Ref<Matrix> velocity, const SgdHyper& hyper);

struct SynthSpec {
  int n_classes = 8;
  int samples_per_class = 1500;
  int input_dim = 16;
  double kappa = 100.0;  // noise scale is 1 / sqrt(kappa); +inf means noiseless
  std::uint64_t seed = 7;
};

struct Dataset {
  Matrix inputs;  // N x d_in
  Labels labels;
  int num_classes = 0;

  int size() const { return static_cast<int>(inputs.rows()); }
};

// Class means are uniform directions at least 15 degrees apart (rejection
// sampling, kRejectionExhausted after 10^4 draws); samples are the mean plus
// isotropic Gaussian noise. Rows are grouped by class.
Dataset SynthDataset(const SynthSpec& spec);

// Stratified split: within each class a seeded shuffle sends the first
// round(fraction * n_c) samples to the training part.
std::pair<Dataset, Dataset> SplitDataset(const Dataset& data, double train_fraction,
                                         std::uint64_t seed);

struct TrainConfig {
  int hidden_dim = 64;
  int embedding_dim = 2;
  double lr = 0.1;
  std::vector<int> lr_drops = {1200, 1700};
  int total_iters = 2000;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int batch_size = 512;
  std::uint64_t seed = 1;
  MarginSpec margin = PresetSpec(Preset::kArcFace);
  LossKind loss_kind = LossKind::kCombined;
  double penalty_weight = 1.0;
  double triplet_margin = 0.35;
  double snapshot_bin_deg = 5.0;
};

void ValidateTrainConfig(const TrainConfig& config);

struct Model {
  ToyNet net;
  Matrix centres;  // raw, d_emb x n
};

// Histogram of each training sample's angle to its own (normalized) centre.
struct ThetaSnapshot {
  int iteration = 0;
  double bin_width_deg = 5.0;
  std::vector<long> counts;
  double mean_deg = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<double> loss_trace;  // batch loss at each iteration, before the update
  std::vector<double> lr_trace;
  std::vector<ThetaSnapshot> snapshots;  // iteration 0, midpoint, end
  double initial_full_loss = 0.0;        // objective on the whole training set
  double final_full_loss = 0.0;
};

double LearningRateAt(const TrainConfig& config, int iteration);

// Objective over the full dataset at the given parameters (no update).
double FullObjective(const Model& model, const Dataset& data, const TrainConfig& config);

ThetaSnapshot TakeThetaSnapshot(const Model& model, const Dataset& data, int iteration,
                                double bin_width_deg);

// Single-threaded loop: batch -> forward -> objective -> backward -> SGD on
// the net and on the raw centre matrix. Throws kDivergenceDetected when the
// batch loss becomes non-finite.
TrainResult Train(const TrainConfig& config, const Dataset& data);

struct ClassSpread {
  Vector direction;  // empirical centre
  double mean_deg = 0.0;
  double p95_deg = 0.0;
};

struct Fig3Report {
  std::vector<ClassSpread> classes;
  Matrix separation_deg;  // n x n, centre-to-centre angles
  double min_separation_deg = 0.0;
  double max_p95_deg = 0.0;
  // min_separation - 2 * max_p95: positive when the 95% cones of the two
  // closest classes do not touch.
  double gap_deg = 0.0;
};

// Linear-interpolation percentile (q in [0, 1]) of an unsorted sample.
double Percentile(std::vector<double> values, double q);

Fig3Report MakeFig3Report(const ToyNet& net, const Dataset& data);
Fig3Report MakeFig3Report(const EmbeddingBatch& embeddings, const Labels& labels, int num_classes);

}  // namespace arclab

#endif  // ARCLAB_AUTONET_H_
