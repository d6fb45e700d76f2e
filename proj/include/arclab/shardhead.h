#ifndef ARCLAB_SHARDHEAD_H_
#define ARCLAB_SHARDHEAD_H_

#include <cstdint>
#include <vector>

#include "arclab/hypersphere.h"
#include "arclab/margin.h"

namespace arclab {

struct ShardRange {
  int begin = 0;
  int end = 0;  // exclusive

  int size() const { return end - begin; }
  bool Contains(int cls) const { return cls >= begin && cls < end; }
};

// Contiguous split of n classes over k devices; the first n % k shards get
// one extra class.
class ShardPlan {
 public:
  // Throws kInvalidShardCount unless 1 <= k <= n.
  static ShardPlan Make(int num_classes, int num_shards);

  int num_classes() const { return num_classes_; }
  int num_shards() const { return static_cast<int>(ranges_.size()); }
  const std::vector<ShardRange>& ranges() const { return ranges_; }
  int MaxShardSize() const { return ranges_.front().size(); }
  int OwnerOf(int cls) const;

 private:
  int num_classes_ = 0;
  std::vector<ShardRange> ranges_;
};

enum class Execution { kSerial, kThreaded };

// Scalars moved between simulated devices during one step.
struct CommLedger {
  std::int64_t feature_gather = 0;   // N x d feature block broadcast
  std::int64_t max_reduction = 0;    // pass 1: per-sample maxima from every shard
  std::int64_t sum_reduction = 0;    // pass 2: per-sample exp-sums from every shard
  std::int64_t dx_reduction = 0;     // per-shard partial feature gradients

  std::int64_t Total() const { return feature_gather + max_reduction + sum_reduction + dx_reduction; }
};

// What one simulated device keeps between forward and backward.
struct ShardDevice {
  ShardRange range;
  Matrix raw_centres;  // d x |range|
  Matrix centres;      // column-normalized
  Matrix cosines;      // N x |range|
  Matrix scores;       // s-scaled, margin applied on owned ground-truth columns
  Vector local_max;
  Vector local_sum;
};

struct ShardForwardState {
  MarginSpec spec;
  Labels labels;
  Matrix raw_features;
  Matrix features;  // row-normalized, identical on every device
  std::vector<ShardDevice> devices;
  Vector global_max;
  Vector global_sum;
  double loss = 0.0;
  CommLedger ledger;
};

// Model-parallel forward of the combined margin loss: feature broadcast,
// per-shard cosine and score blocks, then a two-pass (max, sum-exp)
// cross-shard softmax reduction in fixed shard order.
ShardForwardState ShardedForward(const Matrix& features, const Matrix& centres, const Labels& labels,
                                 const MarginSpec& spec, const ShardPlan& plan,
                                 Execution execution = Execution::kSerial);

struct ShardedGradients {
  Matrix grad_features;              // N x d, reduced over shards in shard order
  std::vector<Matrix> grad_centres;  // one d x |range| block per shard

  Matrix AssembleCentres() const;
};

// dW block = x^T dscore_block per shard (local); dx = sum_s dscore_s W_s^T.
// Adds the dx reduction to the state's ledger.
ShardedGradients ShardedBackward(ShardForwardState& state, Execution execution = Execution::kSerial);

// Sharded loss and gradients against the dense CombinedLoss on the same
// inputs. Relative errors are |a - b| / max(|a|, |b|) (Frobenius for
// matrices), 0 when both sides vanish.
struct ShardEquivalence {
  int num_shards = 1;
  double loss_rel_error = 0.0;
  double grad_features_rel_error = 0.0;
  double grad_centres_rel_error = 0.0;
  bool bitwise = false;

  double MaxRelError() const;
};

ShardEquivalence CompareWithDense(const Matrix& features, const Matrix& centres, const Labels& labels,
                                  const MarginSpec& spec, int num_shards,
                                  Execution execution = Execution::kSerial);

struct CostModel {
  std::int64_t batch = 0;
  std::int64_t dim = 0;
  std::int64_t num_classes = 0;
  int num_shards = 1;
  int bytes_per_scalar = 4;

  std::int64_t feature_gather_bytes = 0;     // N * d * b
  std::int64_t per_device_w_bytes = 0;       // d * ceil(n / k) * b
  std::int64_t per_device_score_bytes = 0;   // N * ceil(n / k) * b
  std::int64_t softmax_reduction_bytes = 0;  // 2 * N * k * b
  std::int64_t dx_reduction_bytes = 0;       // N * d * k * b

  std::int64_t CommunicatedBytes() const {
    return feature_gather_bytes + softmax_reduction_bytes + dx_reduction_bytes;
  }
  // The commonly quoted per-step figure counts the feature gather alone.
  std::int64_t FeatureGatherOnlyBytes() const { return feature_gather_bytes; }
};

// Decimal megabytes.
inline double ToMB(std::int64_t bytes) { return static_cast<double>(bytes) / 1e6; }

CostModel CostReport(std::int64_t batch, std::int64_t dim, std::int64_t num_classes, int num_shards,
                     int bytes_per_scalar = 4);

struct DeviceRates {
  double flops_per_second = 11e12;
  double link_bytes_per_second = 10e9;  // +inf disables the communication bound
};

struct ThroughputEstimate {
  double compute_seconds = 0.0;
  double comm_seconds = 0.0;
  double samples_per_second = 0.0;
};

// Analytic step time: max(per-device GEMM time for score, dW and dx,
// communicated bytes / link bandwidth). No wall-clock measurement.
ThroughputEstimate ThroughputModel(const ShardPlan& plan, std::int64_t batch, std::int64_t dim,
                                   const DeviceRates& rates, int bytes_per_scalar = 4);

}  // namespace arclab

#endif  // ARCLAB_SHARDHEAD_H_
