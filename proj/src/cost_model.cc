#include <algorithm>
#include <cmath>

#include "arclab/error.h"
#include "arclab/shardhead.h"

namespace arclab {

CostModel CostReport(std::int64_t batch, std::int64_t dim, std::int64_t num_classes, int num_shards,
                     int bytes_per_scalar) {
  if (batch < 1 || dim < 1 || num_classes < 1 || num_shards < 1 || bytes_per_scalar < 1) {
    throw Error(ErrorKind::kBadRange, "cost model arguments must be positive");
  }
  const std::int64_t b = bytes_per_scalar;
  const std::int64_t k = num_shards;
  const std::int64_t per_shard = (num_classes + k - 1) / k;
  CostModel cost;
  cost.batch = batch;
  cost.dim = dim;
  cost.num_classes = num_classes;
  cost.num_shards = num_shards;
  cost.bytes_per_scalar = bytes_per_scalar;
  cost.feature_gather_bytes = batch * dim * b;
  cost.per_device_w_bytes = dim * per_shard * b;
  cost.per_device_score_bytes = batch * per_shard * b;
  cost.softmax_reduction_bytes = 2 * batch * k * b;
  cost.dx_reduction_bytes = batch * dim * k * b;
  return cost;
}

ThroughputEstimate ThroughputModel(const ShardPlan& plan, std::int64_t batch, std::int64_t dim,
                                   const DeviceRates& rates, int bytes_per_scalar) {
  if (!(rates.flops_per_second > 0.0) || !(rates.link_bytes_per_second > 0.0)) {
    throw Error(ErrorKind::kBadRange, "rates must be positive");
  }
  const CostModel cost = CostReport(batch, dim, plan.num_classes(), plan.num_shards(), bytes_per_scalar);
  // score = x W, dW = x^T dscore and dx = dscore W^T on the largest shard;
  // the feature gather moves data but does no arithmetic.
  const double per_shard = static_cast<double>(plan.MaxShardSize());
  const double flops = 3.0 * 2.0 * static_cast<double>(batch) * static_cast<double>(dim) * per_shard;
  ThroughputEstimate est;
  est.compute_seconds = flops / rates.flops_per_second;
  est.comm_seconds = std::isinf(rates.link_bytes_per_second)
                         ? 0.0
                         : static_cast<double>(cost.CommunicatedBytes()) / rates.link_bytes_per_second;
  est.samples_per_second = static_cast<double>(batch) / std::max(est.compute_seconds, est.comm_seconds);
  return est;
}

}  // namespace arclab
