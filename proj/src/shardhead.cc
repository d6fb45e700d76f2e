#include "arclab/shardhead.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <thread>

#include "arclab/error.h"

namespace arclab {
namespace {

// Runs fn(shard) for every shard and returns once all have finished; this
// return is the barrier between simulation phases.
void ForEachShard(int num_shards, Execution execution, const std::function<void(int)>& fn) {
  if (execution == Execution::kSerial) {
    for (int s = 0; s < num_shards; ++s) fn(s);
    return;
  }
  std::vector<std::exception_ptr> errors(num_shards);
  {
    std::vector<std::jthread> workers;
    workers.reserve(num_shards);
    for (int s = 0; s < num_shards; ++s) {
      workers.emplace_back([&, s] {
        try {
          fn(s);
        } catch (...) {
          errors[s] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

ShardPlan ShardPlan::Make(int num_classes, int num_shards) {
  if (num_shards < 1 || num_shards > num_classes) {
    throw Error(ErrorKind::kInvalidShardCount, "need 1 <= k <= n, got k=" + std::to_string(num_shards) +
                                                   " n=" + std::to_string(num_classes));
  }
  ShardPlan plan;
  plan.num_classes_ = num_classes;
  const int base = num_classes / num_shards;
  const int extra = num_classes % num_shards;
  int begin = 0;
  for (int s = 0; s < num_shards; ++s) {
    const int size = base + (s < extra ? 1 : 0);
    plan.ranges_.push_back({begin, begin + size});
    begin += size;
  }
  return plan;
}

int ShardPlan::OwnerOf(int cls) const {
  if (cls < 0 || cls >= num_classes_) throw Error(ErrorKind::kLabelOutOfRange, std::to_string(cls));
  const auto it = std::upper_bound(ranges_.begin(), ranges_.end(), cls,
                                   [](int c, const ShardRange& r) { return c < r.end; });
  return static_cast<int>(it - ranges_.begin());
}

ShardForwardState ShardedForward(const Matrix& features, const Matrix& centres, const Labels& labels,
                                 const MarginSpec& spec, const ShardPlan& plan, Execution execution) {
  if (features.cols() != centres.rows()) {
    throw Error(ErrorKind::kDimensionMismatch, "feature and centre dimensions differ");
  }
  if (plan.num_classes() != centres.cols()) {
    throw Error(ErrorKind::kDimensionMismatch, "shard plan does not cover the centre matrix");
  }
  CheckLabels(labels, static_cast<int>(features.rows()), static_cast<int>(centres.cols()));

  const Eigen::Index n_samples = features.rows();
  const int k = plan.num_shards();
  ShardForwardState state;
  state.spec = spec;
  state.labels = labels;
  state.raw_features = features;
  // Step 1: every device receives the same normalized N x d feature block.
  state.features = NormalizeRows(features).rows();
  state.ledger.feature_gather = n_samples * features.cols();

  state.devices.resize(k);
  for (int s = 0; s < k; ++s) {
    const ShardRange r = plan.ranges()[s];
    state.devices[s].range = r;
    state.devices[s].raw_centres = centres.middleCols(r.begin, r.size());
  }

  // Step 2: local cosine and score blocks, margin only where the shard owns
  // the ground-truth class.
  ForEachShard(k, execution, [&](int s) {
    ShardDevice& dev = state.devices[s];
    dev.centres = UnitColumns(dev.raw_centres);
    dev.cosines = state.features * dev.centres;
    dev.scores = dev.cosines;
    for (Eigen::Index i = 0; i < n_samples; ++i) {
      const int y = labels[i];
      if (!dev.range.Contains(y)) continue;
      const double theta = std::acos(std::clamp(dev.cosines(i, y - dev.range.begin), -1.0, 1.0));
      dev.scores(i, y - dev.range.begin) = TargetLogit(theta, spec);
    }
    dev.scores *= spec.s;
    dev.local_max.resize(n_samples);
    for (Eigen::Index i = 0; i < n_samples; ++i) {
      double m = dev.scores(i, 0);
      for (Eigen::Index j = 1; j < dev.scores.cols(); ++j) m = std::max(m, dev.scores(i, j));
      dev.local_max(i) = m;
    }
  });
  for (const auto& dev : state.devices) {
    if (!dev.scores.allFinite()) throw Error(ErrorKind::kNonFiniteInput, "scores contain inf/nan");
  }

  // Pass 1: global per-sample maximum.
  state.global_max = state.devices[0].local_max;
  for (int s = 1; s < k; ++s) state.global_max = state.global_max.cwiseMax(state.devices[s].local_max);
  state.ledger.max_reduction = n_samples * k;

  // Pass 2: global per-sample sum of exponentials, shifted by the global max.
  ForEachShard(k, execution, [&](int s) {
    ShardDevice& dev = state.devices[s];
    dev.local_sum.resize(n_samples);
    for (Eigen::Index i = 0; i < n_samples; ++i) {
      double sum = 0.0;
      for (Eigen::Index j = 0; j < dev.scores.cols(); ++j) sum += std::exp(dev.scores(i, j) - state.global_max(i));
      dev.local_sum(i) = sum;
    }
  });
  state.global_sum = state.devices[0].local_sum;
  for (int s = 1; s < k; ++s) state.global_sum += state.devices[s].local_sum;
  state.ledger.sum_reduction = n_samples * k;

  double total = 0.0;
  for (Eigen::Index i = 0; i < n_samples; ++i) {
    const int y = labels[i];
    const ShardDevice& owner = state.devices[plan.OwnerOf(y)];
    total += std::log(state.global_sum(i)) + state.global_max(i) - owner.scores(i, y - owner.range.begin);
  }
  state.loss = total * (1.0 / static_cast<double>(n_samples));
  return state;
}

ShardedGradients ShardedBackward(ShardForwardState& state, Execution execution) {
  const Eigen::Index n_samples = state.features.rows();
  const int k = static_cast<int>(state.devices.size());
  const double inv_n = 1.0 / static_cast<double>(n_samples);
  const MarginSpec& spec = state.spec;

  ShardedGradients out;
  out.grad_centres.resize(k);
  std::vector<Matrix> partial_dx(k);

  // Steps 3 and 4, device-local: dW block and this shard's share of dx.
  ForEachShard(k, execution, [&](int s) {
    const ShardDevice& dev = state.devices[s];
    Matrix grad(n_samples, dev.scores.cols());
    for (Eigen::Index i = 0; i < n_samples; ++i) {
      for (Eigen::Index j = 0; j < grad.cols(); ++j) {
        grad(i, j) = std::exp(dev.scores(i, j) - state.global_max(i)) / state.global_sum(i) * inv_n;
      }
      const int y = state.labels[i];
      if (dev.range.Contains(y)) grad(i, y - dev.range.begin) -= inv_n;
    }
    Matrix grad_cos = spec.s * grad;
    for (Eigen::Index i = 0; i < n_samples; ++i) {
      const int y = state.labels[i];
      if (!dev.range.Contains(y)) continue;
      const int col = y - dev.range.begin;
      grad_cos(i, col) *= TargetLogitSlope(dev.cosines(i, col), spec);
    }
    const Matrix grad_unit_centres = state.features.transpose() * grad_cos;
    out.grad_centres[s] = BackpropColumnNormalization(dev.raw_centres, grad_unit_centres);
    partial_dx[s] = grad_cos * dev.centres.transpose();
  });

  Matrix dx = partial_dx[0];
  for (int s = 1; s < k; ++s) dx += partial_dx[s];
  state.ledger.dx_reduction = n_samples * state.features.cols() * k;
  out.grad_features = BackpropRowNormalization(state.raw_features, dx);
  return out;
}

Matrix ShardedGradients::AssembleCentres() const {
  Eigen::Index cols = 0;
  for (const auto& b : grad_centres) cols += b.cols();
  Matrix out(grad_centres.front().rows(), cols);
  Eigen::Index at = 0;
  for (const auto& b : grad_centres) {
    out.middleCols(at, b.cols()) = b;
    at += b.cols();
  }
  return out;
}

double ShardEquivalence::MaxRelError() const {
  return std::max({loss_rel_error, grad_features_rel_error, grad_centres_rel_error});
}

ShardEquivalence CompareWithDense(const Matrix& features, const Matrix& centres, const Labels& labels,
                                  const MarginSpec& spec, int num_shards, Execution execution) {
  const LossOutput dense = CombinedLoss(features, centres, labels, spec);
  const ShardPlan plan = ShardPlan::Make(static_cast<int>(centres.cols()), num_shards);
  ShardForwardState state = ShardedForward(features, centres, labels, spec, plan, execution);
  const ShardedGradients grads = ShardedBackward(state, execution);
  const Matrix grad_centres = grads.AssembleCentres();

  auto rel = [](double diff, double a, double b) {
    const double scale = std::max(a, b);
    return scale == 0.0 ? diff : diff / scale;
  };
  ShardEquivalence eq;
  eq.num_shards = num_shards;
  eq.loss_rel_error = rel(std::abs(state.loss - dense.loss), std::abs(state.loss), std::abs(dense.loss));
  eq.grad_features_rel_error = rel((grads.grad_features - dense.grad_features).norm(),
                                   grads.grad_features.norm(), dense.grad_features.norm());
  eq.grad_centres_rel_error =
      rel((grad_centres - dense.grad_centres).norm(), grad_centres.norm(), dense.grad_centres.norm());
  eq.bitwise = state.loss == dense.loss && grads.grad_features == dense.grad_features &&
               grad_centres == dense.grad_centres;
  return eq;
}

}  // namespace arclab
