#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "arclab/anglestats.h"
#include "arclab/autonet.h"
#include "arclab/error.h"

namespace arclab {
namespace {

constexpr double kDegPerRad = 180.0 / std::numbers::pi;

Matrix GatherRows(const Matrix& m, std::span<const int> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(rows[r]);
  return out;
}

ObjectiveConfig MakeObjective(const TrainConfig& config) {
  return {config.loss_kind, config.margin, config.penalty_weight, config.triplet_margin};
}

}  // namespace

void ValidateTrainConfig(const TrainConfig& config) {
  if (!(config.lr >= 0.0)) throw Error(ErrorKind::kBadRange, "lr must be >= 0");
  if (!(config.momentum >= 0.0 && config.momentum < 1.0)) {
    throw Error(ErrorKind::kBadRange, "momentum must lie in [0, 1)");
  }
  if (!(config.weight_decay >= 0.0)) throw Error(ErrorKind::kBadRange, "weight decay must be >= 0");
  if (config.total_iters < 1) throw Error(ErrorKind::kBadRange, "total_iters must be >= 1");
  if (config.batch_size < 1) throw Error(ErrorKind::kBadRange, "batch_size must be >= 1");
  if (config.hidden_dim < 1) throw Error(ErrorKind::kBadRange, "hidden_dim must be >= 1");
  if (config.embedding_dim < 2) throw Error(ErrorKind::kBadRange, "embedding_dim must be >= 2");
  if (!(config.snapshot_bin_deg > 0.0)) throw Error(ErrorKind::kBadRange, "snapshot bins must be > 0");
  ValidateMarginSpec(config.margin);
}

double LearningRateAt(const TrainConfig& config, int iteration) {
  double lr = config.lr;
  for (int drop : config.lr_drops) {
    if (iteration >= drop) lr /= 10.0;
  }
  return lr;
}

double FullObjective(const Model& model, const Dataset& data, const TrainConfig& config) {
  const Matrix emb = Forward(model.net, data.inputs);
  return EvaluateObjective(emb, model.centres, data.labels, MakeObjective(config)).loss;
}

ThetaSnapshot TakeThetaSnapshot(const Model& model, const Dataset& data, int iteration,
                                double bin_width_deg) {
  const EmbeddingBatch x = NormalizeRows(Forward(model.net, data.inputs));
  const CentreMatrix w = NormalizeColumns(model.centres);
  ThetaSnapshot snap;
  snap.iteration = iteration;
  snap.bin_width_deg = bin_width_deg;
  const auto bins = static_cast<std::size_t>(std::ceil(180.0 / bin_width_deg - 1e-9));
  snap.counts.assign(bins, 0);
  double total = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    const Eigen::RowVectorXd row = x.rows().row(i);
    const double deg = UnitAngle(row.data(), w.columns().col(data.labels[i]).data(), x.dim()) * kDegPerRad;
    total += deg;
    const auto b = std::min(static_cast<std::size_t>(deg / bin_width_deg), bins - 1);
    ++snap.counts[b];
  }
  snap.mean_deg = total / x.size();
  return snap;
}

namespace {

template <typename Fn>
auto DivergenceGuard(int iteration, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNonFiniteInput && e.kind() != ErrorKind::kNonFiniteGradient) throw;
    throw Error(ErrorKind::kDivergenceDetected, std::string(e.what()) + " at iteration " + std::to_string(iteration));
  }
}

}  // namespace

TrainResult Train(const TrainConfig& config, const Dataset& data) {
  ValidateTrainConfig(config);
  if (data.size() < 1) throw Error(ErrorKind::kBadRange, "empty dataset");

  Rng rng(config.seed);
  TrainResult result;
  Model& model = result.model;
  model.net = MakeToyNet(static_cast<int>(data.inputs.cols()), config.hidden_dim,
                         config.embedding_dim, rng);
  {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix centres(config.embedding_dim, data.num_classes);
    for (Eigen::Index i = 0; i < centres.size(); ++i) centres.data()[i] = gauss(rng);
    model.centres = NormalizeColumns(centres).columns();
  }

  const ObjectiveConfig objective = MakeObjective(config);
  const int batch = std::min(config.batch_size, data.size());
  const int mid = config.total_iters / 2;

  ToyNet velocity{Matrix::Zero(model.net.w1.rows(), model.net.w1.cols()),
                  Vector::Zero(model.net.b1.size()),
                  Matrix::Zero(model.net.w2.rows(), model.net.w2.cols()),
                  Vector::Zero(model.net.b2.size())};
  Matrix centre_velocity = Matrix::Zero(model.centres.rows(), model.centres.cols());

  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;

  result.initial_full_loss = FullObjective(model, data, config);
  result.loss_trace.reserve(config.total_iters);
  result.lr_trace.reserve(config.total_iters);
  for (int it = 0; it < config.total_iters; ++it) {
    if (it == 0 || it == mid) {
      result.snapshots.push_back(TakeThetaSnapshot(model, data, it, config.snapshot_bin_deg));
    }
    if (cursor + batch > order.size()) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const std::span<const int> rows(order.data() + cursor, batch);
    cursor += batch;

    const Matrix inputs = GatherRows(data.inputs, rows);
    Labels labels(batch);
    for (int r = 0; r < batch; ++r) labels[r] = data.labels[rows[r]];

    const Matrix emb = Forward(model.net, inputs);
    const LossOutput loss =
        DivergenceGuard(it, [&] { return EvaluateObjective(emb, model.centres, labels, objective); });
    if (!std::isfinite(loss.loss)) {
      throw Error(ErrorKind::kDivergenceDetected, "loss is non-finite at iteration " + std::to_string(it));
    }
    const double lr = LearningRateAt(config, it);
    result.loss_trace.push_back(loss.loss);
    result.lr_trace.push_back(lr);

    const NetGradients grads = Backward(model.net, inputs, loss.grad_features);
    const SgdHyper hyper{lr, config.momentum, config.weight_decay};
    DivergenceGuard(it, [&] {
      SgdStep(model.net.w1, grads.w1, velocity.w1, hyper);
      SgdStep(model.net.b1, grads.b1, velocity.b1, hyper);
      SgdStep(model.net.w2, grads.w2, velocity.w2, hyper);
      SgdStep(model.net.b2, grads.b2, velocity.b2, hyper);
      if (config.loss_kind != LossKind::kTripletOnly) {
        SgdStep(model.centres, loss.grad_centres, centre_velocity, hyper);
      }
    });
  }
  const int end = config.total_iters;
  result.snapshots.push_back(
      DivergenceGuard(end, [&] { return TakeThetaSnapshot(model, data, end, config.snapshot_bin_deg); }));
  result.final_full_loss = DivergenceGuard(end, [&] { return FullObjective(model, data, config); });
  if (!std::isfinite(result.final_full_loss)) {
    throw Error(ErrorKind::kDivergenceDetected, "final loss is non-finite");
  }
  return result;
}

double Percentile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorKind::kBadRange, "percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Fig3Report MakeFig3Report(const EmbeddingBatch& embeddings, const Labels& labels, int num_classes) {
  const CentreMatrix centres = ClassCentres(embeddings, labels, num_classes);
  const Matrix& c = centres.columns();
  const int d = embeddings.dim();

  std::vector<std::vector<double>> deviations(num_classes);
  for (int i = 0; i < embeddings.size(); ++i) {
    const Eigen::RowVectorXd x = embeddings.rows().row(i);
    deviations[labels[i]].push_back(UnitAngle(x.data(), c.col(labels[i]).data(), d) * kDegPerRad);
  }

  Fig3Report report;
  for (int k = 0; k < num_classes; ++k) {
    ClassSpread spread;
    spread.direction = c.col(k);
    spread.mean_deg = std::accumulate(deviations[k].begin(), deviations[k].end(), 0.0) /
                      static_cast<double>(deviations[k].size());
    spread.p95_deg = Percentile(deviations[k], 0.95);
    report.max_p95_deg = std::max(report.max_p95_deg, spread.p95_deg);
    report.classes.push_back(std::move(spread));
  }
  report.separation_deg = Matrix::Zero(num_classes, num_classes);
  report.min_separation_deg = std::numeric_limits<double>::infinity();
  for (int a = 0; a < num_classes; ++a) {
    for (int b = a + 1; b < num_classes; ++b) {
      const double sep = UnitAngle(c.col(a).data(), c.col(b).data(), d) * kDegPerRad;
      report.separation_deg(a, b) = sep;
      report.separation_deg(b, a) = sep;
      report.min_separation_deg = std::min(report.min_separation_deg, sep);
    }
  }
  report.gap_deg = report.min_separation_deg - 2.0 * report.max_p95_deg;
  return report;
}

Fig3Report MakeFig3Report(const ToyNet& net, const Dataset& data) {
  return MakeFig3Report(NormalizeRows(Forward(net, data.inputs)), data.labels, data.num_classes);
}

}  // namespace arclab
