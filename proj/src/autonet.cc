#include "arclab/autonet.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "arclab/error.h"

namespace arclab {

ToyNet MakeToyNet(int input_dim, int hidden_dim, int embedding_dim, Rng& rng) {
  if (input_dim < 1 || hidden_dim < 1 || embedding_dim < 2) {
    throw Error(ErrorKind::kInvalidDimension, "net needs d_in >= 1, h >= 1, d_emb >= 2");
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  ToyNet net;
  net.w1.resize(input_dim, hidden_dim);
  net.w2.resize(hidden_dim, embedding_dim);
  const double scale1 = std::sqrt(2.0 / input_dim);
  const double scale2 = std::sqrt(2.0 / hidden_dim);
  for (Eigen::Index i = 0; i < net.w1.size(); ++i) net.w1.data()[i] = scale1 * gauss(rng);
  for (Eigen::Index i = 0; i < net.w2.size(); ++i) net.w2.data()[i] = scale2 * gauss(rng);
  net.b1 = Vector::Zero(hidden_dim);
  net.b2 = Vector::Zero(embedding_dim);
  return net;
}

namespace {

Matrix PreActivation(const ToyNet& net, const Matrix& inputs) {
  if (inputs.cols() != net.w1.rows()) {
    throw Error(ErrorKind::kDimensionMismatch, "input width does not match the net");
  }
  Matrix pre = inputs * net.w1;
  pre.rowwise() += net.b1.transpose();
  return pre;
}

}  // namespace

Matrix Forward(const ToyNet& net, const Matrix& inputs) {
  const Matrix hidden = PreActivation(net, inputs).cwiseMax(0.0);
  Matrix out = hidden * net.w2;
  out.rowwise() += net.b2.transpose();
  return out;
}

NetGradients Backward(const ToyNet& net, const Matrix& inputs, const Matrix& grad_embeddings) {
  const Matrix pre = PreActivation(net, inputs);
  const Matrix hidden = pre.cwiseMax(0.0);
  if (grad_embeddings.rows() != inputs.rows() || grad_embeddings.cols() != net.w2.cols()) {
    throw Error(ErrorKind::kDimensionMismatch, "embedding gradient has the wrong shape");
  }
  NetGradients g;
  g.w2 = hidden.transpose() * grad_embeddings;
  g.b2 = grad_embeddings.colwise().sum().transpose();
  Matrix grad_pre = grad_embeddings * net.w2.transpose();
  grad_pre = grad_pre.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
  g.w1 = inputs.transpose() * grad_pre;
  g.b1 = grad_pre.colwise().sum().transpose();
  return g;
}

void SgdStep(Eigen::Ref<Matrix> param, const Eigen::Ref<const Matrix>& grad,
             Eigen::Ref<Matrix> velocity, const SgdHyper& hyper) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols() ||
      param.rows() != velocity.rows() || param.cols() != velocity.cols()) {
    throw Error(ErrorKind::kDimensionMismatch, "sgd shapes differ");
  }
  if (!grad.allFinite()) throw Error(ErrorKind::kNonFiniteGradient, "gradient contains inf/nan");
  velocity = hyper.momentum * velocity + grad + hyper.weight_decay * param;
  param -= hyper.lr * velocity;
}

Dataset SynthDataset(const SynthSpec& spec) {
  if (spec.n_classes < 2) throw Error(ErrorKind::kBadRange, "need at least two classes");
  if (spec.samples_per_class < 1) throw Error(ErrorKind::kBadRange, "need samples per class");
  if (!(spec.kappa > 0.0)) throw Error(ErrorKind::kBadRange, "kappa must be > 0");
  constexpr int kMaxAttempts = 10000;
  const double min_angle = 15.0 * std::numbers::pi / 180.0;

  Rng rng(spec.seed);
  std::vector<UnitVector> means;
  int attempts = 0;
  while (static_cast<int>(means.size()) < spec.n_classes) {
    if (++attempts > kMaxAttempts) {
      throw Error(ErrorKind::kRejectionExhausted,
                  "could not place " + std::to_string(spec.n_classes) + " class means in d=" +
                      std::to_string(spec.input_dim));
    }
    UnitVector candidate = SampleUniformSphere(spec.input_dim, rng);
    const bool far = std::all_of(means.begin(), means.end(), [&](const UnitVector& m) {
      return Angle(m, candidate) >= min_angle;
    });
    if (far) means.push_back(std::move(candidate));
  }

  Dataset data;
  data.num_classes = spec.n_classes;
  const int total = spec.n_classes * spec.samples_per_class;
  data.inputs.resize(total, spec.input_dim);
  data.labels.resize(total);
  const double noise = std::isinf(spec.kappa) ? 0.0 : 1.0 / std::sqrt(spec.kappa);
  std::normal_distribution<double> gauss(0.0, 1.0);
  int row = 0;
  for (int c = 0; c < spec.n_classes; ++c) {
    for (int s = 0; s < spec.samples_per_class; ++s, ++row) {
      data.inputs.row(row) = means[c].components().transpose();
      if (noise > 0.0) {
        for (int k = 0; k < spec.input_dim; ++k) data.inputs(row, k) += noise * gauss(rng);
      }
      data.labels[row] = c;
    }
  }
  return data;
}

std::pair<Dataset, Dataset> SplitDataset(const Dataset& data, double train_fraction,
                                         std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorKind::kBadRange, "train fraction must lie in (0, 1)");
  }
  std::vector<std::vector<int>> by_class(data.num_classes);
  for (int i = 0; i < data.size(); ++i) by_class[data.labels[i]].push_back(i);

  Rng rng(seed);
  std::vector<int> train_rows;
  std::vector<int> test_rows;
  for (auto& rows : by_class) {
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto cut = static_cast<std::size_t>(std::lround(train_fraction * rows.size()));
    train_rows.insert(train_rows.end(), rows.begin(), rows.begin() + cut);
    test_rows.insert(test_rows.end(), rows.begin() + cut, rows.end());
  }
  auto gather = [&](const std::vector<int>& rows) {
    Dataset out;
    out.num_classes = data.num_classes;
    out.inputs.resize(static_cast<Eigen::Index>(rows.size()), data.inputs.cols());
    out.labels.resize(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      out.inputs.row(static_cast<Eigen::Index>(r)) = data.inputs.row(rows[r]);
      out.labels[r] = data.labels[rows[r]];
    }
    return out;
  };
  return {gather(train_rows), gather(test_rows)};
}

}  // namespace arclab
