#include "arclab/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <functional>
#include <numeric>
#include <random>

#include "arclab/error.h"
#include "arclab/penalties.h"

namespace arclab {
namespace {

using std::numbers::pi;

struct Case {
  LossKind kind;
  std::string margin_name;
  MarginSpec margin;
};

std::vector<Case> AllCases() {
  std::vector<Case> cases;
  for (Preset p : kAllPresets) cases.push_back({LossKind::kCombined, std::string(PresetName(p)), PresetSpec(p)});
  const MarginSpec softmax = PresetSpec(Preset::kSoftmax);
  const MarginSpec arcface = PresetSpec(Preset::kArcFace);
  cases.push_back({LossKind::kCombinedIntra, "softmax", softmax});
  cases.push_back({LossKind::kCombinedInter, "softmax", softmax});
  cases.push_back({LossKind::kCombinedTriplet, "arcface", arcface});
  cases.push_back({LossKind::kTripletOnly, "-", arcface});
  cases.push_back({LossKind::kSoftmaxUnnormalized, "-", softmax});
  return cases;
}

bool Near(double theta, double point, double eps) { return std::abs(theta - point) < eps; }

bool AngleNearClamp(double theta, double eps) { return Near(theta, 0.0, eps) || Near(theta, pi, eps); }

// Rejects instances whose derivatives are not smooth within the finite
// difference stencil.
bool NearBranch(const Matrix& features, const Matrix& centres, const Labels& labels, const Case& c,
                double eps) {
  if (c.kind == LossKind::kSoftmaxUnnormalized) return false;
  const Matrix x = NormalizeRows(features).rows();
  const Matrix w = UnitColumns(centres);
  const int n_samples = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());

  if (c.kind != LossKind::kTripletOnly) {
    const double junction = BranchPoint(c.margin);
    for (int i = 0; i < n_samples; ++i) {
      const Eigen::RowVectorXd row = x.row(i);
      const double theta = UnitAngle(row.data(), w.col(labels[i]).data(), d);
      if (AngleNearClamp(theta, eps) || Near(theta, junction, eps)) return true;
    }
  }
  if (c.kind == LossKind::kCombinedInter) {
    for (int a = 0; a < w.cols(); ++a) {
      for (int b = a + 1; b < w.cols(); ++b) {
        if (AngleNearClamp(UnitAngle(w.col(a).data(), w.col(b).data(), d), eps)) return true;
      }
    }
  }
  if (c.kind == LossKind::kCombinedTriplet || c.kind == LossKind::kTripletOnly) {
    for (int i = 0; i < n_samples; ++i) {
      std::vector<double> pos;
      std::vector<double> neg;
      for (int j = 0; j < n_samples; ++j) {
        if (j == i) continue;
        const Eigen::RowVectorXd a = x.row(i);
        const Eigen::RowVectorXd b = x.row(j);
        const double theta = UnitAngle(a.data(), b.data(), d);
        if (AngleNearClamp(theta, eps)) return true;
        (labels[j] == labels[i] ? pos : neg).push_back(theta);
      }
      if (pos.empty() || neg.empty()) continue;
      std::sort(pos.rbegin(), pos.rend());
      std::sort(neg.begin(), neg.end());
      // Mining must not flip, and the hinge must be clearly on one side.
      if (pos.size() > 1 && pos[0] - pos[1] < eps) return true;
      if (neg.size() > 1 && neg[1] - neg[0] < eps) return true;
      if (std::abs(pos[0] + 0.35 - neg[0]) < eps) return true;
    }
  }
  return false;
}

Matrix NumericGradient(Matrix& param, const std::function<double()>& loss, double h) {
  Matrix grad(param.rows(), param.cols());
  for (Eigen::Index k = 0; k < param.size(); ++k) {
    const double saved = param.data()[k];
    param.data()[k] = saved + h;
    const double up = loss();
    param.data()[k] = saved - h;
    const double down = loss();
    param.data()[k] = saved;
    grad.data()[k] = (up - down) / (2.0 * h);
  }
  return grad;
}

Matrix Stack(const Matrix& a, const Matrix& b) {
  Matrix out(a.size() + b.size(), 1);
  out << a.reshaped(), b.reshaped();
  return out;
}

}  // namespace

double RelativeError(const Matrix& analytic, const Matrix& numeric) {
  const double diff = (analytic - numeric).norm();
  const double scale = std::max(analytic.norm(), numeric.norm());
  if (scale < 1e-10) return diff;
  return diff / scale;
}

std::vector<GradcheckRow> RunGradcheck(const GradcheckOptions& options) {
  if (options.instances < 1 || options.batch < 2 || options.dim < 2 || options.classes < 2) {
    throw Error(ErrorKind::kBadRange, "gradcheck needs instances >= 1 and batch, dim, classes >= 2");
  }
  std::vector<GradcheckRow> rows;
  int case_index = 0;
  for (const Case& c : AllCases()) {
    Rng rng(options.seed * 1000003ULL + static_cast<std::uint64_t>(case_index++));
    std::normal_distribution<double> gauss(0.0, 1.0);
    const ObjectiveConfig objective{c.kind, c.margin, 1.0, 0.35};

    GradcheckRow row{std::string(LossKindName(c.kind)), c.margin_name, 0, 0.0, true};
    int attempts = 0;
    while (row.instances < options.instances) {
      if (++attempts > 1000 * options.instances) {
        throw Error(ErrorKind::kRejectionExhausted, "could not draw instances away from branch points");
      }
      Matrix features(options.batch, options.dim);
      Matrix centres(options.dim, options.classes);
      for (Eigen::Index k = 0; k < features.size(); ++k) features.data()[k] = gauss(rng);
      for (Eigen::Index k = 0; k < centres.size(); ++k) centres.data()[k] = gauss(rng);
      // Every class used appears at least twice so triplets can be mined.
      const int used = std::max(2, std::min(options.classes, options.batch / 2));
      Labels labels(options.batch);
      for (int i = 0; i < options.batch; ++i) labels[i] = i % used;
      std::shuffle(labels.begin(), labels.end(), rng);
      if (NearBranch(features, centres, labels, c, options.branch_exclusion)) continue;

      const LossOutput analytic = EvaluateObjective(features, centres, labels, objective);
      auto loss = [&] { return EvaluateObjective(features, centres, labels, objective).loss; };
      const Matrix num_features = NumericGradient(features, loss, options.step);
      const Matrix num_centres = NumericGradient(centres, loss, options.step);
      Matrix a = Stack(analytic.grad_features, analytic.grad_centres);
      a.array() += options.perturb;
      const double err = RelativeError(a, Stack(num_features, num_centres));
      row.max_rel_error = std::max(row.max_rel_error, err);
      ++row.instances;
    }
    row.pass = row.max_rel_error <= options.tolerance;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace arclab
