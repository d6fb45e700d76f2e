#ifndef ARCLAB_GRADCHECK_H_
#define ARCLAB_GRADCHECK_H_

#include <cstdint>
#include <string>
#include <vector>

#include "arclab/hypersphere.h"

namespace arclab {

struct GradcheckOptions {
  std::uint64_t seed = 0;
  int instances = 20;
  int batch = 6;
  int dim = 5;
  int classes = 6;
  double step = 1e-5;
  double tolerance = 1e-5;
  // Instances with a ground-truth angle, centre-pair angle or triplet hinge
  // this close to a branch/clamp point are redrawn.
  double branch_exclusion = 1e-3;
  // Test hook: added to every analytic gradient entry before comparison.
  double perturb = 0.0;
};

struct GradcheckRow {
  std::string loss_kind;
  std::string margin;
  int instances = 0;
  double max_rel_error = 0.0;
  bool pass = false;
};

// ||a - f|| / max(||a||, ||f||); plain ||a - f|| when both norms are below
// 1e-10.
double RelativeError(const Matrix& analytic, const Matrix& numeric);

// Central finite differences against every analytic objective gradient
// (raw features and raw centres): the combined loss under all six presets,
// plus each auxiliary loss kind.
std::vector<GradcheckRow> RunGradcheck(const GradcheckOptions& options);

}  // namespace arclab

#endif  // ARCLAB_GRADCHECK_H_
