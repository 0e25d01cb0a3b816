#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "coref/ast.hpp"
#include "coref/grid.hpp"
#include "coref/objective.hpp"

namespace coref {

struct AdamState {
  int step = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(int n, double lr_ = 0.01)
      : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)), lr(lr_) {}

  void update(Eigen::VectorXd& x, const Eigen::VectorXd& grad);
};

struct POConfig {
  int steps = 250;
  double lr = 0.01;
  double sharpness_lo = 3.0;
  double sharpness_hi = 10.0;
  // 0 = use every grid cell per step; otherwise draw this many cells per step.
  int subsample = 0;
  uint64_t seed = 0;  // only used when subsample > 0
};

// steps values log-spaced from lo to hi, strictly increasing.
std::vector<double> sharpness_schedule(const POConfig& cfg);

// Optimizes the program's continuous parameters with Adam on
// theta = atanh(phi), so phi = tanh(theta) can never leave (-1, 1).
// Structure and program length are untouched. Returns the updated program
// only when the hard objective strictly improves.
std::optional<ExprPtr> rewrite_po(const OccupancyGrid& x, const ExprPtr& z, const POConfig& po,
                                  const ObjectiveConfig& obj);

// The optimized program regardless of the objective gate (rewrite_po is this
// plus the acceptance check). Null when the program has no parameters.
ExprPtr optimize_params(const OccupancyGrid& x, const Expr& z, const POConfig& po);

}  // namespace coref
