#pragma once

#include <Eigen/Dense>

#include "coref/ast.hpp"
#include "coref/grid.hpp"

namespace coref {

// Continuous parameter vector of a program: raw primitive parameters in
// deterministic preorder. Transform parameters introduced by canonicalization
// or grafting are structural constants and are not optimized.
int param_count(const Expr& e);
Eigen::VectorXd extract_params(const Expr& e);
ExprPtr inject_params(const Expr& e, const Eigen::VectorXd& phi);

// Mean squared error between the soft occupancy of e at the target's cell
// centers and the target's {0,1} values.
double recon_loss(const Expr& e, const Eigen::VectorXd& phi, const OccupancyGrid& target,
                  double sharpness);

// Exact reverse-mode gradient of recon_loss with respect to phi. min/max
// combinators route the gradient to the active branch; ties go left.
Eigen::VectorXd grad_loss(const Expr& e, const Eigen::VectorXd& phi, const OccupancyGrid& target,
                          double sharpness);

// Point-level variants; target_vals holds the {0,1} value per point. Used by
// gradient tests and the optional per-step subsampling in PO. The mean over
// points of the per-point losses equals the grid loss when pts are the
// target's cell centers.
double recon_loss_at(const Expr& e, const Eigen::MatrixXd& pts, const Eigen::ArrayXd& target_vals,
                     double sharpness);
Eigen::VectorXd grad_loss_at(const Expr& e, const Eigen::MatrixXd& pts,
                             const Eigen::ArrayXd& target_vals, double sharpness);

std::pair<double, Eigen::VectorXd> loss_and_grad_at(const Expr& e, const Eigen::MatrixXd& pts,
                                                    const Eigen::ArrayXd& target_vals,
                                                    double sharpness);

// Smallest distance of each point from any derivative kink of the SDF tree
// (min/max branch ties, box axis crossings and interior argmax ties, ellipse
// centers and radius argmin ties). Points with a large margin admit clean
// central-difference checks.
Eigen::ArrayXd branch_margin(const Expr& e, const Eigen::MatrixXd& pts);

}  // namespace coref
