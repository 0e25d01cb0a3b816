#pragma once

#include <Eigen/Dense>

#include "coref/ast.hpp"
#include "coref/grid.hpp"

namespace coref {

// Cell centers of a grid, one row per cell in grid index order (n x dim).
Eigen::MatrixXd grid_points(Dim dim, const std::array<int, 3>& res);

// Signed distance of the program's implicit equivalent at each query point:
// negative inside, positive outside. Primitives use the axis-aligned box SDF
// and the scaled-sphere ellipse/ellipsoid approximation (||p/r|| - 1) *
// min(r), which is sign-exact; union = min, intersect = max, subtract(a, b) =
// max(a, -b). Transforms map query points through their inverse; scale
// multiplies distances by the smallest axis factor to stay conservative.
Eigen::ArrayXd sdf_eval(const Expr& e, const Eigen::MatrixXd& pts);

OccupancyGrid execute_hard(const Expr& e, const std::array<int, 3>& res);
OccupancyGrid execute_hard(const Expr& e);  // 64^2 / 32^3 default

struct SoftOccupancy {
  Eigen::ArrayXd values;  // strictly inside (0, 1)
  double sharpness;
};

// sigmoid(-tanh(sdf * sharpness) * sharpness); thresholding at 0.5
// reproduces hard occupancy for any sharpness > 0.
SoftOccupancy soft_occupancy(const Eigen::ArrayXd& sdf, double sharpness);

}  // namespace coref
