#pragma once

#include <cstdint>
#include <vector>

#include "coref/ast.hpp"
#include "coref/grid.hpp"

namespace coref {

enum class ReconMetric { IoU, NegChamfer };

struct ObjectiveConfig {
  double length_weight = 0.015;
  ReconMetric recon = ReconMetric::IoU;
  // Chamfer value when exactly one grid has no boundary; < 0 means use the
  // domain diagonal in the same units (100 * sqrt(dim)).
  double chamfer_empty_penalty = -1.0;

  // Paper defaults: IoU for 3D, Chamfer for 2D.
  static ObjectiveConfig defaults_for(Dim d) {
    ObjectiveConfig c;
    c.recon = d == Dim::ThreeD ? ReconMetric::IoU : ReconMetric::NegChamfer;
    return c;
  }
};

struct Score {
  double objective = 0;  // recon - length_weight * length
  double recon = 0;
  int64_t length = 0;
};

// |a & b| / |a | b|; 1 when both grids are empty.
double iou(const OccupancyGrid& a, const OccupancyGrid& b);

// Symmetric mean nearest-neighbor distance between the boundary cell sets
// (cells with at least one empty face neighbor; out-of-grid counts as empty),
// measured in cell units and scaled by 100 / resolution.
double chamfer(const OccupancyGrid& a, const OccupancyGrid& b, double empty_penalty = -1.0);

std::vector<int64_t> boundary_cells(const OccupancyGrid& g);

Score objective(const OccupancyGrid& x, const Expr& z, const ObjectiveConfig& cfg);
Score objective_given_exec(const OccupancyGrid& x, const OccupancyGrid& exec_z, int64_t length,
                           const ObjectiveConfig& cfg);

}  // namespace coref
