#include "coref/objective.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "coref/executor.hpp"

namespace coref {

double iou(const OccupancyGrid& a, const OccupancyGrid& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("iou: shape mismatch");
  int64_t inter = 0, uni = 0;
  const auto& wa = a.words();
  const auto& wb = b.words();
  for (size_t i = 0; i < wa.size(); ++i) {
    inter += std::popcount(wa[i] & wb[i]);
    uni += std::popcount(wa[i] | wb[i]);
  }
  if (uni == 0) return 1.0;
  return double(inter) / double(uni);
}

std::vector<int64_t> boundary_cells(const OccupancyGrid& g) {
  std::vector<int64_t> out;
  const auto& res = g.res();
  const int d = dim_count(g.dim());
  for (int64_t i = 0; i < g.cell_count(); ++i) {
    if (!g.get(i)) continue;
    auto c = g.coords(i);
    bool boundary = false;
    for (int a = 0; a < d && !boundary; ++a) {
      for (int step : {-1, 1}) {
        int v = c[a] + step;
        if (v < 0 || v >= res[a]) {
          boundary = true;
          break;
        }
        auto nc = c;
        nc[a] = v;
        if (!g.get(g.index(nc[0], nc[1], nc[2]))) {
          boundary = true;
          break;
        }
      }
    }
    if (boundary) out.push_back(i);
  }
  return out;
}

namespace {
double directed_mean_nn(const OccupancyGrid& g, const std::vector<int64_t>& from,
                        const std::vector<int64_t>& to) {
  double total = 0;
  for (int64_t i : from) {
    auto ci = g.coords(i);
    double best = std::numeric_limits<double>::infinity();
    for (int64_t j : to) {
      auto cj = g.coords(j);
      double dx = double(ci[0] - cj[0]);
      double dy = double(ci[1] - cj[1]);
      double dz = double(ci[2] - cj[2]);
      best = std::min(best, dx * dx + dy * dy + dz * dz);
    }
    total += std::sqrt(best);
  }
  return total / double(from.size());
}
}  // namespace

double chamfer(const OccupancyGrid& a, const OccupancyGrid& b, double empty_penalty) {
  if (!a.same_shape(b)) throw std::invalid_argument("chamfer: shape mismatch");
  const double scale = 100.0 / a.res()[0];
  std::vector<int64_t> ba = boundary_cells(a);
  std::vector<int64_t> bb = boundary_cells(b);
  if (ba.empty() && bb.empty()) return 0.0;
  if (ba.empty() || bb.empty()) {
    if (empty_penalty >= 0) return empty_penalty;
    return 100.0 * std::sqrt(double(dim_count(a.dim())));
  }
  return 0.5 * (directed_mean_nn(a, ba, bb) + directed_mean_nn(a, bb, ba)) * scale;
}

Score objective_given_exec(const OccupancyGrid& x, const OccupancyGrid& exec_z, int64_t length,
                           const ObjectiveConfig& cfg) {
  Score s;
  s.length = length;
  s.recon = cfg.recon == ReconMetric::IoU
                ? iou(x, exec_z)
                : -chamfer(x, exec_z, cfg.chamfer_empty_penalty);
  s.objective = s.recon - cfg.length_weight * double(length);
  return s;
}

Score objective(const OccupancyGrid& x, const Expr& z, const ObjectiveConfig& cfg) {
  return objective_given_exec(x, execute_hard(z, x.res()), program_length(z), cfg);
}

}  // namespace coref
