#include "coref/po.hpp"

#include <algorithm>
#include <cmath>

#include "coref/diff.hpp"
#include "coref/executor.hpp"
#include "coref/rng.hpp"

namespace coref {

void AdamState::update(Eigen::VectorXd& x, const Eigen::VectorXd& grad) {
  ++step;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double mc = 1.0 - std::pow(beta1, step);
  const double vc = 1.0 - std::pow(beta2, step);
  for (int i = 0; i < x.size(); ++i)
    x[i] -= lr * (m[i] / mc) / (std::sqrt(v[i] / vc) + eps);
}

std::vector<double> sharpness_schedule(const POConfig& cfg) {
  std::vector<double> out(size_t(cfg.steps));
  if (cfg.steps == 1) {
    out[0] = cfg.sharpness_hi;
    return out;
  }
  const double l0 = std::log(cfg.sharpness_lo);
  const double l1 = std::log(cfg.sharpness_hi);
  for (int i = 0; i < cfg.steps; ++i)
    out[size_t(i)] = std::exp(l0 + (l1 - l0) * double(i) / double(cfg.steps - 1));
  return out;
}

namespace {
constexpr double kPhiCap = 1.0 - 1e-12;

Eigen::VectorXd to_theta(Eigen::VectorXd phi) {
  for (int i = 0; i < phi.size(); ++i) {
    double p = std::clamp(phi[i], -kPhiCap, kPhiCap);
    phi[i] = std::atanh(p);
  }
  return phi;
}

Eigen::VectorXd to_phi(const Eigen::VectorXd& theta) {
  Eigen::VectorXd phi(theta.size());
  for (int i = 0; i < theta.size(); ++i)
    phi[i] = std::clamp(std::tanh(theta[i]), -kPhiCap, kPhiCap);
  return phi;
}
}  // namespace

ExprPtr optimize_params(const OccupancyGrid& x, const Expr& z, const POConfig& po) {
  const int np = param_count(z);
  if (np == 0) return nullptr;

  Eigen::MatrixXd all_pts = grid_points(z.dim, x.res());
  Eigen::ArrayXd all_vals(x.cell_count());
  for (int64_t i = 0; i < x.cell_count(); ++i) all_vals[i] = x.get(i) ? 1.0 : 0.0;

  std::vector<double> sched = sharpness_schedule(po);
  Eigen::VectorXd theta = to_theta(extract_params(z));
  AdamState adam(np, po.lr);
  Rng rng(mix_seed(po.seed, 0x6f70744d, uint64_t(np)));

  for (int step = 0; step < po.steps; ++step) {
    Eigen::VectorXd phi = to_phi(theta);
    ExprPtr cur = inject_params(z, phi);

    Eigen::VectorXd grad_phi;
    if (po.subsample > 0 && po.subsample < x.cell_count()) {
      Eigen::MatrixXd pts(po.subsample, all_pts.cols());
      Eigen::ArrayXd vals(po.subsample);
      for (int i = 0; i < po.subsample; ++i) {
        int64_t idx = int64_t(rng.below(uint64_t(x.cell_count())));
        pts.row(i) = all_pts.row(idx);
        vals[i] = all_vals[idx];
      }
      grad_phi = grad_loss_at(*cur, pts, vals, sched[size_t(step)]);
    } else {
      grad_phi = grad_loss_at(*cur, all_pts, all_vals, sched[size_t(step)]);
    }

    // d phi / d theta = 1 - tanh(theta)^2 = 1 - phi^2
    Eigen::VectorXd grad_theta =
        grad_phi.cwiseProduct((1.0 - phi.array().square()).matrix());
    adam.update(theta, grad_theta);
  }

  return inject_params(z, to_phi(theta));
}

std::optional<ExprPtr> rewrite_po(const OccupancyGrid& x, const ExprPtr& z, const POConfig& po,
                                  const ObjectiveConfig& obj) {
  ExprPtr out = optimize_params(x, *z, po);
  if (!out) return std::nullopt;
  Score before = objective(x, *z, obj);
  Score after = objective(x, *out, obj);
  if (after.objective > before.objective) return out;
  return std::nullopt;
}

}  // namespace coref
