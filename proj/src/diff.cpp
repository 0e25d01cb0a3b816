#include "coref/diff.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "coref/executor.hpp"

namespace coref {

namespace {

int count_params_rec(const Expr& e) {
  if (e.is_primitive()) return int(e.primitive().raw.size());
  if (e.is_boolean())
    return count_params_rec(*e.boolean().left) + count_params_rec(*e.boolean().right);
  return count_params_rec(*e.transform().child);
}

void extract_rec(const Expr& e, Eigen::VectorXd& phi, int& off) {
  if (e.is_primitive()) {
    for (double v : e.primitive().raw) phi[off++] = v;
  } else if (e.is_boolean()) {
    extract_rec(*e.boolean().left, phi, off);
    extract_rec(*e.boolean().right, phi, off);
  } else {
    extract_rec(*e.transform().child, phi, off);
  }
}

ExprPtr inject_rec(const Expr& e, const Eigen::VectorXd& phi, int& off) {
  if (e.is_primitive()) {
    const auto& p = e.primitive();
    std::vector<double> raw(p.raw.size());
    for (size_t i = 0; i < raw.size(); ++i) raw[i] = phi[off++];
    return make_primitive(e.dim, p.kind, std::move(raw));
  }
  if (e.is_boolean()) {
    const auto& b = e.boolean();
    ExprPtr l = inject_rec(*b.left, phi, off);
    ExprPtr r = inject_rec(*b.right, phi, off);
    return make_boolean(b.op, std::move(l), std::move(r));
  }
  const auto& t = e.transform();
  return make_transform(t.kind, t.params, inject_rec(*t.child, phi, off));
}

using PtsPtr = std::shared_ptr<const Eigen::MatrixXd>;

struct DiffNode {
  const Expr* e = nullptr;
  Eigen::ArrayXd sdf;
  PtsPtr pts;           // query points this node saw
  double corr = 1.0;    // distance correction a transform applies to its child
  int left = -1, right = -1, child = -1;
  int param_offset = -1;
};

struct DiffTree {
  std::vector<DiffNode> nodes;
  int root = -1;

  int forward(const Expr& e, PtsPtr pts, int& param_off) {
    const int d = dim_count(e.dim);
    int idx = int(nodes.size());
    nodes.emplace_back();
    nodes[idx].e = &e;
    nodes[idx].pts = pts;
    if (e.is_primitive()) {
      nodes[idx].param_offset = param_off;
      param_off += int(e.primitive().raw.size());
      nodes[idx].sdf = sdf_eval(e, *pts);
      return idx;
    }
    if (e.is_boolean()) {
      int l = forward(*e.boolean().left, pts, param_off);
      int r = forward(*e.boolean().right, pts, param_off);
      nodes[idx].left = l;
      nodes[idx].right = r;
      const auto& ls = nodes[l].sdf;
      const auto& rs = nodes[r].sdf;
      switch (e.boolean().op) {
        case BoolOp::Union: nodes[idx].sdf = ls.min(rs); break;
        case BoolOp::Intersect: nodes[idx].sdf = ls.max(rs); break;
        case BoolOp::Subtract: nodes[idx].sdf = ls.max(-rs); break;
      }
      return idx;
    }
    const auto& t = e.transform();
    auto q = std::make_shared<Eigen::MatrixXd>(*pts);
    switch (t.kind) {
      case TransformKind::Translate:
        for (int a = 0; a < d; ++a) q->col(a).array() -= t.params[a];
        break;
      case TransformKind::Scale: {
        double smin = t.params[0];
        for (int a = 0; a < d; ++a) {
          q->col(a).array() /= t.params[a];
          smin = std::min(smin, t.params[a]);
        }
        nodes[idx].corr = smin;
        break;
      }
      case TransformKind::Rotate2d: {
        double c = std::cos(t.params[0]), s = std::sin(t.params[0]);
        Eigen::ArrayXd x = pts->col(0).array(), y = pts->col(1).array();
        q->col(0) = (c * x + s * y).matrix();
        q->col(1) = (-s * x + c * y).matrix();
        break;
      }
    }
    int c = forward(*t.child, q, param_off);
    nodes[idx].child = c;
    nodes[idx].sdf = nodes[idx].corr == 1.0 ? nodes[c].sdf : (nodes[c].sdf * nodes[idx].corr).eval();
    return idx;
  }

  void backward(int idx, const Eigen::ArrayXd& up, Eigen::VectorXd& grad) const {
    const DiffNode& n = nodes[idx];
    const Expr& e = *n.e;
    if (e.is_boolean()) {
      const auto& ls = nodes[n.left].sdf;
      const auto& rs = nodes[n.right].sdf;
      Eigen::ArrayXd left_wins(ls.size());
      double rsign = 1.0;
      switch (e.boolean().op) {
        case BoolOp::Union: left_wins = (ls <= rs).cast<double>(); break;
        case BoolOp::Intersect: left_wins = (ls >= rs).cast<double>(); break;
        case BoolOp::Subtract:
          left_wins = (ls >= -rs).cast<double>();
          rsign = -1.0;
          break;
      }
      backward(n.left, (up * left_wins).eval(), grad);
      backward(n.right, (up * (1.0 - left_wins) * rsign).eval(), grad);
      return;
    }
    if (e.is_transform()) {
      backward(n.child, n.corr == 1.0 ? up : (up * n.corr).eval(), grad);
      return;
    }
    backward_primitive(n, up, grad);
  }

  void backward_primitive(const DiffNode& n, const Eigen::ArrayXd& up, Eigen::VectorXd& grad) const {
    const Expr& e = *n.e;
    const auto& p = e.primitive();
    const int d = dim_count(e.dim);
    const bool is_box =
        p.kind == PrimitiveKind::Rectangle || p.kind == PrimitiveKind::Cuboid;
    PrimitiveGeom g = map_params(p, e.dim);
    const Eigen::MatrixXd& pts = *n.pts;
    const int64_t npts = pts.rows();

    double cth = 1.0, sth = 0.0;
    const bool rot = d == 2;
    if (rot) {
      cth = std::cos(g.rotation);
      sth = std::sin(g.rotation);
    }
    int rmin_axis = 0;
    double rmin = g.half_extent[0];
    for (int a = 1; a < d; ++a)
      if (g.half_extent[a] < rmin) {
        rmin = g.half_extent[a];
        rmin_axis = a;
      }

    double gc[3] = {0, 0, 0};   // d sdf / d center, accumulated
    double gh[3] = {0, 0, 0};   // d sdf / d half_extent
    double gth = 0;             // d sdf / d rotation

    for (int64_t i = 0; i < npts; ++i) {
      double u = up[i];
      if (u == 0.0) continue;
      double rel[3] = {0, 0, 0}, q[3] = {0, 0, 0};
      for (int a = 0; a < d; ++a) rel[a] = pts(i, a) - g.center[a];
      if (rot) {
        q[0] = cth * rel[0] + sth * rel[1];
        q[1] = -sth * rel[0] + cth * rel[1];
      } else {
        for (int a = 0; a < d; ++a) q[a] = rel[a];
      }

      double dq[3] = {0, 0, 0};  // d sdf / d q
      double dh[3] = {0, 0, 0};  // d sdf / d half_extent (direct part)
      if (is_box) {
        double a_[3], m[3];
        bool outside = false;
        double out_sq = 0;
        for (int a = 0; a < d; ++a) {
          a_[a] = std::abs(q[a]) - g.half_extent[a];
          m[a] = std::max(a_[a], 0.0);
          out_sq += m[a] * m[a];
          outside = outside || a_[a] > 0;
        }
        double da[3] = {0, 0, 0};  // d sdf / d a
        if (outside) {
          double len = std::sqrt(out_sq);
          for (int a = 0; a < d; ++a) da[a] = m[a] / len;
        } else {
          int k = 0;
          for (int a = 1; a < d; ++a)
            if (a_[a] > a_[k]) k = a;
          da[k] = 1.0;
        }
        for (int a = 0; a < d; ++a) {
          double sgn = q[a] >= 0 ? 1.0 : -1.0;
          dq[a] = da[a] * sgn;
          dh[a] = -da[a];
        }
      } else {
        double nn = 0;
        double uu[3] = {0, 0, 0};
        for (int a = 0; a < d; ++a) {
          uu[a] = q[a] / g.half_extent[a];
          nn += uu[a] * uu[a];
        }
        double norm = std::sqrt(nn);
        if (norm > 0) {
          for (int a = 0; a < d; ++a) {
            dq[a] = rmin * uu[a] / (norm * g.half_extent[a]);
            dh[a] = -rmin * uu[a] * uu[a] / (norm * g.half_extent[a]);
          }
        }
        dh[rmin_axis] += norm - 1.0;
      }

      // chain q -> (rel, theta) -> center
      double drel[3] = {0, 0, 0};
      if (rot) {
        drel[0] = cth * dq[0] - sth * dq[1];
        drel[1] = sth * dq[0] + cth * dq[1];
        // dq/dtheta = (-s*rel0 + c*rel1, -c*rel0 - s*rel1)
        gth += u * (dq[0] * (-sth * rel[0] + cth * rel[1]) +
                    dq[1] * (-cth * rel[0] - sth * rel[1]));
      } else {
        for (int a = 0; a < d; ++a) drel[a] = dq[a];
      }
      for (int a = 0; a < d; ++a) {
        gc[a] -= u * drel[a];
        gh[a] += u * dh[a];
      }
    }

    // chain geometry -> raw: center = raw, half_extent = (raw + 1.01) / 2,
    // rotation = raw * pi
    int off = n.param_offset;
    for (int a = 0; a < d; ++a) grad[off + a] += gc[a];
    for (int a = 0; a < d; ++a) grad[off + d + a] += gh[a] * 0.5;
    if (rot) grad[off + 2 * d] += gth * std::numbers::pi;
  }
};

void margin_rec(const Expr& e, const Eigen::MatrixXd& pts, Eigen::ArrayXd& margin,
                Eigen::ArrayXd& sdf_out) {
  const int d = dim_count(e.dim);
  const int64_t n = pts.rows();
  if (e.is_primitive()) {
    const auto& p = e.primitive();
    PrimitiveGeom g = map_params(p, e.dim);
    const bool is_box =
        p.kind == PrimitiveKind::Rectangle || p.kind == PrimitiveKind::Cuboid;
    sdf_out = sdf_eval(e, pts);
    double cth = 1.0, sth = 0.0;
    if (d == 2) {
      cth = std::cos(g.rotation);
      sth = std::sin(g.rotation);
    }
    for (int64_t i = 0; i < n; ++i) {
      double rel0 = pts(i, 0) - g.center[0];
      double rel1 = pts(i, 1) - g.center[1];
      double q[3] = {0, 0, 0};
      if (d == 2) {
        q[0] = cth * rel0 + sth * rel1;
        q[1] = -sth * rel0 + cth * rel1;
      } else {
        q[0] = rel0;
        q[1] = rel1;
        q[2] = pts(i, 2) - g.center[2];
      }
      double m = margin[i];
      if (is_box) {
        double a_[3];
        bool outside = false;
        for (int a = 0; a < d; ++a) {
          a_[a] = std::abs(q[a]) - g.half_extent[a];
          m = std::min(m, std::abs(a_[a]));
          m = std::min(m, std::abs(q[a]));
          outside = outside || a_[a] > 0;
        }
        if (!outside)
          for (int a = 0; a < d; ++a)
            for (int b = a + 1; b < d; ++b) m = std::min(m, std::abs(a_[a] - a_[b]));
      } else {
        double nn = 0;
        for (int a = 0; a < d; ++a) {
          double uu = q[a] / g.half_extent[a];
          nn += uu * uu;
        }
        m = std::min(m, std::sqrt(nn));
        for (int a = 0; a < d; ++a)
          for (int b = a + 1; b < d; ++b)
            m = std::min(m, std::abs(g.half_extent[a] - g.half_extent[b]));
      }
      margin[i] = m;
    }
    return;
  }
  if (e.is_boolean()) {
    Eigen::ArrayXd ls, rs;
    margin_rec(*e.boolean().left, pts, margin, ls);
    margin_rec(*e.boolean().right, pts, margin, rs);
    switch (e.boolean().op) {
      case BoolOp::Union:
        margin = margin.min((ls - rs).abs());
        sdf_out = ls.min(rs);
        break;
      case BoolOp::Intersect:
        margin = margin.min((ls - rs).abs());
        sdf_out = ls.max(rs);
        break;
      case BoolOp::Subtract:
        margin = margin.min((ls + rs).abs());
        sdf_out = ls.max(-rs);
        break;
    }
    return;
  }
  const auto& t = e.transform();
  Eigen::MatrixXd q = pts;
  double corr = 1.0;
  switch (t.kind) {
    case TransformKind::Translate:
      for (int a = 0; a < d; ++a) q.col(a).array() -= t.params[a];
      break;
    case TransformKind::Scale: {
      double smin = t.params[0];
      for (int a = 0; a < d; ++a) {
        q.col(a).array() /= t.params[a];
        smin = std::min(smin, t.params[a]);
      }
      corr = smin;
      break;
    }
    case TransformKind::Rotate2d: {
      double c = std::cos(t.params[0]), s = std::sin(t.params[0]);
      Eigen::ArrayXd x = pts.col(0).array(), y = pts.col(1).array();
      q.col(0) = (c * x + s * y).matrix();
      q.col(1) = (-s * x + c * y).matrix();
      break;
    }
  }
  margin_rec(*t.child, q, margin, sdf_out);
  if (corr != 1.0) sdf_out *= corr;
}

Eigen::ArrayXd target_values(const OccupancyGrid& g) {
  Eigen::ArrayXd y(g.cell_count());
  for (int64_t i = 0; i < g.cell_count(); ++i) y[i] = g.get(i) ? 1.0 : 0.0;
  return y;
}

}  // namespace

int param_count(const Expr& e) { return count_params_rec(e); }

Eigen::VectorXd extract_params(const Expr& e) {
  Eigen::VectorXd phi(param_count(e));
  int off = 0;
  extract_rec(e, phi, off);
  return phi;
}

ExprPtr inject_params(const Expr& e, const Eigen::VectorXd& phi) {
  if (phi.size() != param_count(e)) throw std::invalid_argument("inject_params: layout mismatch");
  int off = 0;
  return inject_rec(e, phi, off);
}

double recon_loss_at(const Expr& e, const Eigen::MatrixXd& pts, const Eigen::ArrayXd& target_vals,
                     double sharpness) {
  Eigen::ArrayXd sdf = sdf_eval(e, pts);
  Eigen::ArrayXd o = soft_occupancy(sdf, sharpness).values;
  return (o - target_vals).square().mean();
}

std::pair<double, Eigen::VectorXd> loss_and_grad_at(const Expr& e, const Eigen::MatrixXd& pts,
                                                    const Eigen::ArrayXd& target_vals,
                                                    double sharpness) {
  DiffTree tree;
  int off = 0;
  auto pp = std::make_shared<const Eigen::MatrixXd>(pts);
  tree.root = tree.forward(e, pp, off);
  const Eigen::ArrayXd& sdf = tree.nodes[tree.root].sdf;

  const double a = sharpness;
  Eigen::ArrayXd th = (sdf * a).tanh();
  Eigen::ArrayXd o = 1.0 / (1.0 + (th * a).exp());  // sigmoid(-a*tanh(a*d))
  const double n = double(pts.rows());
  double loss = (o - target_vals).square().mean();
  // dL/dd = 2/n (o - y) * o(1-o) * (-a^2) * (1 - tanh(a d)^2)
  Eigen::ArrayXd up =
      (2.0 / n) * (o - target_vals) * o * (1.0 - o) * (-a * a) * (1.0 - th.square());

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(off);
  tree.backward(tree.root, up, grad);
  return {loss, grad};
}

Eigen::VectorXd grad_loss_at(const Expr& e, const Eigen::MatrixXd& pts,
                             const Eigen::ArrayXd& target_vals, double sharpness) {
  return loss_and_grad_at(e, pts, target_vals, sharpness).second;
}

double recon_loss(const Expr& e, const Eigen::VectorXd& phi, const OccupancyGrid& target,
                  double sharpness) {
  ExprPtr z = inject_params(e, phi);
  Eigen::MatrixXd pts = grid_points(z->dim, target.res());
  return recon_loss_at(*z, pts, target_values(target), sharpness);
}

Eigen::VectorXd grad_loss(const Expr& e, const Eigen::VectorXd& phi, const OccupancyGrid& target,
                          double sharpness) {
  ExprPtr z = inject_params(e, phi);
  Eigen::MatrixXd pts = grid_points(z->dim, target.res());
  return grad_loss_at(*z, pts, target_values(target), sharpness);
}

Eigen::ArrayXd branch_margin(const Expr& e, const Eigen::MatrixXd& pts) {
  Eigen::ArrayXd margin = Eigen::ArrayXd::Constant(pts.rows(), 1e300);
  Eigen::ArrayXd sdf;
  margin_rec(e, pts, margin, sdf);
  return margin;
}

}  // namespace coref
