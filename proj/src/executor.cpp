#include "coref/executor.hpp"

#include <cmath>
#include <stdexcept>

namespace coref {

Eigen::MatrixXd grid_points(Dim dim, const std::array<int, 3>& res) {
  const int d = dim_count(dim);
  const int64_t n = int64_t(res[0]) * res[1] * (d == 3 ? res[2] : 1);
  Eigen::MatrixXd pts(n, d);
  int64_t row = 0;
  const int rz = d == 3 ? res[2] : 1;
  for (int z = 0; z < rz; ++z)
    for (int y = 0; y < res[1]; ++y)
      for (int x = 0; x < res[0]; ++x) {
        pts(row, 0) = (x + 0.5) / res[0] * 2.0 - 1.0;
        pts(row, 1) = (y + 0.5) / res[1] * 2.0 - 1.0;
        if (d == 3) pts(row, 2) = (z + 0.5) / res[2] * 2.0 - 1.0;
        ++row;
      }
  return pts;
}

namespace {

Eigen::ArrayXd sdf_box(const PrimitiveGeom& g, int d, const Eigen::MatrixXd& pts) {
  const int64_t n = pts.rows();
  Eigen::ArrayXd out(n);
  double c = 1.0, s = 0.0;
  if (d == 2 && g.rotation != 0.0) {
    c = std::cos(g.rotation);
    s = std::sin(g.rotation);
  }
  for (int64_t i = 0; i < n; ++i) {
    double q[3];
    double rel0 = pts(i, 0) - g.center[0];
    double rel1 = pts(i, 1) - g.center[1];
    if (d == 2) {
      // rotate query by -rotation about the primitive center
      q[0] = c * rel0 + s * rel1;
      q[1] = -s * rel0 + c * rel1;
      q[2] = 0;
    } else {
      q[0] = rel0;
      q[1] = rel1;
      q[2] = pts(i, 2) - g.center[2];
    }
    double out_sq = 0.0, inner = -1e300;
    for (int a = 0; a < d; ++a) {
      double va = std::abs(q[a]) - g.half_extent[a];
      if (va > 0) out_sq += va * va;
      inner = std::max(inner, va);
    }
    out[i] = out_sq > 0 ? std::sqrt(out_sq) : inner;
  }
  return out;
}

Eigen::ArrayXd sdf_ellipse(const PrimitiveGeom& g, int d, const Eigen::MatrixXd& pts) {
  const int64_t n = pts.rows();
  Eigen::ArrayXd out(n);
  double c = 1.0, s = 0.0;
  if (d == 2 && g.rotation != 0.0) {
    c = std::cos(g.rotation);
    s = std::sin(g.rotation);
  }
  double rmin = g.half_extent[0];
  for (int a = 1; a < d; ++a) rmin = std::min(rmin, g.half_extent[a]);
  for (int64_t i = 0; i < n; ++i) {
    double q[3];
    double rel0 = pts(i, 0) - g.center[0];
    double rel1 = pts(i, 1) - g.center[1];
    if (d == 2) {
      q[0] = c * rel0 + s * rel1;
      q[1] = -s * rel0 + c * rel1;
      q[2] = 0;
    } else {
      q[0] = rel0;
      q[1] = rel1;
      q[2] = pts(i, 2) - g.center[2];
    }
    double nn = 0.0;
    for (int a = 0; a < d; ++a) {
      double u = q[a] / g.half_extent[a];
      nn += u * u;
    }
    out[i] = (std::sqrt(nn) - 1.0) * rmin;
  }
  return out;
}

}  // namespace

Eigen::ArrayXd sdf_eval(const Expr& e, const Eigen::MatrixXd& pts) {
  const int d = dim_count(e.dim);
  if (pts.cols() != d) throw std::invalid_argument("sdf_eval: point dim mismatch");
  if (e.is_primitive()) {
    const auto& p = e.primitive();
    PrimitiveGeom g = map_params(p, e.dim);
    switch (p.kind) {
      case PrimitiveKind::Rectangle:
      case PrimitiveKind::Cuboid:
        return sdf_box(g, d, pts);
      case PrimitiveKind::Ellipse:
      case PrimitiveKind::Ellipsoid:
        return sdf_ellipse(g, d, pts);
    }
    throw std::logic_error("bad primitive kind");
  }
  if (e.is_boolean()) {
    const auto& b = e.boolean();
    Eigen::ArrayXd l = sdf_eval(*b.left, pts);
    Eigen::ArrayXd r = sdf_eval(*b.right, pts);
    switch (b.op) {
      case BoolOp::Union: return l.min(r);
      case BoolOp::Intersect: return l.max(r);
      case BoolOp::Subtract: return l.max(-r);
    }
    throw std::logic_error("bad bool op");
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
      // shape rotated by +theta about the origin: rotate queries by -theta
      double th = t.params[0];
      double c = std::cos(th), s = std::sin(th);
      Eigen::ArrayXd x = pts.col(0).array(), y = pts.col(1).array();
      q.col(0) = (c * x + s * y).matrix();
      q.col(1) = (-s * x + c * y).matrix();
      break;
    }
  }
  Eigen::ArrayXd child = sdf_eval(*t.child, q);
  return corr == 1.0 ? child : (child * corr).eval();
}

OccupancyGrid execute_hard(const Expr& e, const std::array<int, 3>& res) {
  OccupancyGrid g(e.dim, res);
  Eigen::MatrixXd pts = grid_points(e.dim, g.res());
  Eigen::ArrayXd sdf = sdf_eval(e, pts);
  for (int64_t i = 0; i < g.cell_count(); ++i)
    if (sdf[i] < 0) g.set(i, true);
  return g;
}

OccupancyGrid execute_hard(const Expr& e) {
  return execute_hard(e, OccupancyGrid::default_res(e.dim));
}

SoftOccupancy soft_occupancy(const Eigen::ArrayXd& sdf, double sharpness) {
  if (!(sharpness > 0)) throw std::invalid_argument("sharpness must be positive");
  SoftOccupancy out;
  out.sharpness = sharpness;
  Eigen::ArrayXd u = -(sdf * sharpness).tanh() * sharpness;
  out.values = 1.0 / (1.0 + (-u).exp());
  return out;
}

}  // namespace coref
