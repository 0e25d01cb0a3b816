#include "coref/proposal.hpp"

#include <algorithm>

#include "coref/objective.hpp"

namespace coref {

double grid_param(Rng& rng) {
  int k = int(rng.below(33)) - 16;
  return double(k) / 17.0;
}

namespace {
ExprPtr sample_rec(Rng& rng, Dim dim, int depth_left) {
  if (depth_left > 0 && rng.chance(0.6)) {
    BoolOp op;
    switch (rng.below(3)) {
      case 0: op = BoolOp::Union; break;
      case 1: op = BoolOp::Intersect; break;
      default: op = BoolOp::Subtract; break;
    }
    ExprPtr l = sample_rec(rng, dim, depth_left - 1);
    ExprPtr r = sample_rec(rng, dim, depth_left - 1);
    return make_boolean(op, std::move(l), std::move(r));
  }
  PrimitiveKind kind;
  if (dim == Dim::TwoD)
    kind = rng.chance(0.5) ? PrimitiveKind::Rectangle : PrimitiveKind::Ellipse;
  else
    kind = rng.chance(0.5) ? PrimitiveKind::Cuboid : PrimitiveKind::Ellipsoid;
  std::vector<double> raw(size_t(primitive_arity(dim)));
  for (auto& v : raw) v = grid_param(rng);
  return make_primitive(dim, kind, std::move(raw));
}
}  // namespace

ExprPtr sample_program(Rng& rng, Dim dim, int depth_max) {
  return sample_rec(rng, dim, depth_max);
}

uint64_t grid_hash(const OccupancyGrid& g) {
  return fnv1a64(g.words().data(), g.words().size() * sizeof(uint64_t));
}

ExprPtr jitter_params(const Expr& e, Rng& rng, double amp) {
  if (e.is_primitive()) {
    const auto& p = e.primitive();
    std::vector<double> raw = p.raw;
    for (auto& v : raw)
      v = std::clamp(v + rng.uniform(-amp, amp), -1.0 + 1e-9, 1.0 - 1e-9);
    return make_primitive(e.dim, p.kind, std::move(raw));
  }
  if (e.is_boolean()) {
    const auto& b = e.boolean();
    ExprPtr l = jitter_params(*b.left, rng, amp);
    ExprPtr r = jitter_params(*b.right, rng, amp);
    return make_boolean(b.op, std::move(l), std::move(r));
  }
  const auto& t = e.transform();
  return make_transform(t.kind, t.params, jitter_params(*t.child, rng, amp));
}

std::vector<ExprPtr> RandomSampler::propose(const OccupancyGrid& x, int beam) {
  uint64_t key = grid_hash(x);
  uint64_t draw;
  {
    std::lock_guard<std::mutex> lock(mu_);
    draw = draws_[key]++;
  }
  Rng rng(mix_seed(seed_, key, draw));
  std::vector<ExprPtr> out;
  out.reserve(size_t(beam));
  for (int i = 0; i < beam; ++i) out.push_back(sample_program(rng, dim_, depth_max_));
  return out;
}

void MemorizingRetriever::train(
    const std::vector<std::pair<const OccupancyGrid*, ExprPtr>>& pairs) {
  for (const auto& [grid, program] : pairs) {
    uint64_t key = grid_hash(*grid);
    auto it = std::find(keys_.begin(), keys_.end(), key);
    if (it == keys_.end()) {
      keys_.push_back(key);
      grids_.push_back(*grid);
      programs_.push_back(program);
    } else {
      programs_[size_t(it - keys_.begin())] = program;
    }
  }
}

std::vector<ExprPtr> MemorizingRetriever::propose(const OccupancyGrid& x, int beam) {
  uint64_t key = grid_hash(x);
  uint64_t draw;
  {
    std::lock_guard<std::mutex> lock(mu_);
    draw = draws_[key]++;
  }
  Rng rng(mix_seed(seed_ ^ 0x52455452u, key, draw));

  std::vector<ExprPtr> out;
  out.reserve(size_t(beam));
  if (!grids_.empty()) {
    std::vector<std::pair<double, size_t>> ranked;
    ranked.reserve(grids_.size());
    for (size_t i = 0; i < grids_.size(); ++i) ranked.emplace_back(-iou(x, grids_[i]), i);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    size_t take = std::min(ranked.size(), size_t((beam + 1) / 2));
    for (size_t i = 0; i < take && int(out.size()) < beam; ++i) {
      const ExprPtr& prog = programs_[ranked[i].second];
      out.push_back(prog);
      if (int(out.size()) < beam) out.push_back(jitter_params(*prog, rng));
    }
  }
  while (int(out.size()) < beam) out.push_back(sample_program(rng, dim_, depth_max_));
  return out;
}

}  // namespace coref
