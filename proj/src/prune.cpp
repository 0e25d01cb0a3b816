#include "coref/prune.hpp"

#include <map>
#include <stdexcept>
#include <string>

#include "coref/executor.hpp"

namespace coref {

namespace {

int build_rec(const ExprPtr& e, const std::array<int, 3>& res, ExecTree& t, int& pre) {
  int idx = int(t.nodes.size());
  t.nodes.emplace_back();
  t.nodes[size_t(idx)].preorder = pre++;
  t.nodes[size_t(idx)].expr = e;
  if (e->is_boolean()) {
    const auto& b = e->boolean();
    int l = build_rec(b.left, res, t, pre);
    int r = build_rec(b.right, res, t, pre);
    OccupancyGrid g = apply_bool_op(b.op, t.at(l).grid, t.at(r).grid);
    t.nodes[size_t(idx)].left = l;
    t.nodes[size_t(idx)].right = r;
    t.nodes[size_t(idx)].grid = std::move(g);
  } else if (e->is_transform()) {
    int c = build_rec(e->transform().child, res, t, pre);
    t.nodes[size_t(idx)].child = c;
    t.nodes[size_t(idx)].grid = execute_hard(*e, res);
  } else {
    t.nodes[size_t(idx)].grid = execute_hard(*e, res);
  }
  return idx;
}

}  // namespace

ExecTree build_exec_tree(const ExprPtr& z, const std::array<int, 3>& res) {
  ExecTree t;
  int pre = 0;
  t.root = build_rec(z, res, t, pre);
  return t;
}

int node_index_at(const ExecTree& t, const std::vector<int>& path) {
  int idx = t.root;
  for (int step : path) {
    const auto& n = t.at(idx);
    if (n.left >= 0) {
      idx = step == 0 ? n.left : n.right;
    } else if (n.child >= 0) {
      if (step != 0) throw std::invalid_argument("bad path step at transform");
      idx = n.child;
    } else {
      throw std::invalid_argument("path descends into a primitive");
    }
  }
  return idx;
}

ExprPtr top_down_reroot(const ExecTree& t, const OccupancyGrid& x, const ObjectiveConfig& cfg) {
  int best = -1;
  Score best_score;
  int best_len = 0;
  for (size_t i = 0; i < t.nodes.size(); ++i) {
    const auto& n = t.nodes[i];
    int len = program_length(*n.expr);
    Score s = objective_given_exec(x, n.grid, len, cfg);
    bool better =
        best < 0 || s.objective > best_score.objective ||
        (s.objective == best_score.objective &&
         (len < best_len || (len == best_len && n.preorder < t.at(best).preorder)));
    if (better) {
      best = int(i);
      best_score = s;
      best_len = len;
    }
  }
  return t.at(best).expr;
}

namespace {

struct PruneResult {
  ExprPtr expr;  // nullptr = executes to empty
  const OccupancyGrid* grid = nullptr;
};

PruneResult prune_rec(const ExecTree& t, int idx, int tol) {
  const auto& n = t.at(idx);
  const Expr& e = *n.expr;
  auto empty = [&](const OccupancyGrid& g) { return g.count() <= tol; };
  auto matches = [&](const OccupancyGrid& a, const OccupancyGrid& b) {
    return tol == 0 ? a == b : a.hamming(b) <= tol;
  };

  if (e.is_primitive()) {
    if (empty(n.grid)) return {};
    return {n.expr, &n.grid};
  }
  if (e.is_transform()) {
    if (empty(n.grid)) return {};
    PruneResult c = prune_rec(t, n.child, tol);
    if (!c.expr) return {};
    const auto& tr = e.transform();
    ExprPtr out = c.expr == t.at(n.child).expr ? n.expr
                                               : make_transform(tr.kind, tr.params, c.expr);
    return {out, &n.grid};
  }

  const auto& b = e.boolean();
  PruneResult l = prune_rec(t, n.left, tol);
  PruneResult r = prune_rec(t, n.right, tol);

  switch (b.op) {
    case BoolOp::Union:
      if (!l.expr && !r.expr) return {};
      if (!l.expr) return r;
      if (!r.expr) return l;
      break;
    case BoolOp::Intersect:
      if (!l.expr || !r.expr) return {};
      break;
    case BoolOp::Subtract:
      if (!l.expr) return {};
      if (!r.expr) return l;
      break;
  }
  if (empty(n.grid)) return {};
  // Parent execution matching a child makes the sibling extraneous. Only the
  // left child can match under subtract.
  if (matches(n.grid, *l.grid)) return l;
  if (b.op != BoolOp::Subtract && matches(n.grid, *r.grid)) return r;

  bool unchanged = l.expr == t.at(n.left).expr && r.expr == t.at(n.right).expr;
  ExprPtr out = unchanged ? n.expr : make_boolean(b.op, l.expr, r.expr);
  return {out, &n.grid};
}

}  // namespace

ExprPtr bottom_up_prune(const ExprPtr& z, const OccupancyGrid& x, int match_tolerance) {
  // Every rewrite preserves the execution of surviving nodes, so one pass
  // over the annotated tree is almost always enough; iterate to cover
  // rewrites that only become visible after restructuring.
  ExprPtr cur = z;
  for (;;) {
    ExecTree t = build_exec_tree(cur, x.res());
    PruneResult res = prune_rec(t, t.root, match_tolerance);
    if (!res.expr) return nullptr;
    if (res.expr == cur || structural_equal(*res.expr, *cur)) return res.expr;
    cur = res.expr;
  }
}

std::optional<ExprPtr> rewrite_cp(const OccupancyGrid& x, const ExprPtr& z,
                                  const ObjectiveConfig& cfg, int match_tolerance) {
  ExecTree t = build_exec_tree(z, x.res());
  ExprPtr rerooted = top_down_reroot(t, x, cfg);
  ExprPtr pruned = bottom_up_prune(rerooted, x, match_tolerance);
  if (!pruned) return std::nullopt;
  Score before = objective_given_exec(x, t.at(t.root).grid, program_length(*z), cfg);
  Score after = objective(x, *pruned, cfg);
  if (after.objective > before.objective) return pruned;
  return std::nullopt;
}

namespace {

// All programs reachable from e through child promotions of boolean nodes.
void promo_set(const ExprPtr& e, std::vector<ExprPtr>& out) {
  if (e->is_primitive()) {
    out.push_back(e);
    return;
  }
  if (e->is_transform()) {
    const auto& t = e->transform();
    std::vector<ExprPtr> cs;
    promo_set(t.child, cs);
    for (auto& c : cs)
      out.push_back(c == t.child ? e : make_transform(t.kind, t.params, c));
    return;
  }
  const auto& b = e->boolean();
  std::vector<ExprPtr> ls, rs;
  promo_set(b.left, ls);
  promo_set(b.right, rs);
  for (auto& l : ls)
    for (auto& r : rs)
      out.push_back(l == b.left && r == b.right ? e : make_boolean(b.op, l, r));
  for (auto& l : ls) out.push_back(l);
  for (auto& r : rs) out.push_back(r);
}

void all_nodes(const ExprPtr& e, std::vector<ExprPtr>& out) {
  out.push_back(e);
  if (e->is_boolean()) {
    all_nodes(e->boolean().left, out);
    all_nodes(e->boolean().right, out);
  } else if (e->is_transform()) {
    all_nodes(e->transform().child, out);
  }
}

}  // namespace

std::vector<ExprPtr> cp_space(const ExprPtr& z, int max_nodes) {
  if (program_length(*z) > max_nodes)
    throw std::invalid_argument("cp_space: program too large for enumeration");
  std::vector<ExprPtr> roots;
  all_nodes(z, roots);
  std::vector<ExprPtr> members;
  std::map<std::string, ExprPtr> dedup;
  for (const auto& r : roots) {
    members.clear();
    promo_set(r, members);
    for (auto& m : members) dedup.emplace(print_program(*m), m);
  }
  std::vector<ExprPtr> out;
  out.reserve(dedup.size());
  for (auto& [text, e] : dedup) out.push_back(e);
  return out;
}

ExprPtr oracle_cp(const OccupancyGrid& x, const ExprPtr& z, const ObjectiveConfig& cfg,
                  int max_nodes) {
  std::vector<ExprPtr> space = cp_space(z, max_nodes);
  ExprPtr best;
  Score best_score;
  int best_len = 0;
  for (const auto& cand : space) {
    Score s = objective(x, *cand, cfg);
    int len = int(s.length);
    if (!best || s.objective > best_score.objective ||
        (s.objective == best_score.objective && len < best_len)) {
      best = cand;
      best_score = s;
      best_len = len;
    }
  }
  return best;
}

}  // namespace coref
