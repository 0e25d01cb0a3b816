#include "coref/graft.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "coref/executor.hpp"
#include "coref/rng.hpp"

namespace coref {

Frame frame_of(const OccupancyGrid::IndexBox& box, const OccupancyGrid& g) {
  Frame f;
  for (int a = 0; a < dim_count(g.dim()); ++a) {
    double cell = 2.0 / g.res()[a];
    double lo = (double(box.lo[a]) + 0.5) / g.res()[a] * 2.0 - 1.0 - cell / 2;
    double hi = (double(box.hi[a]) + 0.5) / g.res()[a] * 2.0 - 1.0 + cell / 2;
    f.center[a] = (lo + hi) / 2;
    f.extent[a] = hi - lo;
  }
  return f;
}

namespace {

// translate(v, scale(k, core)): shape points map through x -> k*x + v.
ExprPtr wrap_affine(const std::array<double, 3>& k, const std::array<double, 3>& v,
                    const ExprPtr& core) {
  const int d = dim_count(core->dim);
  std::vector<double> ks(k.begin(), k.begin() + d);
  std::vector<double> vs(v.begin(), v.begin() + d);
  return make_transform(TransformKind::Translate, std::move(vs),
                        make_transform(TransformKind::Scale, std::move(ks), core));
}

}  // namespace

CanonicalForm canonicalize(const ExprPtr& e, const std::array<int, 3>& res) {
  OccupancyGrid exec = execute_hard(*e, res);
  auto box = exec.bounding_box();
  if (box.empty) throw EmptyExecutionError();

  CanonicalForm out;
  out.frame.center = box.center();
  out.frame.extent = box.extent();

  const int d = dim_count(e->dim);
  std::array<double, 3> k{1, 1, 1}, v{0, 0, 0};
  for (int a = 0; a < d; ++a) {
    k[a] = kCanonicalExtent / out.frame.extent[a];
    v[a] = -k[a] * out.frame.center[a];
  }

  // One analytic fit is exact in continuous space; iterate a few times to
  // absorb grid discretization of very small or thin shapes.
  for (int iter = 0; iter < 5; ++iter) {
    ExprPtr cand = wrap_affine(k, v, e);
    OccupancyGrid cexec = execute_hard(*cand, res);
    auto cbox = cexec.bounding_box();
    if (cbox.empty) throw EmptyExecutionError();
    auto ext = cbox.extent();
    auto ctr = cbox.center();
    bool ok = true;
    for (int a = 0; a < d; ++a) {
      double norm = ext[a] / 2.0;
      if (norm < 0.9 || norm > 1.0) ok = false;
    }
    if (ok) {
      out.expr = cand;
      return out;
    }
    for (int a = 0; a < d; ++a) {
      double kc = kCanonicalExtent / ext[a];
      v[a] = kc * v[a] - kc * ctr[a];
      k[a] = kc * k[a];
    }
  }
  throw std::runtime_error("canonicalize: did not reach the canonical frame");
}

CacheEntry make_cache_entry(const ExprPtr& subexpr, const std::array<int, 3>& res) {
  CacheEntry entry;
  entry.canon = canonicalize(subexpr, res);
  entry.bits = execute_hard(*entry.canon.expr, res);
  entry.length = program_length(*entry.canon.expr);
  entry.original = subexpr;
  return entry;
}

SubexprCache SubexprCache::make(Dim d, int capacity) {
  SubexprCache c;
  c.dim = d;
  c.res = OccupancyGrid::default_res(d);
  c.dedup_threshold = d == Dim::TwoD ? 10 : 100;
  c.capacity = capacity;
  return c;
}

const CacheEntry* SubexprCache::find(uint64_t id) const {
  for (const auto& e : entries)
    if (e.id == id) return &e;
  return nullptr;
}

InsertReport cache_insert(SubexprCache& c, CacheEntry entry, const std::string& origin_id) {
  InsertReport report;
  if (!entry.bits.same_shape(OccupancyGrid(c.dim, c.res)))
    throw std::invalid_argument("cache_insert: resolution mismatch");
  entry.origin_ids.push_back(origin_id);

  std::vector<size_t> close;
  for (size_t i = 0; i < c.entries.size(); ++i)
    if (entry.bits.hamming(c.entries[i].bits) < c.dedup_threshold) close.push_back(i);

  if (!close.empty()) {
    size_t shortest = close[0];
    for (size_t i : close)
      if (c.entries[i].length < c.entries[shortest].length) shortest = i;

    if (c.entries[shortest].length <= entry.length) {
      // Existing entry stays preferred; the incoming sub-expression is
      // rejected and its origins merge into the survivor.
      CacheEntry& pref = c.entries[shortest];
      report.entry_id = pref.id;
      report.rejections.push_back(
          {entry.original, entry.canon.frame, entry.origin_ids, pref.id, entry.length});
      for (const auto& oid : entry.origin_ids)
        if (std::find(pref.origin_ids.begin(), pref.origin_ids.end(), oid) ==
            pref.origin_ids.end())
          pref.origin_ids.push_back(oid);
      return report;
    }

    // The newcomer is strictly shorter than every close entry: it evicts
    // them all. Remaining entries are >= threshold from the newcomer, so the
    // pairwise separation invariant survives.
    std::sort(close.begin(), close.end(), std::greater<size_t>());
    for (size_t i : close) {
      CacheEntry& old = c.entries[i];
      report.rejections.push_back({old.original, old.canon.frame, old.origin_ids, 0, old.length});
      for (const auto& oid : old.origin_ids)
        if (std::find(entry.origin_ids.begin(), entry.origin_ids.end(), oid) ==
            entry.origin_ids.end())
          entry.origin_ids.push_back(oid);
      c.entries.erase(c.entries.begin() + long(i));
    }
  }

  entry.id = c.next_id++;
  report.appended = true;
  report.entry_id = entry.id;
  for (auto& rej : report.rejections)
    if (rej.preferred_id == 0) rej.preferred_id = entry.id;
  c.entries.push_back(std::move(entry));

  if (int(c.entries.size()) > c.capacity) {
    Rng rng(c.rng_state);
    while (int(c.entries.size()) > c.capacity) {
      size_t victim = size_t(rng.below(c.entries.size()));
      c.entries.erase(c.entries.begin() + long(victim));
    }
    c.rng_state = rng.state;
  }
  return report;
}

// ---------------------------------------------------------------------------

MaskedGrid invert_bool(BoolOp op, const MaskedGrid& T, const OccupancyGrid& sibling,
                       bool inverting_left, bool literal_diff_mask) {
  MaskedGrid out;
  switch (op) {
    case BoolOp::Union:
      out.target = T.target;
      out.valid = grid_and(T.valid, grid_not(grid_and(T.target, sibling)));
      break;
    case BoolOp::Intersect:
      out.target = T.target;
      out.valid = grid_and(T.valid, grid_or(T.target, sibling));
      break;
    case BoolOp::Subtract:
      if (inverting_left) {
        out.target = T.target;
        out.valid = grid_and(T.valid, literal_diff_mask
                                          ? grid_andnot(T.target, sibling)
                                          : grid_not(sibling));
      } else {
        out.target = grid_not(T.target);
        out.valid = grid_and(T.valid, grid_or(T.target, sibling));
      }
      break;
  }
  return out;
}

MaskedGrid invert_transform(TransformKind kind, const std::vector<double>& params,
                            const MaskedGrid& T) {
  const OccupancyGrid& ref = T.target;
  const int d = dim_count(ref.dim());
  MaskedGrid out;
  out.target = OccupancyGrid(ref.dim(), ref.res());
  out.valid = OccupancyGrid(ref.dim(), ref.res());
  double cth = 1, sth = 0;
  if (kind == TransformKind::Rotate2d) {
    cth = std::cos(params[0]);
    sth = std::sin(params[0]);
  }
  for (int64_t i = 0; i < ref.cell_count(); ++i) {
    auto q = ref.cell_center(i);
    std::array<double, 3> w{0, 0, 0};
    switch (kind) {
      case TransformKind::Translate:
        for (int a = 0; a < d; ++a) w[a] = q[a] + params[size_t(a)];
        break;
      case TransformKind::Scale:
        for (int a = 0; a < d; ++a) w[a] = q[a] * params[size_t(a)];
        break;
      case TransformKind::Rotate2d:
        w[0] = cth * q[0] - sth * q[1];
        w[1] = sth * q[0] + cth * q[1];
        break;
    }
    int64_t src = ref.cell_at(w);
    if (src < 0) continue;  // outside the domain: unknowable
    if (T.valid.get(src)) out.valid.set(i, true);
    if (T.target.get(src)) out.target.set(i, true);
  }
  return out;
}

DesiredExecution desired_execution(const ExecTree& t, const std::vector<int>& path,
                                   const OccupancyGrid& x, bool literal_diff_mask) {
  MaskedGrid cur;
  cur.target = x;
  cur.valid = grid_not(OccupancyGrid(x.dim(), x.res()));  // all valid

  int idx = t.root;
  for (int step : path) {
    const auto& n = t.at(idx);
    const Expr& e = *n.expr;
    if (e.is_boolean()) {
      int sib = step == 0 ? n.right : n.left;
      cur = invert_bool(e.boolean().op, cur, t.at(sib).grid, step == 0, literal_diff_mask);
      idx = step == 0 ? n.left : n.right;
    } else if (e.is_transform()) {
      cur = invert_transform(e.transform().kind, e.transform().params, cur);
      idx = n.child;
    } else {
      throw std::invalid_argument("path descends into a primitive");
    }
  }

  DesiredExecution out;
  const OccupancyGrid& node_grid = t.at(idx).grid;
  out.bbox = node_grid.index_box();
  if (out.bbox.empty) {
    // No execution to bound: fall back to the region the inversion wants
    // filled, so empty nodes can still receive grafts.
    out.bbox = grid_and(cur.target, cur.valid).index_box();
  }
  if (!out.bbox.empty) {
    OccupancyGrid boxmask(x.dim(), x.res());
    for (int zc = out.bbox.lo[2]; zc <= out.bbox.hi[2]; ++zc)
      for (int yc = out.bbox.lo[1]; yc <= out.bbox.hi[1]; ++yc)
        for (int xc = out.bbox.lo[0]; xc <= out.bbox.hi[0]; ++xc)
          boxmask.set(boxmask.index(xc, yc, zc), true);
    cur.valid = grid_and(cur.valid, boxmask);
    out.frame = frame_of(out.bbox, x);
  }
  out.g = std::move(cur);
  return out;
}

MaskedGrid to_canonical_frame(const DesiredExecution& d, Dim dim, const std::array<int, 3>& res) {
  MaskedGrid out;
  out.target = OccupancyGrid(dim, res);
  out.valid = OccupancyGrid(dim, res);
  const int dc = dim_count(dim);
  const OccupancyGrid& src = d.g.target;
  for (int64_t i = 0; i < out.target.cell_count(); ++i) {
    auto q = out.target.cell_center(i);
    std::array<double, 3> w{0, 0, 0};
    for (int a = 0; a < dc; ++a)
      w[a] = d.frame.center[a] + q[a] * (d.frame.extent[a] / kCanonicalExtent);
    int64_t cell = src.cell_at(w);
    if (cell < 0) continue;
    if (d.g.valid.get(cell)) out.valid.set(i, true);
    if (src.get(cell)) out.target.set(i, true);
  }
  return out;
}

std::vector<KnnHit> knn_query(const SubexprCache& c, const DesiredExecution& d, int k) {
  if (c.entries.empty()) throw std::runtime_error("knn_query: empty cache");
  MaskedGrid canon = to_canonical_frame(d, c.dim, c.res);
  const auto& tw = canon.target.words();
  const auto& vw = canon.valid.words();
  std::vector<KnnHit> hits;
  hits.reserve(c.entries.size());
  for (size_t i = 0; i < c.entries.size(); ++i) {
    const auto& ew = c.entries[i].bits.words();
    int64_t score = 0;
    for (size_t wi = 0; wi < ew.size(); ++wi)
      score += std::popcount((ew[wi] ^ tw[wi]) & vw[wi]);
    hits.push_back({int(i), score});
  }
  std::sort(hits.begin(), hits.end(), [&](const KnnHit& a, const KnnHit& b) {
    if (a.score != b.score) return a.score < b.score;
    const auto& ea = c.entries[size_t(a.entry_index)];
    const auto& eb = c.entries[size_t(b.entry_index)];
    if (ea.length != eb.length) return ea.length < eb.length;
    return ea.id < eb.id;
  });
  if (int(hits.size()) > k) hits.resize(size_t(k));
  return hits;
}

ExprPtr refit_entry(const CacheEntry& e, const Frame& target) {
  const int d = dim_count(e.canon.expr->dim);
  std::array<double, 3> k2{1, 1, 1}, v2{0, 0, 0};
  for (int a = 0; a < d; ++a) {
    k2[a] = target.extent[a] / kCanonicalExtent;
    v2[a] = target.center[a];
  }
  // Compose with the entry's own leading translate(v1) . scale(k1) so the
  // refit costs no extra commands.
  const Expr& outer = *e.canon.expr;
  if (outer.is_transform() && outer.transform().kind == TransformKind::Translate &&
      outer.transform().child->is_transform() &&
      outer.transform().child->transform().kind == TransformKind::Scale) {
    const auto& v1 = outer.transform().params;
    const auto& inner = outer.transform().child->transform();
    std::array<double, 3> k{1, 1, 1}, v{0, 0, 0};
    for (int a = 0; a < d; ++a) {
      k[a] = k2[a] * inner.params[size_t(a)];
      v[a] = k2[a] * v1[size_t(a)] + v2[a];
    }
    return wrap_affine(k, v, inner.child);
  }
  return wrap_affine(k2, v2, e.canon.expr);
}

std::optional<ExprPtr> rewrite_cg(const OccupancyGrid& x, const ExprPtr& z,
                                  const SubexprCache& c, const ObjectiveConfig& cfg, int k,
                                  int max_repl, bool literal_diff_mask) {
  if (c.entries.empty()) return std::nullopt;
  const Score initial = objective(x, *z, cfg);
  ExprPtr cur = z;
  Score cur_score = initial;

  for (int repl = 0; repl < max_repl; ++repl) {
    ExecTree t = build_exec_tree(cur, x.res());
    auto subs = subexpressions(*cur);

    ExprPtr best;
    Score best_score = cur_score;
    bool found = false;

    auto consider = [&](const ExprPtr& candidate) {
      Score s = objective(x, *candidate, cfg);
      if (s.objective > best_score.objective) {
        best = candidate;
        best_score = s;
        found = true;
      }
    };

    for (const auto& sub : subs) {
      DesiredExecution d = desired_execution(t, sub.path, x, literal_diff_mask);
      if (d.bbox.empty) continue;
      for (const KnnHit& hit : knn_query(c, d, k)) {
        ExprPtr graft = refit_entry(c.entries[size_t(hit.entry_index)], d.frame);
        consider(replace_at(cur, sub.path, graft));
      }
    }

    // Appended empty slot: union(expr, empty) admits grafts that add a part.
    {
      MaskedGrid whole;
      whole.target = x;
      whole.valid = grid_not(OccupancyGrid(x.dim(), x.res()));
      DesiredExecution d;
      d.g = invert_bool(BoolOp::Union, whole, t.at(t.root).grid, false, literal_diff_mask);
      d.bbox = grid_and(d.g.target, d.g.valid).index_box();
      if (!d.bbox.empty) {
        d.frame = frame_of(d.bbox, x);
        for (const KnnHit& hit : knn_query(c, d, k)) {
          ExprPtr graft = refit_entry(c.entries[size_t(hit.entry_index)], d.frame);
          consider(make_boolean(BoolOp::Union, cur, graft));
        }
      }
    }

    if (!found) break;
    cur = best;
    cur_score = best_score;
  }

  if (cur_score.objective > initial.objective) return cur;
  return std::nullopt;
}

namespace {
// Replace every occurrence of `what` in e by `with`; occurrences inside
// replaced subtrees are not revisited.
ExprPtr replace_all(const ExprPtr& e, const Expr& what, const ExprPtr& with, int& count) {
  if (structural_equal(*e, what)) {
    ++count;
    return with;
  }
  if (e->is_boolean()) {
    const auto& b = e->boolean();
    ExprPtr l = replace_all(b.left, what, with, count);
    ExprPtr r = replace_all(b.right, what, with, count);
    if (l == b.left && r == b.right) return e;
    return make_boolean(b.op, l, r);
  }
  if (e->is_transform()) {
    const auto& tr = e->transform();
    ExprPtr child = replace_all(tr.child, what, with, count);
    if (child == tr.child) return e;
    return make_transform(tr.kind, tr.params, child);
  }
  return e;
}
}  // namespace

std::vector<std::pair<std::string, ExprPtr>> shorten_rewrite(
    const std::vector<ShortenCandidate>& programs, const std::vector<CacheRejection>& rejections,
    const SubexprCache& c, const ObjectiveConfig& cfg) {
  std::vector<std::pair<std::string, ExprPtr>> out;
  for (const auto& prog : programs) {
    ExprPtr cur = prog.program;
    bool changed = false;
    for (const auto& rej : rejections) {
      if (std::find(rej.origin_ids.begin(), rej.origin_ids.end(), prog.id) ==
          rej.origin_ids.end())
        continue;
      const CacheEntry* pref = c.find(rej.preferred_id);
      if (!pref) continue;  // preferred entry has since been subsampled away
      ExprPtr with = refit_entry(*pref, rej.frame);
      int count = 0;
      ExprPtr next = replace_all(cur, *rej.original, with, count);
      if (count > 0) {
        cur = next;
        changed = true;
      }
    }
    if (!changed) continue;
    Score before = objective(*prog.shape, *prog.program, cfg);
    Score after = objective(*prog.shape, *cur, cfg);
    if (after.objective >= before.objective) out.emplace_back(prog.id, cur);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {
std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

void save_cache(const std::string& path, const SubexprCache& c) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << "CSGCACHE " << dim_count(c.dim) << ' ' << c.res[0] << ' ' << c.res[1];
  if (c.dim == Dim::ThreeD) f << ' ' << c.res[2];
  f << ' ' << c.dedup_threshold << ' ' << c.capacity << ' ' << c.entries.size() << '\n';
  f << "STATE " << c.next_id << ' ' << c.rng_state << '\n';
  for (const auto& e : c.entries) {
    std::vector<uint8_t> bytes(size_t((e.bits.cell_count() + 7) / 8), 0);
    for (int64_t i = 0; i < e.bits.cell_count(); ++i)
      if (e.bits.get(i)) bytes[size_t(i >> 3)] |= uint8_t(1u << (i & 7));
    f << e.id << '\t' << e.length << '\t';
    for (int a = 0; a < 3; ++a) f << fmt_g(e.canon.frame.center[a]) << ' ';
    for (int a = 0; a < 3; ++a) f << fmt_g(e.canon.frame.extent[a]) << (a < 2 ? ' ' : '\t');
    if (e.origin_ids.empty()) {
      f << '-';
    } else {
      for (size_t i = 0; i < e.origin_ids.size(); ++i)
        f << (i ? "," : "") << e.origin_ids[i];
    }
    f << '\t' << base64_encode(bytes) << '\t' << print_program(*e.canon.expr) << '\t'
      << print_program(*e.original) << '\n';
  }
}

SubexprCache load_cache(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string magic;
  int d = 0;
  f >> magic >> d;
  if (magic != "CSGCACHE" || (d != 2 && d != 3)) throw std::runtime_error("bad cache header");
  SubexprCache c;
  c.dim = d == 2 ? Dim::TwoD : Dim::ThreeD;
  c.res = {1, 1, 1};
  for (int i = 0; i < d; ++i) f >> c.res[i];
  if (c.dim == Dim::TwoD) c.res[2] = 1;
  size_t count = 0;
  f >> c.dedup_threshold >> c.capacity >> count;
  f >> magic >> c.next_id >> c.rng_state;
  if (magic != "STATE") throw std::runtime_error("bad cache state line");
  std::string line;
  std::getline(f, line);  // eat newline
  for (size_t n = 0; n < count; ++n) {
    if (!std::getline(f, line)) throw std::runtime_error("cache truncated");
    std::vector<std::string> fields;
    size_t start = 0;
    for (size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == '\t') {
        fields.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (fields.size() != 7) throw std::runtime_error("bad cache entry line");
    CacheEntry e;
    e.id = std::stoull(fields[0]);
    e.length = std::stoll(fields[1]);
    {
      std::istringstream fr(fields[2]);
      for (int a = 0; a < 3; ++a) fr >> e.canon.frame.center[a];
      for (int a = 0; a < 3; ++a) fr >> e.canon.frame.extent[a];
    }
    if (fields[3] != "-") {
      size_t s = 0;
      for (size_t i = 0; i <= fields[3].size(); ++i) {
        if (i == fields[3].size() || fields[3][i] == ',') {
          e.origin_ids.push_back(fields[3].substr(s, i - s));
          s = i + 1;
        }
      }
    }
    e.bits = OccupancyGrid(c.dim, c.res);
    std::vector<uint8_t> bytes = base64_decode(fields[4]);
    if (int64_t(bytes.size()) * 8 < e.bits.cell_count())
      throw std::runtime_error("cache entry payload too short");
    for (int64_t i = 0; i < e.bits.cell_count(); ++i)
      if ((bytes[size_t(i >> 3)] >> (i & 7)) & 1u) e.bits.set(i, true);
    e.canon.expr = parse_program(fields[5], c.dim);
    e.original = parse_program(fields[6], c.dim);
    c.entries.push_back(std::move(e));
  }
  return c;
}

}  // namespace coref
