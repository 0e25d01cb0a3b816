#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "coref/executor.hpp"
#include "coref/graft.hpp"
#include "coref/proposal.hpp"
#include "coref/rng.hpp"

using namespace coref;

namespace {

ObjectiveConfig iou_cfg() {
  ObjectiveConfig cfg;
  cfg.recon = ReconMetric::IoU;
  return cfg;
}

ExprPtr nonempty_sample(Rng& rng, Dim dim, int depth, int min_cells = 1) {
  for (;;) {
    ExprPtr e = sample_program(rng, dim, depth);
    if (execute_hard(*e).count() >= min_cells) return e;
  }
}

MaskedGrid full_target(const OccupancyGrid& x) {
  MaskedGrid t;
  t.target = x;
  t.valid = grid_not(OccupancyGrid(x.dim(), x.res()));
  return t;
}

OccupancyGrid random_grid(Rng& rng, Dim dim, double p = 0.3) {
  OccupancyGrid g(dim, OccupancyGrid::default_res(dim));
  for (int64_t i = 0; i < g.cell_count(); ++i)
    if (rng.chance(p)) g.set(i, true);
  return g;
}

// Independent per-cell masked-hamming scorer used to cross-check knn_query.
int64_t knn_score_oracle(const SubexprCache& c, const CacheEntry& e, const DesiredExecution& d) {
  int64_t score = 0;
  OccupancyGrid probe(c.dim, c.res);
  for (int64_t i = 0; i < probe.cell_count(); ++i) {
    auto q = probe.cell_center(i);
    std::array<double, 3> w{0, 0, 0};
    for (int a = 0; a < dim_count(c.dim); ++a)
      w[a] = d.frame.center[a] + q[a] * (d.frame.extent[a] / kCanonicalExtent);
    int64_t cell = d.g.target.cell_at(w);
    if (cell < 0 || !d.g.valid.get(cell)) continue;
    if (e.bits.get(i) != d.g.target.get(cell)) ++score;
  }
  return score;
}

}  // namespace

TEST_CASE("canonicalize centers and scales executions into the unit frame") {
  Rng rng(401);
  for (int t = 0; t < 15; ++t) {
    Dim dim = t % 2 ? Dim::ThreeD : Dim::TwoD;
    auto res = OccupancyGrid::default_res(dim);
    ExprPtr e = nonempty_sample(rng, dim, 2, 3);
    CanonicalForm canon = canonicalize(e, res);
    OccupancyGrid exec = execute_hard(*canon.expr, res);
    auto box = exec.bounding_box();
    REQUIRE(!box.empty);
    for (int a = 0; a < dim_count(dim); ++a) {
      double norm = box.extent()[a] / 2.0;
      CHECK(norm >= 0.9);
      CHECK(norm <= 1.0);
      CHECK(std::abs(box.center()[a]) < 0.1);
    }
    // frame records the original bbox
    auto orig_box = execute_hard(*e, res).bounding_box();
    CHECK(canon.frame.center[0] == doctest::Approx(orig_box.center()[0]));
    CHECK(canon.frame.extent[0] == doctest::Approx(orig_box.extent()[0]));
  }
}

TEST_CASE("canonicalize of a centered near-unit shape is near identity") {
  // extent 1.9 box centered at origin: already canonical
  double raw = unmap_scale(1.9);
  char buf[128];
  std::snprintf(buf, sizeof buf, "rectangle(0,0,%.17g,%.17g,0)", raw, raw);
  ExprPtr e = parse_program(buf, Dim::TwoD);
  CanonicalForm canon = canonicalize(e, {64, 64, 1});
  const auto& tr = canon.expr->transform();
  REQUIRE(tr.kind == TransformKind::Translate);
  CHECK(std::abs(tr.params[0]) < 0.05);
  const auto& sc = tr.child->transform();
  REQUIRE(sc.kind == TransformKind::Scale);
  CHECK(sc.params[0] == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("canonicalize rejects empty executions") {
  ExprPtr tiny = parse_program("ellipse(0.97,0.97,-0.999,-0.999,0)", Dim::TwoD);
  REQUIRE(execute_hard(*tiny).count() == 0);
  CHECK_THROWS_AS(canonicalize(tiny, {64, 64, 1}), EmptyExecutionError);
}

TEST_CASE("cache insert: append, reject-longer, replace-shorter") {
  Rng rng(409);
  SubexprCache cache = SubexprCache::make(Dim::TwoD);
  ExprPtr prim = nonempty_sample(rng, Dim::TwoD, 0, 10);
  CacheEntry e1 = make_cache_entry(prim, cache.res);
  InsertReport r1 = cache_insert(cache, e1, "p1");
  CHECK(r1.appended);
  CHECK(cache.entries.size() == 1);

  // same execution wrapped in a longer equivalent program: rejected
  ExprPtr longer = make_boolean(BoolOp::Union, prim, prim);
  CacheEntry e2 = make_cache_entry(longer, cache.res);
  REQUIRE(e2.bits.hamming(cache.entries[0].bits) < cache.dedup_threshold);
  InsertReport r2 = cache_insert(cache, e2, "p2");
  CHECK(!r2.appended);
  CHECK(cache.entries.size() == 1);
  REQUIRE(r2.rejections.size() == 1);
  CHECK(r2.rejections[0].preferred_id == cache.entries[0].id);
  CHECK(structural_equal(*r2.rejections[0].original, *longer));
  // origins merged into the surviving entry
  CHECK(cache.entries[0].origin_ids.size() == 2);

  // an equivalent shorter program displaces a longer entry
  SubexprCache cache2 = SubexprCache::make(Dim::TwoD);
  cache_insert(cache2, make_cache_entry(longer, cache2.res), "p2");
  REQUIRE(cache2.entries[0].length == e2.length);
  InsertReport r3 = cache_insert(cache2, make_cache_entry(prim, cache2.res), "p1");
  CHECK(r3.appended);
  CHECK(cache2.entries.size() == 1);
  CHECK(cache2.entries[0].length == e1.length);
  REQUIRE(r3.rejections.size() == 1);
  CHECK(structural_equal(*r3.rejections[0].original, *longer));
  CHECK(r3.rejections[0].preferred_id == cache2.entries[0].id);
}

TEST_CASE("cache separation and capacity hold under random inserts") {
  Rng rng(419);
  SubexprCache cache = SubexprCache::make(Dim::TwoD, 40);
  for (int t = 0; t < 300; ++t) {
    ExprPtr e = nonempty_sample(rng, Dim::TwoD, 1 + int(rng.below(2)));
    try {
      cache_insert(cache, make_cache_entry(e, cache.res), "p" + std::to_string(t));
    } catch (const std::runtime_error&) {
      continue;
    }
    CHECK(int(cache.entries.size()) <= cache.capacity);
  }
  for (size_t i = 0; i < cache.entries.size(); ++i)
    for (size_t j = i + 1; j < cache.entries.size(); ++j)
      REQUIRE(cache.entries[i].bits.hamming(cache.entries[j].bits) >= cache.dedup_threshold);
}

TEST_CASE("cache round-trips through its file format") {
  Rng rng(421);
  SubexprCache cache = SubexprCache::make(Dim::TwoD);
  for (int t = 0; t < 10; ++t) {
    ExprPtr e = nonempty_sample(rng, Dim::TwoD, 1);
    try {
      cache_insert(cache, make_cache_entry(e, cache.res), "p" + std::to_string(t));
    } catch (const std::runtime_error&) {
    }
  }
  save_cache("/tmp/coref_test_cache.txt", cache);
  SubexprCache back = load_cache("/tmp/coref_test_cache.txt");
  REQUIRE(back.entries.size() == cache.entries.size());
  CHECK(back.dedup_threshold == cache.dedup_threshold);
  CHECK(back.next_id == cache.next_id);
  CHECK(back.rng_state == cache.rng_state);
  for (size_t i = 0; i < cache.entries.size(); ++i) {
    CHECK(back.entries[i].id == cache.entries[i].id);
    CHECK(back.entries[i].bits == cache.entries[i].bits);
    CHECK(back.entries[i].length == cache.entries[i].length);
    CHECK(back.entries[i].origin_ids == cache.entries[i].origin_ids);
    CHECK(structural_equal(*back.entries[i].canon.expr, *cache.entries[i].canon.expr));
    CHECK(structural_equal(*back.entries[i].original, *cache.entries[i].original));
  }
}

TEST_CASE("boolean inversion edge cases") {
  Rng rng(431);
  OccupancyGrid T = random_grid(rng, Dim::TwoD);
  OccupancyGrid empty(Dim::TwoD, {64, 64, 1});
  MaskedGrid in = full_target(T);

  // union with empty sibling: everything stays determined
  MaskedGrid u = invert_bool(BoolOp::Union, in, empty, true);
  CHECK(u.target == T);
  CHECK(u.valid.count() == u.valid.cell_count());

  // union with sibling equal to the target: occupied cells unconstrained
  MaskedGrid u2 = invert_bool(BoolOp::Union, in, T, true);
  CHECK(u2.valid == grid_not(T));
}

TEST_CASE("inversion soundness on consistent triples, all four cases") {
  Rng rng(433);
  for (int t = 0; t < 50; ++t) {
    Dim dim = t % 2 ? Dim::ThreeD : Dim::TwoD;
    OccupancyGrid A = random_grid(rng, dim);
    OccupancyGrid B = random_grid(rng, dim);
    for (BoolOp op : {BoolOp::Union, BoolOp::Intersect, BoolOp::Subtract}) {
      OccupancyGrid T = apply_bool_op(op, A, B);
      MaskedGrid invA = invert_bool(op, full_target(T), B, true);
      CHECK(grid_and(grid_xor(invA.target, A), invA.valid).count() == 0);
      MaskedGrid invB = invert_bool(op, full_target(T), A, false);
      CHECK(grid_and(grid_xor(invB.target, B), invB.valid).count() == 0);
    }
  }
}

TEST_CASE("subtract-left mask variants") {
  Rng rng(439);
  OccupancyGrid A = random_grid(rng, Dim::TwoD);
  OccupancyGrid B = random_grid(rng, Dim::TwoD);
  OccupancyGrid T = grid_andnot(A, B);
  MaskedGrid literal = invert_bool(BoolOp::Subtract, full_target(T), B, true, true);
  MaskedGrid full = invert_bool(BoolOp::Subtract, full_target(T), B, true, false);
  CHECK(literal.valid == grid_andnot(T, B));
  CHECK(full.valid == grid_not(B));
  // the wider mask is still sound
  CHECK(grid_and(grid_xor(full.target, A), full.valid).count() == 0);
  // and strictly wider whenever T misses some of not-B
  CHECK(full.valid.count() >= literal.valid.count());
}

TEST_CASE("transform inversion identity and round trips") {
  Rng rng(443);
  OccupancyGrid T = random_grid(rng, Dim::TwoD);
  MaskedGrid in = full_target(T);

  MaskedGrid same = invert_transform(TransformKind::Translate, {0.0, 0.0}, in);
  CHECK(same.target == T);
  CHECK(same.valid.count() == same.valid.cell_count());

  // cell-aligned translate then inverse-translate recovers in-domain cells
  double cell = 2.0 / 64;
  std::vector<double> v{4 * cell, -3 * cell};
  MaskedGrid fwd = invert_transform(TransformKind::Translate, v, in);
  MaskedGrid back = invert_transform(TransformKind::Translate, {-v[0], -v[1]}, fwd);
  for (int64_t i = 0; i < T.cell_count(); ++i)
    if (back.valid.get(i)) REQUIRE(back.target.get(i) == T.get(i));
  CHECK(back.valid.count() > 0);
}

TEST_CASE("inverting an enlarging scale invalidates cells mapping outside the domain") {
  Rng rng(449);
  OccupancyGrid T = random_grid(rng, Dim::TwoD);
  MaskedGrid in = full_target(T);
  MaskedGrid out = invert_transform(TransformKind::Scale, {2.0, 2.0}, in);
  for (int64_t i = 0; i < T.cell_count(); ++i) {
    auto c = T.cell_center(i);
    bool inside = std::abs(2 * c[0]) <= 1.0 && std::abs(2 * c[1]) <= 1.0;
    if (!inside) REQUIRE(!out.valid.get(i));
  }
  CHECK(out.valid.count() > 0);
  CHECK(out.valid.count() < out.valid.cell_count());
  // shrinking scale keeps every cell in-domain
  MaskedGrid out2 = invert_transform(TransformKind::Scale, {0.5, 0.5}, in);
  CHECK(out2.valid.count() == out2.valid.cell_count());
}

TEST_CASE("transform inversion consistency through execution") {
  // T = exec(transform(A)) implies A matches the inverted target on valid cells
  Rng rng(451);
  for (int t = 0; t < 10; ++t) {
    ExprPtr core = nonempty_sample(rng, Dim::TwoD, 1, 5);
    std::vector<double> shift{rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)};
    ExprPtr moved = make_transform(TransformKind::Translate, shift, core);
    OccupancyGrid T = execute_hard(*moved);
    OccupancyGrid A = execute_hard(*core);
    MaskedGrid inv = invert_transform(TransformKind::Translate, shift, full_target(T));
    // nearest-neighbor resampling is exact up to one cell along shape edges
    int64_t bad = grid_and(grid_xor(inv.target, A), inv.valid).count();
    CHECK(double(bad) / double(T.cell_count()) < 0.02);
  }
}

TEST_CASE("desired execution at the root and one level down") {
  Rng rng(457);
  ExprPtr a = parse_program("rectangle(-0.3,0,-0.2,0.3,0)", Dim::TwoD);
  ExprPtr b = parse_program("ellipse(0.4,0,-0.3,0.3,0)", Dim::TwoD);
  ExprPtr z = make_boolean(BoolOp::Union, a, b);
  OccupancyGrid x = execute_hard(*z);
  ExecTree t = build_exec_tree(z, x.res());

  DesiredExecution root = desired_execution(t, {}, x);
  CHECK(root.g.target == x);
  CHECK(root.bbox.lo == x.index_box().lo);

  // child A of union(A, B) with B == x: mask is the complement of x (in bbox)
  ExprPtr z2 = make_boolean(BoolOp::Union, a, z);
  OccupancyGrid x2 = execute_hard(*z2);
  REQUIRE(execute_hard(*z) == x2);
  ExecTree t2 = build_exec_tree(z2, x2.res());
  DesiredExecution d = desired_execution(t2, {0}, x2);
  OccupancyGrid expect = grid_not(x2);
  for (int64_t i = 0; i < x2.cell_count(); ++i)
    if (d.g.valid.get(i)) REQUIRE(expect.get(i));

  // two-level nesting equals composed single-step inversions
  ExprPtr z3 = make_boolean(BoolOp::Subtract, make_boolean(BoolOp::Union, a, b), b);
  OccupancyGrid x3 = execute_hard(*z3);
  ExecTree t3 = build_exec_tree(z3, x3.res());
  DesiredExecution two = desired_execution(t3, {0, 0}, x3);
  MaskedGrid step1 =
      invert_bool(BoolOp::Subtract, full_target(x3), execute_hard(*b, x3.res()), true);
  MaskedGrid step2 = invert_bool(BoolOp::Union, step1, execute_hard(*b, x3.res()), true);
  // compare before cropping: restrict the composed mask to the node bbox
  ExecTree ta = build_exec_tree(a, x3.res());
  auto bbox = ta.at(ta.root).grid.index_box();
  OccupancyGrid boxmask(x3.dim(), x3.res());
  for (int yc = bbox.lo[1]; yc <= bbox.hi[1]; ++yc)
    for (int xc = bbox.lo[0]; xc <= bbox.hi[0]; ++xc)
      boxmask.set(boxmask.index(xc, yc), true);
  CHECK(two.g.valid == grid_and(step2.valid, boxmask));
  CHECK(grid_and(grid_xor(two.g.target, step2.target), two.g.valid).count() == 0);
}

TEST_CASE("knn query matches the per-cell oracle and breaks ties by length") {
  Rng rng(461);
  SubexprCache cache = SubexprCache::make(Dim::TwoD);
  for (int t = 0; t < 30; ++t) {
    ExprPtr e = nonempty_sample(rng, Dim::TwoD, 1 + int(rng.below(2)));
    try {
      cache_insert(cache, make_cache_entry(e, cache.res), "p" + std::to_string(t));
    } catch (const std::runtime_error&) {
    }
  }
  REQUIRE(cache.entries.size() >= 5);

  ExprPtr z = nonempty_sample(rng, Dim::TwoD, 2, 10);
  OccupancyGrid x = execute_hard(*z);
  ExecTree t = build_exec_tree(z, x.res());
  DesiredExecution d = desired_execution(t, {}, x);
  auto hits = knn_query(cache, d, int(cache.entries.size()));
  REQUIRE(hits.size() == cache.entries.size());
  for (const auto& hit : hits)
    REQUIRE(hit.score == knn_score_oracle(cache, cache.entries[size_t(hit.entry_index)], d));
  for (size_t i = 1; i < hits.size(); ++i) CHECK(hits[i - 1].score <= hits[i].score);

  // a desired execution already in the canonical frame finds its own entry
  // with score exactly zero at rank 1
  {
    DesiredExecution dm;
    dm.g.target = cache.entries[2].bits;
    dm.g.valid = grid_not(OccupancyGrid(Dim::TwoD, cache.res));
    dm.bbox = dm.g.target.index_box();
    dm.frame.center = {0, 0, 0};
    dm.frame.extent = {kCanonicalExtent, kCanonicalExtent, 0};
    auto top = knn_query(cache, dm, 1);
    REQUIRE(top.size() == 1);
    CHECK(top[0].score == 0);
    CHECK(top[0].entry_index == 2);
  }

  // an all-invalid mask scores everything zero; shorter entries rank first
  DesiredExecution blank = d;
  blank.g.valid = OccupancyGrid(Dim::TwoD, {64, 64, 1});
  auto zeros = knn_query(cache, blank, int(cache.entries.size()));
  for (const auto& hit : zeros) CHECK(hit.score == 0);
  for (size_t i = 1; i < zeros.size(); ++i)
    CHECK(cache.entries[size_t(zeros[i - 1].entry_index)].length <=
          cache.entries[size_t(zeros[i].entry_index)].length);

  SubexprCache empty_cache = SubexprCache::make(Dim::TwoD);
  CHECK_THROWS(knn_query(empty_cache, d, 3));
}

TEST_CASE("refit places an entry into a target frame") {
  Rng rng(463);
  ExprPtr e = nonempty_sample(rng, Dim::TwoD, 1, 20);
  SubexprCache cache = SubexprCache::make(Dim::TwoD);
  CacheEntry entry = make_cache_entry(e, cache.res);
  Frame target;
  target.center = {0.25, -0.3, 0};
  target.extent = {0.5, 0.4, 0};
  ExprPtr fitted = refit_entry(entry, target);
  CHECK(program_length(*fitted) == entry.length);
  OccupancyGrid exec = execute_hard(*fitted, cache.res);
  auto box = exec.bounding_box();
  REQUIRE(!box.empty);
  CHECK(box.center()[0] == doctest::Approx(0.25).epsilon(0.15));
  CHECK(box.center()[1] == doctest::Approx(-0.3).epsilon(0.15));
  CHECK(box.extent()[0] == doctest::Approx(0.5).epsilon(0.2));
  CHECK(box.extent()[1] == doctest::Approx(0.4).epsilon(0.2));
}

TEST_CASE("rewrite_cg grafts a missing part through the empty slot") {
  Rng rng(467);
  ObjectiveConfig cfg = iou_cfg();
  int succeeded = 0;
  for (int t = 0; t < 10 && succeeded < 3; ++t) {
    ExprPtr have = nonempty_sample(rng, Dim::TwoD, 1, 30);
    ExprPtr missing = nonempty_sample(rng, Dim::TwoD, 1, 30);
    OccupancyGrid x = grid_or(execute_hard(*have), execute_hard(*missing));
    if (grid_and(execute_hard(*have), execute_hard(*missing)).count() > 0) continue;
    SubexprCache cache = SubexprCache::make(Dim::TwoD);
    cache_insert(cache, make_cache_entry(missing, cache.res), "m");
    auto out = rewrite_cg(x, have, cache, cfg);
    if (!out) continue;
    ++succeeded;
    CHECK(objective(x, **out, cfg).objective > objective(x, *have, cfg).objective);
    CHECK(iou(x, execute_hard(**out)) > iou(x, execute_hard(*have)));
  }
  CHECK(succeeded >= 3);
}

TEST_CASE("rewrite_cg returns nothing on an unhelpful or empty cache") {
  Rng rng(479);
  ExprPtr z = nonempty_sample(rng, Dim::TwoD, 1, 20);
  OccupancyGrid x = execute_hard(*z);
  SubexprCache empty_cache = SubexprCache::make(Dim::TwoD);
  CHECK(!rewrite_cg(x, z, empty_cache, iou_cfg()));
}

TEST_CASE("rewrite_cg replaces a wrong branch when the right part is cached") {
  Rng rng(487);
  ObjectiveConfig cfg = iou_cfg();
  int succeeded = 0;
  for (int t = 0; t < 12 && succeeded < 3; ++t) {
    ExprPtr good = nonempty_sample(rng, Dim::TwoD, 1, 40);
    ExprPtr part = nonempty_sample(rng, Dim::TwoD, 1, 40);
    ExprPtr wrong = nonempty_sample(rng, Dim::TwoD, 1, 40);
    OccupancyGrid x = grid_or(execute_hard(*good), execute_hard(*part));
    ExprPtr z = make_boolean(BoolOp::Union, good, wrong);
    SubexprCache cache = SubexprCache::make(Dim::TwoD);
    cache_insert(cache, make_cache_entry(part, cache.res), "part");
    auto out = rewrite_cg(x, z, cache, cfg);
    if (!out) continue;
    ++succeeded;
    CHECK(objective(x, **out, cfg).objective > objective(x, *z, cfg).objective);
  }
  CHECK(succeeded >= 3);
}

TEST_CASE("shorten rewrite swaps rejected occurrences for preferred entries") {
  Rng rng(491);
  ObjectiveConfig cfg = iou_cfg();
  int exercised = 0;
  for (int t = 0; t < 20 && exercised < 3; ++t) {
    ExprPtr prim = nonempty_sample(rng, Dim::TwoD, 0, 25);
    // same execution as prim but five nodes; the canonical replacement costs
    // three (entry core plus its translate/scale pair), so length drops
    ExprPtr bloated =
        make_boolean(BoolOp::Union, make_boolean(BoolOp::Union, prim, prim), prim);
    ExprPtr rest = nonempty_sample(rng, Dim::TwoD, 0, 25);
    ExprPtr program = make_boolean(BoolOp::Union, bloated, rest);
    OccupancyGrid x = execute_hard(*program);

    SubexprCache cache = SubexprCache::make(Dim::TwoD);
    cache_insert(cache, make_cache_entry(prim, cache.res), "other");
    CacheEntry dup = make_cache_entry(bloated, cache.res);
    if (dup.bits.hamming(cache.entries[0].bits) >= cache.dedup_threshold) continue;
    InsertReport rep = cache_insert(cache, dup, "prog1");
    REQUIRE(rep.rejections.size() == 1);

    std::vector<ShortenCandidate> programs{{"prog1", program, &x}};
    auto rewritten = shorten_rewrite(programs, rep.rejections, cache, cfg);
    if (rewritten.empty()) continue;
    ++exercised;
    CHECK(rewritten[0].first == "prog1");
    CHECK(program_length(*rewritten[0].second) < program_length(*program));
    CHECK(objective(x, *rewritten[0].second, cfg).objective >=
          objective(x, *program, cfg).objective);
  }
  CHECK(exercised >= 3);
}
