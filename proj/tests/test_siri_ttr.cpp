#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "coref/diff.hpp"
#include "coref/executor.hpp"
#include "coref/siri.hpp"
#include "coref/ttr.hpp"

using namespace coref;

namespace {

std::vector<Shape> make_shapes(uint64_t seed, int n, Dim dim = Dim::TwoD) {
  std::vector<Shape> out;
  Rng rng(seed);
  const int64_t cells = OccupancyGrid::zeros(dim).cell_count();
  for (int i = 0; i < n; ++i) {
    for (;;) {
      ExprPtr z = sample_program(rng, dim, 2);
      OccupancyGrid g = execute_hard(*z);
      if (g.count() >= cells / 100 && g.count() <= cells * 95 / 100) {
        out.push_back({"s" + std::to_string(i), std::move(g)});
        break;
      }
    }
  }
  return out;
}

LoopConfig small_cfg(Mode mode, uint64_t seed) {
  LoopConfig cfg;
  cfg.mode = mode;
  cfg.rounds = 3;
  cfg.beam = 6;
  cfg.seed = seed;
  cfg.obj.recon = ReconMetric::IoU;
  cfg.po.steps = 40;  // small steps keep the unit suite fast
  cfg.threads = 1;
  return cfg;
}

}  // namespace

TEST_CASE("search phase stores the beam argmax and returns search programs") {
  auto shapes = make_shapes(601, 4);
  LoopConfig cfg = small_cfg(Mode::PLAD, 11);
  RandomSampler src(Dim::TwoD, 2, 11);
  BPStore store(cfg.obj);
  auto searched = search_phase(store, shapes, src, cfg, 1);
  REQUIRE(searched.size() == shapes.size());
  for (size_t i = 0; i < shapes.size(); ++i) {
    const BPEntry* e = store.find(shapes[i].id, Source::NS);
    REQUIRE(e != nullptr);
    CHECK(structural_equal(*e->program, *searched[i]));
  }
  // a later worse search round leaves the store alone but still reports
  auto searched2 = search_phase(store, shapes, src, cfg, 2);
  for (size_t i = 0; i < shapes.size(); ++i) {
    const BPEntry* e = store.find(shapes[i].id, Source::NS);
    double o_store = e->score.objective;
    double o_search = objective(shapes[i].grid, *searched2[i], cfg.obj).objective;
    CHECK(o_store >= o_search - 1e-12);
  }
}

TEST_CASE("rewrite budgets per mode") {
  auto shapes = make_shapes(607, 7);
  const int n = int(shapes.size());

  for (Mode mode : {Mode::PLAD, Mode::PPlusR, Mode::SIRI}) {
    LoopConfig cfg = small_cfg(mode, 23);
    RandomSampler src(Dim::TwoD, 2, 23);
    BPStore store(cfg.obj);
    SubexprCache cache = SubexprCache::make(Dim::TwoD);
    search_phase(store, shapes, src, cfg, 1);
    RoundStats stats;
    rewrite_phase(store, shapes, cache, cfg, 1, stats);
    int attempts = stats.po_attempts + stats.cp_attempts + stats.cg_attempts;
    if (mode == Mode::PLAD) CHECK(attempts == 0);
    if (mode == Mode::PPlusR) CHECK(attempts == 3 * n);
    if (mode == Mode::SIRI) {
      CHECK(stats.po_attempts == int(std::ceil(0.5 * n)));
      CHECK(stats.cp_attempts == int(std::ceil(0.5 * n)));
      CHECK(stats.cg_attempts == int(std::ceil(0.15 * n)));
    }
  }
}

TEST_CASE("SIRI rewrites never touch NS entries; P+R may") {
  auto shapes = make_shapes(613, 6);
  LoopConfig cfg = small_cfg(Mode::SIRI, 31);
  RandomSampler src(Dim::TwoD, 2, 31);
  BPStore store(cfg.obj);
  SubexprCache cache = SubexprCache::make(Dim::TwoD);
  search_phase(store, shapes, src, cfg, 1);
  std::vector<std::string> ns_before;
  for (const auto& s : shapes) ns_before.push_back(print_program(*store.find(s.id, Source::NS)->program));
  RoundStats stats;
  rewrite_phase(store, shapes, cache, cfg, 1, stats);
  for (size_t i = 0; i < shapes.size(); ++i)
    CHECK(print_program(*store.find(shapes[i].id, Source::NS)->program) == ns_before[i]);
}

TEST_CASE("per-shape best objective is monotone across rounds in all modes") {
  auto shapes = make_shapes(617, 5);
  for (Mode mode : {Mode::PLAD, Mode::PPlusR, Mode::SIRI}) {
    LoopConfig cfg = small_cfg(mode, 41);
    MemorizingRetriever src(Dim::TwoD, 2, 41);
    BPStore store(cfg.obj);
    SubexprCache cache = SubexprCache::make(Dim::TwoD);
    std::map<std::string, double> best;
    for (int round = 1; round <= cfg.rounds; ++round) {
      auto searched = search_phase(store, shapes, src, cfg, round);
      RoundStats stats;
      rewrite_phase(store, shapes, cache, cfg, round, stats);
      for (size_t i = 0; i < shapes.size(); ++i)
        store.purge_stale(shapes[i].id, searched[i], shapes[i].grid);
      for (const auto& s : shapes) {
        const BPEntry* e = store.best_entry(s.id);
        REQUIRE(e != nullptr);
        auto it = best.find(s.id);
        if (it != best.end()) CHECK(e->score.objective >= it->second - 1e-12);
        best[s.id] = e->score.objective;
      }
      std::vector<std::pair<const OccupancyGrid*, ExprPtr>> pairs;
      for (auto& [id, prog] : store.training_set(mode != Mode::SIRI))
        for (const auto& s : shapes)
          if (s.id == id) pairs.emplace_back(&s.grid, prog);
      src.train(pairs);
    }
  }
}

TEST_CASE("purge removes exactly the dominated rewrite entries") {
  auto shapes = make_shapes(619, 5);
  LoopConfig cfg = small_cfg(Mode::SIRI, 43);
  RandomSampler src(Dim::TwoD, 2, 43);
  BPStore store(cfg.obj);
  SubexprCache cache = SubexprCache::make(Dim::TwoD);
  for (int round = 1; round <= 2; ++round) {
    auto searched = search_phase(store, shapes, src, cfg, round);
    RoundStats stats;
    rewrite_phase(store, shapes, cache, cfg, round, stats);
    for (size_t i = 0; i < shapes.size(); ++i) {
      double o_search = objective(shapes[i].grid, *searched[i], cfg.obj).objective;
      std::set<std::pair<std::string, int>> expect;
      for (const BPEntry* e : store.all_entries())
        if (e->shape_id == shapes[i].id && e->source != Source::NS &&
            e->score.objective < o_search)
          expect.insert({e->shape_id, int(e->source)});
      int removed = store.purge_stale(shapes[i].id, searched[i], shapes[i].grid);
      CHECK(removed == int(expect.size()));
      for (const auto& key : expect)
        CHECK(store.find(key.first, Source(key.second)) == nullptr);
    }
  }
}

TEST_CASE("run_loop is deterministic and thread-count independent") {
  auto train = make_shapes(631, 5);
  auto val = make_shapes(632, 3);
  LoopConfig cfg = small_cfg(Mode::SIRI, 77);
  cfg.rounds = 2;

  MemorizingRetriever s1(Dim::TwoD, 2, 77);
  RunResult r1 = run_loop(train, val, cfg, s1);
  MemorizingRetriever s2(Dim::TwoD, 2, 77);
  RunResult r2 = run_loop(train, val, cfg, s2);
  CHECK(history_csv(r1.history) == history_csv(r2.history));

  cfg.threads = 3;
  MemorizingRetriever s3(Dim::TwoD, 2, 77);
  RunResult r3 = run_loop(train, val, cfg, s3);
  CHECK(history_csv(r1.history) == history_csv(r3.history));

  // identical final stores as well
  auto e1 = r1.store.all_entries();
  auto e3 = r3.store.all_entries();
  REQUIRE(e1.size() == e3.size());
  for (size_t i = 0; i < e1.size(); ++i)
    CHECK(print_program(*e1[i]->program) == print_program(*e3[i]->program));
}

TEST_CASE("history csv is well-formed") {
  auto train = make_shapes(641, 3);
  LoopConfig cfg = small_cfg(Mode::PLAD, 5);
  cfg.rounds = 2;
  RandomSampler src(Dim::TwoD, 2, 5);
  RunResult r = run_loop(train, {}, cfg, src);
  std::string csv = history_csv(r.history);
  CHECK(csv.find("round,val_mean_objective") == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + 2 rounds
}

// ---------------------------------------------------------------------------

TEST_CASE("ttr never decreases the objective and tracks the trace") {
  auto shapes = make_shapes(643, 4);
  TTRConfig cfg;
  cfg.obj.recon = ReconMetric::IoU;
  cfg.po.steps = 40;
  SubexprCache cache = SubexprCache::make(Dim::TwoD);
  Rng rng(643);
  for (const auto& s : shapes) {
    ExprPtr z = sample_program(rng, Dim::TwoD, 2);
    double before = objective(s.grid, *z, cfg.obj).objective;
    TTRResult r = ttr_run(s.grid, z, cache, cfg);
    CHECK(r.score.objective >= before);
    CHECK(r.trace.size() <= size_t(cfg.k * 3));
    double prev = before;
    for (const auto& step : r.trace) {
      CHECK(step.obj_after >= step.obj_before);
      CHECK(step.obj_before == doctest::Approx(prev));
      prev = step.obj_after;
    }
    CHECK(r.score.objective == doctest::Approx(prev));
  }
}

TEST_CASE("ttr improves a coarse self-reconstruction") {
  Rng rng(647);
  ExprPtr truth = sample_program(rng, Dim::TwoD, 2);
  OccupancyGrid x = execute_hard(*truth);
  while (x.count() < 100) {
    truth = sample_program(rng, Dim::TwoD, 2);
    x = execute_hard(*truth);
  }
  Eigen::VectorXd phi = extract_params(*truth);
  for (int j = 0; j < phi.size(); ++j)
    phi[j] = std::clamp(phi[j] + rng.uniform(-0.08, 0.08), -0.99, 0.99);
  ExprPtr z = inject_params(*truth, phi);
  TTRConfig cfg;
  cfg.obj.recon = ReconMetric::IoU;
  SubexprCache cache = SubexprCache::make(Dim::TwoD);
  TTRResult r = ttr_run(x, z, cache, cfg);
  CHECK(r.score.objective > objective(x, *z, cfg.obj).objective);
}

TEST_CASE("a rewriter is never handed a fingerprint it already attempted") {
  auto shapes = make_shapes(653, 3);
  TTRConfig cfg;
  cfg.obj.recon = ReconMetric::IoU;
  cfg.po.steps = 30;
  cfg.k = 4;
  SubexprCache cache = SubexprCache::make(Dim::TwoD);
  Rng rng(653);
  for (const auto& s : shapes) {
    ExprPtr z = sample_program(rng, Dim::TwoD, 2);
    TTRResult r = ttr_run(s.grid, z, cache, cfg);
    std::map<RewriterKind, std::set<uint64_t>> seen;
    for (const auto& step : r.trace) {
      CHECK(!seen[step.rw].count(step.input_fp));
      seen[step.rw].insert(step.input_fp);
    }
  }
}

TEST_CASE("three rounds dominate one round") {
  auto shapes = make_shapes(659, 4);
  SubexprCache cache = SubexprCache::make(Dim::TwoD);
  Rng rng(659);
  for (const auto& s : shapes) {
    ExprPtr z = sample_program(rng, Dim::TwoD, 2);
    TTRConfig c1;
    c1.obj.recon = ReconMetric::IoU;
    c1.po.steps = 40;
    c1.k = 1;
    TTRConfig c3 = c1;
    c3.k = 3;
    TTRResult r1 = ttr_run(s.grid, z, cache, c1);
    TTRResult r3 = ttr_run(s.grid, z, cache, c3);
    CHECK(r3.score.objective >= r1.score.objective - 1e-12);
  }
}

TEST_CASE("single-rewriter order gives a single-row trace per round") {
  auto shapes = make_shapes(661, 1);
  TTRConfig cfg;
  cfg.obj.recon = ReconMetric::IoU;
  cfg.k = 1;
  cfg.po.steps = 20;
  cfg.order = {RewriterKind::PO};
  SubexprCache cache = SubexprCache::make(Dim::TwoD);
  Rng rng(661);
  ExprPtr z = sample_program(rng, Dim::TwoD, 1);
  TTRResult r = ttr_run(shapes[0].grid, z, cache, cfg);
  CHECK(r.trace.size() == 1);
}
