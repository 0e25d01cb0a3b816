#include "coref/ttr.hpp"

#include <chrono>
#include <map>
#include <set>

#include "coref/prune.hpp"

namespace coref {

const char* rewriter_name(RewriterKind r) {
  switch (r) {
    case RewriterKind::PO: return "po";
    case RewriterKind::CP: return "cp";
    case RewriterKind::CG: return "cg";
  }
  return "?";
}

namespace {
struct PoolEntry {
  ExprPtr program;
  Score score;
};
}  // namespace

TTRResult ttr_run(const OccupancyGrid& x, const ExprPtr& z, const SubexprCache& cache,
                  const TTRConfig& cfg) {
  TTRResult out;
  // Program identity is the hash of the canonical printed text; collisions
  // are treated as equality.
  std::map<uint64_t, PoolEntry> pool;
  std::map<RewriterKind, std::set<uint64_t>> attempted;

  ExprPtr best = z;
  Score best_score = objective(x, *z, cfg.obj);
  pool[fingerprint(*z)] = {z, best_score};

  auto next_input = [&](RewriterKind rw) -> const PoolEntry* {
    uint64_t best_fp = fingerprint(*best);
    const auto& tried = attempted[rw];
    if (!tried.count(best_fp)) return &pool[best_fp];
    const PoolEntry* fallback = nullptr;
    for (const auto& [fp, e] : pool) {
      if (tried.count(fp)) continue;
      if (!fallback || e.score.objective > fallback->score.objective) fallback = &e;
    }
    return fallback;  // null: this rewriter exhausted the pool
  };

  for (int round = 0; round < cfg.k; ++round) {
    for (RewriterKind rw : cfg.order) {
      const PoolEntry* input = next_input(rw);
      if (!input) continue;
      ExprPtr in_prog = input->program;
      uint64_t in_fp = fingerprint(*in_prog);
      attempted[rw].insert(in_fp);

      auto t0 = std::chrono::steady_clock::now();
      ExprPtr result;
      switch (rw) {
        case RewriterKind::PO: {
          auto r = rewrite_po(x, in_prog, cfg.po, cfg.obj);
          if (r) result = *r;
          break;
        }
        case RewriterKind::CP: {
          auto r = rewrite_cp(x, in_prog, cfg.obj, cfg.cp_tolerance);
          if (r) result = *r;
          break;
        }
        case RewriterKind::CG: {
          auto r = rewrite_cg(x, in_prog, cache, cfg.obj, cfg.cg_k, cfg.cg_max_repl);
          if (r) result = *r;
          break;
        }
      }
      auto t1 = std::chrono::steady_clock::now();

      TTRStep step;
      step.rw = rw;
      step.input_fp = in_fp;
      step.obj_before = best_score.objective;
      step.millis = std::chrono::duration<double, std::milli>(t1 - t0).count();
      if (result) {
        Score s = objective(x, *result, cfg.obj);
        pool[fingerprint(*result)] = {result, s};
        if (s.objective > best_score.objective) {
          best = result;
          best_score = s;
          step.accepted = true;
        }
      }
      step.obj_after = best_score.objective;
      out.trace.push_back(step);
    }
  }

  out.program = best;
  out.score = best_score;
  return out;
}

}  // namespace coref
