#include "coref/siri.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "coref/executor.hpp"
#include "coref/parallel.hpp"
#include "coref/prune.hpp"

namespace coref {

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::PLAD: return "plad";
    case Mode::PPlusR: return "p+r";
    case Mode::SIRI: return "siri";
  }
  return "?";
}

namespace {

// Proposals are drawn sequentially (per-shape draw counters stay in shape
// order even with duplicate grids); scoring is what parallelizes.
std::vector<ExprPtr> best_of_beam(const std::vector<Shape>& shapes, ProposalSource& src,
                                  const LoopConfig& cfg, std::vector<Score>* scores_out) {
  const size_t n = shapes.size();
  std::vector<std::vector<ExprPtr>> proposals(n);
  for (size_t i = 0; i < n; ++i) {
    proposals[i] = src.propose(shapes[i].grid, cfg.beam);
    if (proposals[i].empty()) throw std::runtime_error("proposal source returned no programs");
  }
  std::vector<ExprPtr> best(n);
  std::vector<Score> best_scores(n);
  parallel_for(int64_t(n), cfg.threads, [&](int64_t i) {
    const auto& cands = proposals[size_t(i)];
    int arg = 0;
    Score top;
    for (size_t c = 0; c < cands.size(); ++c) {
      Score s = objective(shapes[size_t(i)].grid, *cands[c], cfg.obj);
      if (c == 0 || s.objective > top.objective) {
        top = s;
        arg = int(c);
      }
    }
    best[size_t(i)] = cands[size_t(arg)];
    best_scores[size_t(i)] = top;
  });
  if (scores_out) *scores_out = std::move(best_scores);
  return best;
}

std::string entry_origin_id(const BPEntry& e) {
  return e.shape_id + "#" + source_name(e.source);
}

const OccupancyGrid* shape_grid(const std::vector<Shape>& shapes, const std::string& id) {
  for (const auto& s : shapes)
    if (s.id == id) return &s.grid;
  return nullptr;
}

// Extract every nonempty sub-expression of current entries into the cache.
std::vector<CacheRejection> extract_into_cache(BPStore& store, SubexprCache& cache) {
  std::vector<CacheRejection> rejections;
  for (const BPEntry* e : store.all_entries()) {
    std::string origin = entry_origin_id(*e);
    for (const auto& sub : subexpressions(*e->program)) {
      ExprPtr owned(e->program, sub.expr);  // share the entry's ownership
      try {
        CacheEntry entry = make_cache_entry(owned, cache.res);
        InsertReport rep = cache_insert(cache, std::move(entry), origin);
        for (auto& r : rep.rejections) rejections.push_back(std::move(r));
      } catch (const EmptyExecutionError&) {
        // empty executions are not cacheable
      } catch (const std::runtime_error&) {
        // canonical fit failed (degenerate sliver); skip
      }
    }
  }
  return rejections;
}

}  // namespace

std::vector<ExprPtr> search_phase(BPStore& store, const std::vector<Shape>& shapes,
                                  ProposalSource& src, const LoopConfig& cfg, int round) {
  std::vector<ExprPtr> selected = best_of_beam(shapes, src, cfg, nullptr);
  for (size_t i = 0; i < shapes.size(); ++i)
    store.update(shapes[i].id, Source::NS, selected[i], shapes[i].grid, round);
  return selected;
}

void rewrite_phase(BPStore& store, const std::vector<Shape>& shapes, SubexprCache& cache,
                   const LoopConfig& cfg, int round, RoundStats& stats) {
  if (cfg.mode == Mode::PLAD) return;

  if (cfg.mode == Mode::PPlusR) {
    // Naive integration: every rewriter on every shape's single entry,
    // overwriting that entry whenever the objective improves. The single
    // queue has no separate shorten pass; extraction still feeds the cache
    // so grafting has material.
    extract_into_cache(store, cache);
    struct Item {
      size_t shape_idx;
      ExprPtr program;
    };
    std::vector<Item> items;
    for (size_t i = 0; i < shapes.size(); ++i) {
      const BPEntry* e = store.find(shapes[i].id, Source::NS);
      if (e) items.push_back({i, e->program});
    }
    std::vector<ExprPtr> results(items.size());
    std::vector<std::array<bool, 3>> accepted(items.size());
    const SubexprCache& snapshot = cache;
    parallel_for(int64_t(items.size()), cfg.threads, [&](int64_t ii) {
      const auto& item = items[size_t(ii)];
      const OccupancyGrid& x = shapes[item.shape_idx].grid;
      ExprPtr cur = item.program;
      std::array<bool, 3> ok{false, false, false};
      if (auto z = rewrite_po(x, cur, cfg.po, cfg.obj)) {
        cur = *z;
        ok[0] = true;
      }
      if (auto z = rewrite_cp(x, cur, cfg.obj, cfg.cp_tolerance)) {
        cur = *z;
        ok[1] = true;
      }
      if (auto z = rewrite_cg(x, cur, snapshot, cfg.obj, cfg.cg_k, cfg.cg_max_repl)) {
        cur = *z;
        ok[2] = true;
      }
      results[size_t(ii)] = cur;
      accepted[size_t(ii)] = ok;
    });
    for (size_t ii = 0; ii < items.size(); ++ii) {
      const auto& item = items[ii];
      stats.po_attempts++;
      stats.cp_attempts++;
      stats.cg_attempts++;
      stats.po_accepts += accepted[ii][0];
      stats.cp_accepts += accepted[ii][1];
      stats.cg_accepts += accepted[ii][2];
      if (results[ii] != item.program)
        store.update(shapes[item.shape_idx].id, Source::NS, results[ii],
                     shapes[item.shape_idx].grid, round);
    }
    stats.cache_size = int64_t(cache.entries.size());
    return;
  }

  // SIRI: sampled subsets, source-isolated writes. Inputs are snapshotted at
  // sampling time so later store updates cannot leak into a batch.
  Rng rng(mix_seed(cfg.seed, 0x52455752u, uint64_t(round)));
  BPStore::RewriteSample sample =
      store.sample_for_rewrite(cfg.frac_po, cfg.frac_cp, cfg.frac_cg, rng);
  struct Input {
    std::string shape_id;
    ExprPtr program;
    const OccupancyGrid* x;
  };
  auto snapshot_batch = [&](const std::vector<const BPEntry*>& batch) {
    std::vector<Input> out;
    out.reserve(batch.size());
    for (const BPEntry* e : batch)
      out.push_back({e->shape_id, e->program, shape_grid(shapes, e->shape_id)});
    return out;
  };
  std::vector<Input> po_in = snapshot_batch(sample.po);
  std::vector<Input> cp_in = snapshot_batch(sample.cp);
  std::vector<Input> cg_in = snapshot_batch(sample.cg);

  auto run_batch = [&](const std::vector<Input>& batch, Source src_tag, int& attempts,
                       int& accepts, auto&& apply) {
    std::vector<ExprPtr> outs(batch.size());
    parallel_for(int64_t(batch.size()), cfg.threads, [&](int64_t i) {
      const Input& in = batch[size_t(i)];
      if (in.x) outs[size_t(i)] = apply(*in.x, in.program);
    });
    attempts += int(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
      if (!outs[i]) continue;
      if (store.update(batch[i].shape_id, src_tag, outs[i], *batch[i].x, round)) accepts++;
    }
  };

  run_batch(po_in, Source::PO, stats.po_attempts, stats.po_accepts,
            [&](const OccupancyGrid& x, const ExprPtr& z) -> ExprPtr {
              auto r = rewrite_po(x, z, cfg.po, cfg.obj);
              return r ? *r : nullptr;
            });
  run_batch(cp_in, Source::CP, stats.cp_attempts, stats.cp_accepts,
            [&](const OccupancyGrid& x, const ExprPtr& z) -> ExprPtr {
              auto r = rewrite_cp(x, z, cfg.obj, cfg.cp_tolerance);
              return r ? *r : nullptr;
            });

  // CG: feed the cache from all current entries, then shorten programs whose
  // sub-expressions were displaced by shorter equivalents, then graft on the
  // sampled subset.
  std::vector<CacheRejection> rejections = extract_into_cache(store, cache);
  if (!rejections.empty()) {
    std::vector<ShortenCandidate> cands;
    for (const BPEntry* e : store.all_entries()) {
      const OccupancyGrid* x = shape_grid(shapes, e->shape_id);
      if (x) cands.push_back({entry_origin_id(*e), e->program, x});
    }
    for (const auto& [id, program] : shorten_rewrite(cands, rejections, cache, cfg.obj)) {
      std::string shape_id = id.substr(0, id.find('#'));
      const OccupancyGrid* x = shape_grid(shapes, shape_id);
      if (x && store.update(shape_id, Source::CG, program, *x, round)) stats.shorten_accepts++;
    }
  }
  const SubexprCache& snapshot = cache;
  run_batch(cg_in, Source::CG, stats.cg_attempts, stats.cg_accepts,
            [&](const OccupancyGrid& x, const ExprPtr& z) -> ExprPtr {
              auto r = rewrite_cg(x, z, snapshot, cfg.obj, cfg.cg_k, cfg.cg_max_repl);
              return r ? *r : nullptr;
            });
  stats.cache_size = int64_t(cache.entries.size());
}

RunResult run_loop(const std::vector<Shape>& train, const std::vector<Shape>& val,
                   const LoopConfig& cfg, ProposalSource& src) {
  RunResult out;
  out.store = BPStore(cfg.obj);
  out.cache = SubexprCache::make(train.empty() ? Dim::TwoD : train.front().grid.dim());

  for (int round = 1; round <= cfg.rounds; ++round) {
    RoundStats stats;
    stats.round = round;

    std::vector<ExprPtr> searched = search_phase(out.store, train, src, cfg, round);
    rewrite_phase(out.store, train, out.cache, cfg, round, stats);

    for (size_t i = 0; i < train.size(); ++i)
      stats.purged += out.store.purge_stale(train[i].id, searched[i], train[i].grid);

    const bool ns_only = cfg.mode != Mode::SIRI;
    auto pairs = out.store.training_set(ns_only);
    stats.train_pairs = int(pairs.size());
    {
      double sum = 0;
      int cnt = 0;
      for (const auto& [shape_id, program] : pairs) {
        for (int s = 0; s < 4; ++s) {
          const BPEntry* e = out.store.find(shape_id, Source(s));
          if (e && e->program == program) {
            sum += e->score.objective;
            ++cnt;
            break;
          }
        }
      }
      stats.train_mean_objective = cnt ? sum / cnt : 0;
    }
    std::vector<std::pair<const OccupancyGrid*, ExprPtr>> train_pairs;
    for (const auto& [shape_id, program] : pairs) {
      const OccupancyGrid* g = shape_grid(train, shape_id);
      if (g) train_pairs.emplace_back(g, program);
    }
    src.train(train_pairs);

    if (!val.empty()) {
      std::vector<Score> val_scores;
      best_of_beam(val, src, cfg, &val_scores);
      for (const Score& s : val_scores) {
        stats.val_mean_objective += s.objective;
        stats.val_mean_recon += s.recon;
        stats.val_mean_length += double(s.length);
      }
      stats.val_mean_objective /= double(val.size());
      stats.val_mean_recon /= double(val.size());
      stats.val_mean_length /= double(val.size());
    }

    out.history.push_back(stats);
  }
  return out;
}

std::string history_csv(const std::vector<RoundStats>& history) {
  std::ostringstream os;
  os << "round,val_mean_objective,val_mean_recon,val_mean_length,train_pairs,"
        "train_mean_objective,po_attempts,po_accepts,cp_attempts,cp_accepts,"
        "cg_attempts,cg_accepts,shorten_accepts,purged,cache_size\n";
  auto g = [](double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::string(buf);
  };
  for (const auto& s : history) {
    os << s.round << ',' << g(s.val_mean_objective) << ',' << g(s.val_mean_recon) << ','
       << g(s.val_mean_length) << ',' << s.train_pairs << ',' << g(s.train_mean_objective)
       << ',' << s.po_attempts << ',' << s.po_accepts << ',' << s.cp_attempts << ','
       << s.cp_accepts << ',' << s.cg_attempts << ',' << s.cg_accepts << ','
       << s.shorten_accepts << ',' << s.purged << ',' << s.cache_size << '\n';
  }
  return os.str();
}

}  // namespace coref
