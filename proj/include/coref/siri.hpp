#pragma once

#include <string>
#include <vector>

#include "coref/bp_store.hpp"
#include "coref/dataset.hpp"
#include "coref/graft.hpp"
#include "coref/objective.hpp"
#include "coref/po.hpp"
#include "coref/proposal.hpp"

namespace coref {

enum class Mode { PLAD, PPlusR, SIRI };

const char* mode_name(Mode m);

struct LoopConfig {
  Mode mode = Mode::SIRI;
  int beam = 10;
  double frac_po = 0.5;
  double frac_cp = 0.5;
  double frac_cg = 0.15;
  int rounds = 5;
  uint64_t seed = 0;
  ObjectiveConfig obj;
  POConfig po;
  int cg_k = 8;
  int cg_max_repl = 4;
  int cp_tolerance = 0;
  int threads = 0;  // 0 = all cores; any value yields identical results
};

struct RoundStats {
  int round = 0;
  double val_mean_objective = 0;
  double val_mean_recon = 0;
  double val_mean_length = 0;
  int train_pairs = 0;
  double train_mean_objective = 0;
  int po_attempts = 0, po_accepts = 0;
  int cp_attempts = 0, cp_accepts = 0;
  int cg_attempts = 0, cg_accepts = 0;
  int shorten_accepts = 0;
  int purged = 0;
  int64_t cache_size = 0;
};

struct RunResult {
  std::vector<RoundStats> history;
  BPStore store;
  SubexprCache cache;
};

// One search pass: proposes `beam` candidates per shape, stores the
// O-argmax under the NS source and returns the per-shape selected programs
// (used for purging even when the store keeps an older, better entry).
std::vector<ExprPtr> search_phase(BPStore& store, const std::vector<Shape>& shapes,
                                  ProposalSource& src, const LoopConfig& cfg, int round);

// Mode-dependent rewrite pass; fills the rewriter fields of `stats`.
void rewrite_phase(BPStore& store, const std::vector<Shape>& shapes, SubexprCache& cache,
                   const LoopConfig& cfg, int round, RoundStats& stats);

// Full loop: per round search -> rewrite -> purge -> train -> validate.
RunResult run_loop(const std::vector<Shape>& train, const std::vector<Shape>& val,
                   const LoopConfig& cfg, ProposalSource& src);

std::string history_csv(const std::vector<RoundStats>& history);

}  // namespace coref
