#pragma once

#include <cstdint>
#include <vector>

#include "coref/ast.hpp"
#include "coref/graft.hpp"
#include "coref/grid.hpp"
#include "coref/objective.hpp"
#include "coref/po.hpp"

namespace coref {

enum class RewriterKind { PO, CP, CG };

const char* rewriter_name(RewriterKind r);

struct TTRConfig {
  int k = 3;  // interleaved rounds
  std::vector<RewriterKind> order{RewriterKind::PO, RewriterKind::CP, RewriterKind::CG};
  ObjectiveConfig obj;
  POConfig po;
  int cg_k = 8;
  int cg_max_repl = 4;
  int cp_tolerance = 0;
};

struct TTRStep {
  RewriterKind rw;
  uint64_t input_fp = 0;
  bool accepted = false;     // replaced the running best
  double obj_before = 0;     // objective of the running best before the step
  double obj_after = 0;
  double millis = 0;
};

struct TTRResult {
  ExprPtr program;
  Score score;
  std::vector<TTRStep> trace;
};

// Greedy interleaved rewriting: for k rounds each rewriter in order receives
// the running best program, or, when it has already attempted it, the best
// pool program it has not attempted; improvements replace the running best.
// The result never scores below the input. cache may be empty, in which case
// CG attempts are no-ops.
TTRResult ttr_run(const OccupancyGrid& x, const ExprPtr& z, const SubexprCache& cache,
                  const TTRConfig& cfg);

}  // namespace coref
