#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "coref/ast.hpp"
#include "coref/grid.hpp"
#include "coref/objective.hpp"
#include "coref/prune.hpp"

namespace coref {

// World-space box as (center, extent) per axis.
struct Frame {
  std::array<double, 3> center{0, 0, 0};
  std::array<double, 3> extent{0, 0, 0};
};

// Canonical executions fill the origin-centered box of this extent per axis
// (0.95 of the [-1,1] domain), leaving a margin against clipping.
inline constexpr double kCanonicalExtent = 1.9;

// Sub-expression wrapped with prepended translate/scale commands so its
// execution is origin-centered and canonically scaled per axis.
struct CanonicalForm {
  ExprPtr expr;
  Frame frame;  // bounding box of the original execution
};

struct EmptyExecutionError : std::runtime_error {
  EmptyExecutionError() : std::runtime_error("sub-expression executes to empty; not cacheable") {}
};

CanonicalForm canonicalize(const ExprPtr& e, const std::array<int, 3>& res);

struct CacheEntry {
  uint64_t id = 0;
  CanonicalForm canon;
  OccupancyGrid bits;  // execution of canon.expr at the cache resolution
  int64_t length = 0;  // program_length(canon.expr)
  ExprPtr original;    // representative pre-canonical form, for shortening
  std::vector<std::string> origin_ids;
};

// Canonicalize + execute; throws EmptyExecutionError for empty executions.
CacheEntry make_cache_entry(const ExprPtr& subexpr, const std::array<int, 3>& res);

// A sub-expression displaced by a shorter execution-equivalent entry.
struct CacheRejection {
  ExprPtr original;
  Frame frame;
  std::vector<std::string> origin_ids;
  uint64_t preferred_id;
  int64_t rejected_length;  // canonical length of the displaced program
};

struct InsertReport {
  bool appended = false;
  uint64_t entry_id = 0;  // the preferred entry for this execution
  std::vector<CacheRejection> rejections;
};

// Deduplicated bank of canonical sub-expressions. No two entries are within
// dedup_threshold hamming distance of each other; on collision the shorter
// program wins. Above capacity the bank is uniformly subsampled.
struct SubexprCache {
  Dim dim = Dim::TwoD;
  std::array<int, 3> res{64, 64, 1};
  int dedup_threshold = 10;  // paper: 10 for 2D, 100 for 3D
  int capacity = 35000;
  std::vector<CacheEntry> entries;
  uint64_t next_id = 1;
  uint64_t rng_state = 0x9d8a7b6c5d4e3f21ull;  // drives capacity subsampling

  static SubexprCache make(Dim d, int capacity = 35000);
  const CacheEntry* find(uint64_t id) const;
};

InsertReport cache_insert(SubexprCache& c, CacheEntry entry, const std::string& origin_id);

void save_cache(const std::string& path, const SubexprCache& c);
SubexprCache load_cache(const std::string& path);

// ---------------------------------------------------------------------------
// Desired executions via masked function inversion.

struct MaskedGrid {
  OccupancyGrid target;
  OccupancyGrid valid;  // 1 = constraint known
};

// Inversion of a boolean combinator with respect to one child, given the
// sibling's execution:
//   Union^-1(T, B)          = { T,  not(T and B) }
//   Intersect^-1(T, B)      = { T,  T or B }
//   Subtract^-1 wrt left A  = { T,  T and not B }   (literal paper mask)
//   Subtract^-1 wrt right B = { not T,  T or A }
// literal_diff_mask = false widens the subtract-left mask to not(B), the
// fully-determined region. The output valid mask is ANDed with the input's.
MaskedGrid invert_bool(BoolOp op, const MaskedGrid& T, const OccupancyGrid& sibling,
                       bool inverting_left, bool literal_diff_mask = true);

// Pulls the desired execution through a transform by resampling at the
// forward-mapped location of each child cell; cells mapping outside the
// domain become invalid.
MaskedGrid invert_transform(TransformKind kind, const std::vector<double>& params,
                            const MaskedGrid& T);

struct DesiredExecution {
  MaskedGrid g;                 // full resolution; valid zeroed outside bbox
  OccupancyGrid::IndexBox bbox; // node execution bbox (or the missing-region
                                // bbox when the node executes to empty)
  Frame frame;                  // world-space box of bbox
};

// Walks the path from the root applying invert_bool / invert_transform with
// sibling executions from t, then crops to the node's execution bounding box.
DesiredExecution desired_execution(const ExecTree& t, const std::vector<int>& path,
                                   const OccupancyGrid& x, bool literal_diff_mask = true);

// Desired execution resampled into the canonical frame of the bbox, where
// entry executions can be compared word-parallel.
MaskedGrid to_canonical_frame(const DesiredExecution& d, Dim dim, const std::array<int, 3>& res);

struct KnnHit {
  int entry_index;
  int64_t score;  // masked hamming mismatches
};

// Linear scan: per entry, hamming mismatches against the desired target over
// valid cells only, in the canonical frame. Ties prefer shorter entries, then
// lower ids. Throws on an empty cache.
std::vector<KnnHit> knn_query(const SubexprCache& c, const DesiredExecution& d, int k);

// Entry re-fitted into a target frame: composes the entry's canonical
// transforms with the canonical-to-frame map, keeping length unchanged.
ExprPtr refit_entry(const CacheEntry& e, const Frame& target);

// Replaces sub-expressions (and optionally unions on new ones through an
// appended empty slot) with cache entries whose execution best matches the
// desired execution; applies the single best strictly-improving replacement
// up to max_repl times.
std::optional<ExprPtr> rewrite_cg(const OccupancyGrid& x, const ExprPtr& z,
                                  const SubexprCache& c, const ObjectiveConfig& cfg, int k = 8,
                                  int max_repl = 4, bool literal_diff_mask = true);

// First CG rewrite: propagate dedup rejections back into the programs they
// came from, swapping each rejected occurrence for the preferred entry.
// Accepted per program only when the objective does not decrease.
struct ShortenCandidate {
  std::string id;
  ExprPtr program;
  const OccupancyGrid* shape;
};
std::vector<std::pair<std::string, ExprPtr>> shorten_rewrite(
    const std::vector<ShortenCandidate>& programs, const std::vector<CacheRejection>& rejections,
    const SubexprCache& c, const ObjectiveConfig& cfg);

Frame frame_of(const OccupancyGrid::IndexBox& box, const OccupancyGrid& g);

}  // namespace coref
