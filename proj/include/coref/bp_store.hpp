#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coref/ast.hpp"
#include "coref/grid.hpp"
#include "coref/objective.hpp"
#include "coref/rng.hpp"

namespace coref {

enum class Source { NS, PO, CP, CG };

const char* source_name(Source s);
std::optional<Source> source_from_name(const std::string& name);

struct BPEntry {
  std::string shape_id;
  Source source = Source::NS;
  ExprPtr program;
  Score score;
  int round_written = 0;
};

// Per-(shape, source) record of the best program seen so far. Updates only
// ever improve their own (shape, source) slot; purging removes rewrite
// entries strictly dominated by the round's search program.
class BPStore {
 public:
  BPStore() = default;
  explicit BPStore(ObjectiveConfig cfg) : cfg_(cfg) {}

  const ObjectiveConfig& config() const { return cfg_; }

  // Writes iff the slot is empty or the new program scores strictly higher.
  bool update(const std::string& shape_id, Source source, const ExprPtr& program,
              const OccupancyGrid& x, int round);

  // Removes every PO/CP/CG entry for shape_id scoring strictly below
  // search_objective. NS entries are exempt.
  int purge_stale(const std::string& shape_id, double search_objective);
  int purge_stale(const std::string& shape_id, const ExprPtr& search_program,
                  const OccupancyGrid& x);

  const BPEntry* find(const std::string& shape_id, Source source) const;

  // Entry with the highest objective across sources (ties prefer the source
  // order NS < PO < CP < CG); null when the shape is absent.
  const BPEntry* best_entry(const std::string& shape_id) const;

  std::vector<std::string> shape_ids() const;
  std::vector<const BPEntry*> all_entries() const;
  size_t size() const { return map_.size(); }

  // Per-rewriter uniform samples (without replacement) of ceil(frac * n)
  // shapes, reshuffled per call; each sampled shape contributes its best
  // entry across sources.
  struct RewriteSample {
    std::vector<const BPEntry*> po, cp, cg;
  };
  RewriteSample sample_for_rewrite(double frac_po, double frac_cp, double frac_cg,
                                   Rng& rng) const;

  // All (shape, program) pairs; ns_only restricts to search-sourced entries
  // (PLAD and P+R modes).
  std::vector<std::pair<std::string, ExprPtr>> training_set(bool ns_only = false) const;

  // Newline-delimited snapshot: shape_id, source, objective, program text.
  void save(const std::string& path) const;
  static BPStore load(const std::string& path, Dim dim, ObjectiveConfig cfg);

 private:
  struct Key {
    std::string shape;
    int source;
    bool operator<(const Key& o) const {
      return shape != o.shape ? shape < o.shape : source < o.source;
    }
  };
  std::map<Key, BPEntry> map_;
  ObjectiveConfig cfg_;
};

}  // namespace coref
