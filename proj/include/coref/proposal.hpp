#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "coref/ast.hpp"
#include "coref/grid.hpp"
#include "coref/rng.hpp"

namespace coref {

// 33-value uniform grid over (-1, 1): k / 17 for k in [-16, 16].
double grid_param(Rng& rng);

// Random grammar program with boolean depth <= depth_max and parameters from
// the 33-value grid.
ExprPtr sample_program(Rng& rng, Dim dim, int depth_max);

// Stand-in for the inference network p(z|x): proposes candidate programs for
// a shape and can be trained on (grid, program) pairs. Proposals are
// deterministic given the source's seed and call history per shape, so runs
// reproduce regardless of thread count.
class ProposalSource {
 public:
  virtual ~ProposalSource() = default;
  virtual std::vector<ExprPtr> propose(const OccupancyGrid& x, int beam) = 0;
  virtual void train(const std::vector<std::pair<const OccupancyGrid*, ExprPtr>>& pairs) = 0;
};

// Pure grammar sampler; train is a learning no-op. Each shape keeps its own
// draw counter so successive rounds propose fresh candidates.
class RandomSampler : public ProposalSource {
 public:
  RandomSampler(Dim dim, int depth_max, uint64_t seed)
      : dim_(dim), depth_max_(depth_max), seed_(seed) {}

  std::vector<ExprPtr> propose(const OccupancyGrid& x, int beam) override;
  void train(const std::vector<std::pair<const OccupancyGrid*, ExprPtr>>&) override {}

 private:
  Dim dim_;
  int depth_max_;
  uint64_t seed_;
  std::mutex mu_;
  std::map<uint64_t, uint64_t> draws_;  // per-shape call counter
};

// Desk-scale amortization stand-in: remembers trained (grid, program) pairs
// and proposes the programs of the nearest stored grids by IoU, each with one
// parameter-jitter mutation, padding with random samples when short.
class MemorizingRetriever : public ProposalSource {
 public:
  MemorizingRetriever(Dim dim, int depth_max, uint64_t seed)
      : dim_(dim), depth_max_(depth_max), seed_(seed) {}

  std::vector<ExprPtr> propose(const OccupancyGrid& x, int beam) override;
  void train(const std::vector<std::pair<const OccupancyGrid*, ExprPtr>>& pairs) override;

  size_t stored() const { return keys_.size(); }

 private:
  Dim dim_;
  int depth_max_;
  uint64_t seed_;
  std::vector<uint64_t> keys_;  // hash of grid bits
  std::vector<OccupancyGrid> grids_;
  std::vector<ExprPtr> programs_;
  std::mutex mu_;
  std::map<uint64_t, uint64_t> draws_;
};

uint64_t grid_hash(const OccupancyGrid& g);

// One parameter-jitter mutation: adds uniform(-amp, amp) to every raw
// primitive parameter, clamped inside (-1, 1).
ExprPtr jitter_params(const Expr& e, Rng& rng, double amp = 0.05);

}  // namespace coref
