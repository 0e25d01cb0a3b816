#pragma once

#include <optional>
#include <vector>

#include "coref/ast.hpp"
#include "coref/grid.hpp"
#include "coref/objective.hpp"

namespace coref {

// Expression tree annotated with the execution of every sub-expression.
// Boolean node grids are bit-combinations of their children; primitive and
// transform nodes are executed directly, so each node's grid equals
// execute_hard of its sub-expression.
struct ExecTree {
  struct Node {
    ExprPtr expr;
    OccupancyGrid grid;
    int left = -1, right = -1, child = -1;
    int preorder = 0;
  };
  std::vector<Node> nodes;
  int root = -1;

  const Node& at(int i) const { return nodes[size_t(i)]; }
};

ExecTree build_exec_tree(const ExprPtr& z, const std::array<int, 3>& res);

// Node index for a root-to-node child path (0 = left/only, 1 = right).
int node_index_at(const ExecTree& t, const std::vector<int>& path);

// Top-down pass: scores O(x, sub-expression) at every node and returns the
// best one as the new root. Ties prefer shorter programs, then the earlier
// preorder node.
ExprPtr top_down_reroot(const ExecTree& t, const OccupancyGrid& x, const ObjectiveConfig& cfg);

// Bottom-up pass: removes extraneous nodes. A boolean node whose execution
// equals one child's execution collapses to that child (left preferred);
// children with empty executions simplify by the boolean identities
// union(e, 0) = e, intersect(e, 0) = 0, subtract(e, 0) = e,
// subtract(0, e) = 0; repeated until fixpoint. Returns nullptr when the whole
// program executes to empty. match_tolerance allows up to that many differing
// cells to count as equal (default 0 = the exact-match rule).
ExprPtr bottom_up_prune(const ExprPtr& z, const OccupancyGrid& x, int match_tolerance = 0);

// Full CP rewrite: bottom_up_prune(top_down_reroot(z)); returned only when
// the objective strictly improves.
std::optional<ExprPtr> rewrite_cp(const OccupancyGrid& x, const ExprPtr& z,
                                  const ObjectiveConfig& cfg, int match_tolerance = 0);

// Every program reachable by choosing any node as the new root and then
// repeatedly replacing boolean nodes by one of their children, structurally
// deduplicated. Guarded to programs with at most max_nodes nodes.
std::vector<ExprPtr> cp_space(const ExprPtr& z, int max_nodes = 15);

// Exhaustive argmax of O over cp_space (same tie rule as the greedy passes).
ExprPtr oracle_cp(const OccupancyGrid& x, const ExprPtr& z, const ObjectiveConfig& cfg,
                  int max_nodes = 15);

}  // namespace coref
