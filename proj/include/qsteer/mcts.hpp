#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsteer/env.hpp"
#include "qsteer/policy.hpp"
#include "qsteer/rng.hpp"
#include "qsteer/types.hpp"

namespace qsteer {

// One state node. Nodes live in the tree's arena and refer to each other by
// index; the root has no parent and no incoming action.
struct TreeNode {
  int id = 0;
  int parent = -1;
  std::optional<Action> incoming_action;
  std::optional<Observation> observation;
  double value = 0.0;  // V: running mean of backpropagated rewards
  int visits = 0;      // N
  std::vector<int> children;
  int depth = 0;
  bool terminal = false;
  std::optional<double> terminal_reward;
  EnvState env_snapshot;
};

struct SearchTree {
  std::vector<TreeNode> nodes;
  int root = 0;
  int iterations_used = 0;
  bool early_stopped = false;
  Instruction instruction;
  Observation root_observation;
  // Set as soon as a terminal node with reward >= 1 enters the tree.
  bool has_perfect_terminal = false;

  const TreeNode& node(int id) const { return nodes[id]; }

  // Root -> id node index list.
  std::vector<int> path_to(int id) const;

  // (action, observation) steps along the path from the root to id.
  std::vector<Step> prefix_of(int id) const;

  // The observation in view at a node (root observation for the root).
  const Observation& observation_of(int id) const;
};

struct SearchConfig {
  int max_iterations = 30;         // m
  int expansion_samples = 5;       // n
  double exploration_weight = 2.0; // eta
  double temperature = 1.0;
  int max_depth = 0;               // 0: use the environment's step cap
  double penalty_reward = -1.0;    // rollouts that hit max_depth non-terminally
  std::uint64_t rng_seed = 0;
  // Invoked after every iteration; used by invariant checks.
  std::function<void(const SearchTree&)> iteration_hook;

  void validate() const;  // throws std::invalid_argument
};

// UCT selection score: V + sqrt(eta * ln(parent_visits) / N). Unvisited nodes
// score +infinity so every child is tried before any is revisited.
double uct_score(const TreeNode& node, int parent_visits,
                 double exploration_weight);

// Descend from the root picking the max-UCT child at every level (ties break
// toward the earliest-expanded child). Stops at a node that is terminal,
// childless, or at max_depth. Returns the root -> leaf index path.
std::vector<int> select(const SearchTree& tree, double exploration_weight,
                        int max_depth);

// Sample up to n actions from the policy, step each on a copy of the leaf's
// snapshot, and attach the resulting children (V = 0, N = 0). Throws if the
// leaf is terminal or already expanded.
std::vector<int> expand(SearchTree& tree, int leaf, const Proposer& policy,
                        const Environment& env, int n, double temperature,
                        Rng& rng);

// Value of a node: terminal nodes return their stored outcome; otherwise a
// rollout (one temperature-1 sample per step) runs from the node's snapshot
// until termination, or penalty_reward if max_depth is reached first. Rollout
// states are not added to the tree.
double evaluate(const SearchTree& tree, int node_id, const Proposer& rollout_policy,
                const Environment& env, int max_depth, double penalty_reward,
                Rng& rng);

// N += 1 and V += (r - V) / N for every node on the path, end to root.
void backpropagate(SearchTree& tree, const std::vector<int>& path, double reward);

// Full search loop: select -> expand -> evaluate new children ->
// backpropagate, where each evaluation+backpropagation consumes one of the m
// iterations (so N(root) == iterations_used). Halts early once any terminal
// node with reward >= 1 exists.
SearchTree run_search(const Environment& env, const Proposer& policy,
                      const SearchConfig& config);

// Same, with a distinct rollout policy (defaults to the proposal policy in the
// overload above).
SearchTree run_search(const Environment& env, const Proposer& policy,
                      const Proposer& rollout_policy, const SearchConfig& config);

struct QEstimate {
  double value = 0.0;
  int visits = 0;
  bool terminal = false;

  // No evidence: never visited and not a terminal node with a stored outcome.
  bool unvisited() const { return visits == 0 && !terminal; }
};

// Step-level Q for the (parent, action) edge: the child's stored outcome when
// terminal, its mean value when visited, else 0 with the unvisited flag set.
// Throws std::invalid_argument for unknown edges.
QEstimate q_estimate(const SearchTree& tree, int parent, const Action& action);

// {root, nodes: [{id, parent, action, V, N, depth, terminal, reward}]} with
// nodes ordered by id.
nlohmann::json tree_to_json(const SearchTree& tree);

}  // namespace qsteer
