#include "qsteer/mcts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qsteer {

std::vector<int> SearchTree::path_to(int id) const {
  std::vector<int> path;
  for (int cur = id; cur >= 0; cur = nodes[cur].parent) path.push_back(cur);
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<Step> SearchTree::prefix_of(int id) const {
  std::vector<Step> steps;
  const std::vector<int> path = path_to(id);
  for (std::size_t i = 1; i < path.size(); ++i) {
    const TreeNode& n = nodes[path[i]];
    steps.push_back(Step{*n.incoming_action, *n.observation});
  }
  return steps;
}

const Observation& SearchTree::observation_of(int id) const {
  return id == root ? root_observation : *nodes[id].observation;
}

void SearchConfig::validate() const {
  if (max_iterations < 1)
    throw std::invalid_argument("search config: max_iterations must be >= 1");
  if (expansion_samples < 1)
    throw std::invalid_argument("search config: expansion_samples must be >= 1");
  if (exploration_weight < 0.0)
    throw std::invalid_argument("search config: exploration_weight must be >= 0");
  if (temperature <= 0.0)
    throw std::invalid_argument("search config: temperature must be > 0");
  if (max_depth < 0)
    throw std::invalid_argument("search config: max_depth must be >= 0");
  if (penalty_reward >= 0.0)
    throw std::invalid_argument("search config: penalty_reward must be < 0");
}

double uct_score(const TreeNode& node, int parent_visits,
                 double exploration_weight) {
  if (node.visits == 0) return std::numeric_limits<double>::infinity();
  return node.value + std::sqrt(exploration_weight *
                                std::log(static_cast<double>(parent_visits)) /
                                static_cast<double>(node.visits));
}

std::vector<int> select(const SearchTree& tree, double exploration_weight,
                        int max_depth) {
  std::vector<int> path{tree.root};
  int current = tree.root;
  while (true) {
    const TreeNode& node = tree.nodes[current];
    if (node.terminal || node.children.empty() || node.depth >= max_depth) break;
    int best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int child : node.children) {
      const double score =
          uct_score(tree.nodes[child], node.visits, exploration_weight);
      if (score > best_score) {  // strict: ties keep the earliest child
        best_score = score;
        best = child;
      }
    }
    path.push_back(best);
    current = best;
  }
  return path;
}

std::vector<int> expand(SearchTree& tree, int leaf, const Proposer& policy,
                        const Environment& env, int n, double temperature,
                        Rng& rng) {
  TreeNode& parent = tree.nodes[leaf];
  if (parent.terminal)
    throw std::invalid_argument("expand: node is terminal");
  if (!parent.children.empty())
    throw std::invalid_argument("expand: node already expanded");

  const Context ctx =
      make_context(tree.instruction, tree.prefix_of(leaf),
                   tree.root_observation, env.valid_actions(parent.env_snapshot));
  const std::vector<Action> proposals =
      policy.propose(ctx, parent.env_snapshot, n, temperature, rng);

  std::vector<int> created;
  for (const Action& action : proposals) {
    const StepResult res = env.step(tree.nodes[leaf].env_snapshot, action);
    TreeNode child;
    child.id = static_cast<int>(tree.nodes.size());
    child.parent = leaf;
    child.incoming_action = action;
    child.observation = res.observation;
    child.depth = tree.nodes[leaf].depth + 1;
    child.terminal = res.terminal;
    child.terminal_reward = res.outcome;
    child.env_snapshot = res.state;
    tree.nodes[leaf].children.push_back(child.id);
    created.push_back(child.id);
    if (res.terminal && *res.outcome >= 1.0) tree.has_perfect_terminal = true;
    tree.nodes.push_back(std::move(child));
  }
  return created;
}

double evaluate(const SearchTree& tree, int node_id,
                const Proposer& rollout_policy, const Environment& env,
                int max_depth, double penalty_reward, Rng& rng) {
  const TreeNode& node = tree.nodes[node_id];
  if (node.terminal) return *node.terminal_reward;

  EnvState state = node.env_snapshot;
  std::vector<Step> steps = tree.prefix_of(node_id);
  while (true) {
    if (state.step_count >= max_depth) return penalty_reward;
    const Context ctx = make_context(tree.instruction, steps,
                                     tree.root_observation,
                                     env.valid_actions(state));
    const Action action =
        rollout_policy.propose(ctx, state, 1, 1.0, rng).front();
    const StepResult res = env.step(state, action);
    steps.push_back(Step{action, res.observation});
    if (res.terminal) return *res.outcome;
    state = res.state;
  }
}

void backpropagate(SearchTree& tree, const std::vector<int>& path, double reward) {
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    TreeNode& node = tree.nodes[*it];
    node.visits += 1;
    node.value += (reward - node.value) / static_cast<double>(node.visits);
  }
}

SearchTree run_search(const Environment& env, const Proposer& policy,
                      const SearchConfig& config) {
  return run_search(env, policy, policy, config);
}

SearchTree run_search(const Environment& env, const Proposer& policy,
                      const Proposer& rollout_policy, const SearchConfig& config) {
  config.validate();
  const int max_depth =
      config.max_depth > 0 ? config.max_depth : env.max_steps();

  SearchTree tree;
  const ResetResult rr = env.reset();
  tree.instruction = rr.instruction;
  tree.root_observation = rr.observation;
  TreeNode root;
  root.env_snapshot = rr.state;
  tree.nodes.push_back(std::move(root));

  Rng rng(mix_seed(0x3C75u, config.rng_seed, env.seed()));

  // One iteration = one evaluation + one backpropagation, so the root's visit
  // count always equals iterations_used.
  auto finish_iteration = [&](const std::vector<int>& path, double reward) {
    backpropagate(tree, path, reward);
    tree.iterations_used += 1;
    if (config.iteration_hook) config.iteration_hook(tree);
    if (tree.has_perfect_terminal) tree.early_stopped = true;
  };

  while (tree.iterations_used < config.max_iterations && !tree.early_stopped) {
    std::vector<int> path =
        select(tree, config.exploration_weight, max_depth);
    const int leaf = path.back();
    const TreeNode& leaf_node = tree.nodes[leaf];

    if (!leaf_node.terminal && leaf_node.depth < max_depth &&
        leaf_node.children.empty()) {
      const std::vector<int> created =
          expand(tree, leaf, policy, env, config.expansion_samples,
                 config.temperature, rng);
      for (int child : created) {
        if (tree.iterations_used >= config.max_iterations || tree.early_stopped)
          break;
        const double reward = evaluate(tree, child, rollout_policy, env,
                                       max_depth, config.penalty_reward, rng);
        path.push_back(child);
        finish_iteration(path, reward);
        path.pop_back();
      }
    } else {
      // Terminal leaf (re-backpropagate its stored outcome) or a node pinned
      // at the depth cap (rollout degenerates to the penalty).
      const double reward = evaluate(tree, leaf, rollout_policy, env, max_depth,
                                     config.penalty_reward, rng);
      finish_iteration(path, reward);
    }
  }
  return tree;
}

QEstimate q_estimate(const SearchTree& tree, int parent, const Action& action) {
  if (parent < 0 || parent >= static_cast<int>(tree.nodes.size()))
    throw std::invalid_argument("q_estimate: no such parent node");
  for (int child_id : tree.nodes[parent].children) {
    const TreeNode& child = tree.nodes[child_id];
    if (child.incoming_action && *child.incoming_action == action) {
      QEstimate qe;
      qe.visits = child.visits;
      qe.terminal = child.terminal;
      if (child.terminal)
        qe.value = *child.terminal_reward;
      else if (child.visits > 0)
        qe.value = child.value;
      else
        qe.value = 0.0;
      return qe;
    }
  }
  throw std::invalid_argument("q_estimate: no child via action " + action.text);
}

nlohmann::json tree_to_json(const SearchTree& tree) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const TreeNode& n : tree.nodes) {
    nlohmann::json entry;
    entry["id"] = n.id;
    entry["parent"] = n.parent < 0 ? nlohmann::json(nullptr)
                                   : nlohmann::json(n.parent);
    entry["action"] = n.incoming_action ? nlohmann::json(n.incoming_action->text)
                                        : nlohmann::json(nullptr);
    entry["V"] = n.value;
    entry["N"] = n.visits;
    entry["depth"] = n.depth;
    entry["terminal"] = n.terminal;
    entry["reward"] = n.terminal_reward ? nlohmann::json(*n.terminal_reward)
                                        : nlohmann::json(nullptr);
    nodes.push_back(std::move(entry));
  }
  return {{"root", tree.root}, {"nodes", nodes}};
}

}  // namespace qsteer
