#include <doctest.h>

#include <cmath>
#include <limits>

#include "qsteer/env.hpp"
#include "qsteer/mcts.hpp"
#include "qsteer/policy.hpp"

using namespace qsteer;

namespace {

// Every action is terminal with reward 1: triggers early stopping on the
// first iteration.
class AlwaysWinEnv : public Environment {
 public:
  EnvKind kind() const override { return EnvKind::ChainQA; }
  std::uint64_t seed() const override { return 0; }
  int max_steps() const override { return 3; }
  Instruction instruction() const override {
    return Instruction{"chainqa:0", 0, "win immediately."};
  }
  ResetResult reset() const override {
    EnvState s;
    s.kind = EnvKind::ChainQA;
    return ResetResult{s, instruction(), Observation{"go."}};
  }
  StepResult step(const EnvState& state, const Action&) const override {
    if (state.terminal) throw std::invalid_argument("terminal");
    EnvState next = state;
    next.step_count += 1;
    next.terminal = true;
    return StepResult{next, Observation{"won."}, true, 1.0};
  }
  std::vector<Action> valid_actions(const EnvState& state) const override {
    if (state.terminal) throw std::invalid_argument("terminal");
    return {make_action("go[a]"), make_action("go[b]")};
  }
  nlohmann::json fixture() const override { return {}; }
};

// Two-level tree where each depth-1 action leads to a single fixed terminal
// outcome, so node values are policy independent.
class TwoLevelEnv : public Environment {
 public:
  EnvKind kind() const override { return EnvKind::ChainQA; }
  std::uint64_t seed() const override { return 0; }
  int max_steps() const override { return 2; }
  Instruction instruction() const override {
    return Instruction{"chainqa:0", 0, "two levels."};
  }
  ResetResult reset() const override {
    EnvState s;
    s.kind = EnvKind::ChainQA;
    return ResetResult{s, instruction(), Observation{"start."}};
  }
  StepResult step(const EnvState& state, const Action& action) const override {
    if (state.terminal) throw std::invalid_argument("terminal");
    EnvState next = state;
    next.step_count += 1;
    if (state.step_count == 0) {
      next.cursor = action == make_action("go[high]") ? 1 : 0;
      return StepResult{next, Observation{"level two."}, false, std::nullopt};
    }
    next.terminal = true;
    const double reward = state.cursor == 1 ? 0.8 : 0.2;
    return StepResult{next, Observation{"done."}, true, reward};
  }
  std::vector<Action> valid_actions(const EnvState& state) const override {
    if (state.terminal) throw std::invalid_argument("terminal");
    if (state.step_count == 0)
      return {make_action("go[high]"), make_action("go[low]")};
    return {make_action("finish[x]"), make_action("finish[y]")};
  }
  nlohmann::json fixture() const override { return {}; }
};

TreeNode make_node(double value, int visits) {
  TreeNode node;
  node.value = value;
  node.visits = visits;
  return node;
}

}  // namespace

TEST_CASE("uct score matches the closed form") {
  CHECK(uct_score(make_node(0.5, 2), 8, 2.0) ==
        doctest::Approx(0.5 + std::sqrt(2.0 * std::log(8.0) / 2.0)));
  CHECK(uct_score(make_node(0.5, 2), 8, 2.0) == doctest::Approx(1.9420).epsilon(1e-4));
  CHECK(uct_score(make_node(0.1, 0), 8, 2.0) ==
        std::numeric_limits<double>::infinity());
  CHECK(uct_score(make_node(0.37, 5), 9, 0.0) == 0.37);
}

TEST_CASE("select prefers unvisited children and breaks ties early") {
  SearchTree tree;
  tree.nodes.resize(4);
  for (int i = 0; i < 4; ++i) tree.nodes[i].id = i;
  tree.nodes[0].visits = 6;
  tree.nodes[0].children = {1, 2, 3};
  for (int i = 1; i < 4; ++i) {
    tree.nodes[i].parent = 0;
    tree.nodes[i].depth = 1;
    tree.nodes[i].incoming_action = make_action("a" + std::to_string(i));
  }
  tree.nodes[1] = [&] {
    TreeNode n = tree.nodes[1];
    n.value = 1.2;
    n.visits = 2;
    return n;
  }();
  tree.nodes[2].visits = 0;  // unvisited -> +inf priority
  tree.nodes[3].value = 0.9;
  tree.nodes[3].visits = 2;

  SUBCASE("unvisited child dominates") {
    const auto path = select(tree, 2.0, 10);
    REQUIRE(path.size() == 2);
    CHECK(path[1] == 2);
  }
  SUBCASE("equal scores keep the earliest child") {
    tree.nodes[2].visits = 2;
    tree.nodes[2].value = 1.2;
    tree.nodes[1].value = 1.2;
    tree.nodes[3].value = 1.2;
    const auto path = select(tree, 0.0, 10);
    REQUIRE(path.size() == 2);
    CHECK(path[1] == 1);
  }
  SUBCASE("single chain is walked to its end") {
    tree.nodes[0].children = {1};
    tree.nodes[1].children = {2};
    tree.nodes[2].parent = 1;
    tree.nodes[2].depth = 2;
    tree.nodes[1].visits = 1;
    tree.nodes[2].visits = 1;
    const auto path = select(tree, 2.0, 10);
    CHECK(path == std::vector<int>{0, 1, 2});
  }
}

TEST_CASE("expand creates deduplicated children with env bookkeeping") {
  AlwaysWinEnv env;
  SearchTree tree;
  const ResetResult rr = env.reset();
  tree.instruction = rr.instruction;
  tree.root_observation = rr.observation;
  TreeNode root;
  root.env_snapshot = rr.state;
  tree.nodes.push_back(root);

  ExhaustiveProposer proposer;
  Rng rng(1);
  const auto children = expand(tree, 0, proposer, env, 5, 1.0, rng);
  CHECK(children.size() == 2);  // only two distinct candidates
  for (int id : children) {
    const TreeNode& child = tree.node(id);
    CHECK(child.visits == 0);
    CHECK(child.value == 0.0);
    CHECK(child.depth == 1);
    CHECK(child.terminal);
    CHECK(child.terminal_reward == 1.0);
  }
  CHECK(tree.has_perfect_terminal);
  CHECK_THROWS_AS(expand(tree, 0, proposer, env, 5, 1.0, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS(expand(tree, children[0], proposer, env, 5, 1.0, rng),
                  std::invalid_argument);
}

TEST_CASE("evaluate passes through terminal outcomes") {
  AlwaysWinEnv env;
  ExhaustiveProposer proposer;
  SearchTree tree;
  const ResetResult rr = env.reset();
  tree.instruction = rr.instruction;
  tree.root_observation = rr.observation;
  TreeNode root;
  root.env_snapshot = rr.state;
  tree.nodes.push_back(root);
  Rng rng(1);
  const auto children = expand(tree, 0, proposer, env, 2, 1.0, rng);
  CHECK(evaluate(tree, children[0], proposer, env, env.max_steps(), -1.0, rng) ==
        1.0);
}

TEST_CASE("evaluate returns the penalty when the depth cap cuts a rollout") {
  auto env = make_env(EnvKind::ChainQA, 8);
  SearchTree tree;
  const ResetResult rr = env->reset();
  tree.instruction = rr.instruction;
  tree.root_observation = rr.observation;
  TreeNode root;
  root.env_snapshot = rr.state;
  tree.nodes.push_back(root);
  Rng rng(3);
  // max_depth 0 leaves no room to roll out from the root.
  CHECK(evaluate(tree, 0, ExhaustiveProposer(), *env, 0, -1.0, rng) == -1.0);
}

TEST_CASE("evaluate reaches environment rewards through rollouts") {
  auto env = make_env(EnvKind::ChainQA, 8);
  const ScriptedAgent oracle = ScriptedAgent::make(*env, 0.0);
  SearchTree tree;
  const ResetResult rr = env->reset();
  tree.instruction = rr.instruction;
  tree.root_observation = rr.observation;
  TreeNode root;
  root.env_snapshot = rr.state;
  tree.nodes.push_back(root);
  Rng rng(3);
  CHECK(evaluate(tree, 0, oracle, *env, env->max_steps(), -1.0, rng) == 1.0);
}

TEST_CASE("backpropagate maintains running means") {
  SearchTree tree;
  tree.nodes.resize(2);
  tree.nodes[0].id = 0;
  tree.nodes[1].id = 1;
  tree.nodes[1].parent = 0;

  SUBCASE("fresh node takes the first reward") {
    backpropagate(tree, {0, 1}, 0.7);
    CHECK(tree.nodes[1].visits == 1);
    CHECK(tree.nodes[1].value == 0.7);
  }
  SUBCASE("running mean update") {
    tree.nodes[1].visits = 1;
    tree.nodes[1].value = 0.8;
    tree.nodes[0].visits = 1;
    tree.nodes[0].value = 0.8;
    backpropagate(tree, {0, 1}, 0.4);
    CHECK(tree.nodes[1].visits == 2);
    CHECK(tree.nodes[1].value == doctest::Approx(0.6).epsilon(1e-12));
  }
  SUBCASE("k rewards average exactly") {
    Rng rng(5);
    double sum = 0.0;
    const int k = 37;
    for (int i = 0; i < k; ++i) {
      const double r = rng.next_double();
      sum += r;
      backpropagate(tree, {0, 1}, r);
    }
    CHECK(tree.nodes[1].visits == k);
    CHECK(tree.nodes[1].value == doctest::Approx(sum / k).epsilon(1e-12));
  }
}

TEST_CASE("run_search stops immediately on an always-win environment") {
  AlwaysWinEnv env;
  ExhaustiveProposer proposer;
  SearchConfig config;
  config.max_iterations = 30;
  const SearchTree tree = run_search(env, proposer, config);
  CHECK(tree.early_stopped);
  CHECK(tree.iterations_used == 1);
  CHECK(tree.nodes[tree.root].visits == 1);
}

TEST_CASE("run_search is deterministic for a fixed seed") {
  auto env = make_env(EnvKind::ChainQA, 12);
  const ScriptedAgent agent = ScriptedAgent::make(*env, 0.3);
  SearchConfig config;
  config.max_iterations = 30;
  config.rng_seed = 77;
  const SearchTree a = run_search(*env, agent, config);
  const SearchTree b = run_search(*env, agent, config);
  CHECK(tree_to_json(a).dump() == tree_to_json(b).dump());
  CHECK(a.nodes.size() == b.nodes.size());
}

TEST_CASE("exhausted search matches the exact oracle on a two-level task") {
  TwoLevelEnv env;
  ExhaustiveProposer proposer;
  SearchConfig config;
  config.max_iterations = 400;
  config.expansion_samples = 4;
  config.penalty_reward = -1.0;
  const SearchTree tree = run_search(env, proposer, config);

  PolicyFn uniform = [](const EnvState&, const Observation&,
                        const std::vector<Action>& candidates) {
    return std::vector<double>(candidates.size(), 1.0 / candidates.size());
  };
  const QTable oracle = exact_q_oracle(env, uniform);
  const EnvState root_state = env.reset().state;
  for (int child_id : tree.nodes[tree.root].children) {
    const TreeNode& child = tree.node(child_id);
    const double expected =
        oracle.at(state_key(root_state), *child.incoming_action);
    CHECK(child.value == doctest::Approx(expected).epsilon(0.05));
  }
}

TEST_CASE("visit conservation and value bounds hold during search") {
  auto env = make_env(EnvKind::TreasureShop, 19);
  const ScriptedAgent agent = ScriptedAgent::make(*env, 0.4);
  SearchConfig config;
  config.max_iterations = 40;
  config.rng_seed = 5;
  config.iteration_hook = [&](const SearchTree& t) {
    CHECK(t.nodes[t.root].visits == t.iterations_used);
    for (const TreeNode& node : t.nodes) {
      int child_visits = 0;
      for (int c : node.children) {
        child_visits += t.nodes[c].visits;
        CHECK(t.nodes[c].depth == node.depth + 1);
        CHECK(t.nodes[c].parent == node.id);
      }
      CHECK(node.visits >= child_visits);
      CHECK(node.value >= config.penalty_reward - 1e-12);
      CHECK(node.value <= 1.0 + 1e-12);
    }
  };
  run_search(*env, agent, config);
}

TEST_CASE("q_estimate reads child statistics") {
  SearchTree tree;
  tree.nodes.resize(4);
  for (int i = 0; i < 4; ++i) tree.nodes[i].id = i;
  tree.nodes[0].children = {1, 2, 3};
  for (int i = 1; i < 4; ++i) tree.nodes[i].parent = 0;
  tree.nodes[1].incoming_action = make_action("a[t]");
  tree.nodes[1].terminal = true;
  tree.nodes[1].terminal_reward = 0.7;
  tree.nodes[1].visits = 1;
  tree.nodes[2].incoming_action = make_action("a[u]");
  tree.nodes[2].visits = 0;
  tree.nodes[3].incoming_action = make_action("a[v]");
  tree.nodes[3].visits = 3;
  tree.nodes[3].value = 2.0 / 3.0;

  const QEstimate terminal = q_estimate(tree, 0, make_action("a[t]"));
  CHECK(terminal.value == 0.7);
  CHECK_FALSE(terminal.unvisited());

  const QEstimate unvisited = q_estimate(tree, 0, make_action("a[u]"));
  CHECK(unvisited.value == 0.0);
  CHECK(unvisited.unvisited());

  const QEstimate visited = q_estimate(tree, 0, make_action("a[v]"));
  CHECK(visited.value == doctest::Approx(2.0 / 3.0));

  CHECK_THROWS_AS(q_estimate(tree, 0, make_action("a[w]")),
                  std::invalid_argument);
}

TEST_CASE("tree json dump is stable and well formed") {
  auto env = make_env(EnvKind::ChainQA, 1);
  const ScriptedAgent agent = ScriptedAgent::make(*env, 0.2);
  SearchConfig config;
  config.max_iterations = 10;
  config.rng_seed = 3;
  const SearchTree tree = run_search(*env, agent, config);
  const nlohmann::json j = tree_to_json(tree);
  CHECK(j.at("root").get<int>() == 0);
  CHECK(j.at("nodes").size() == tree.nodes.size());
  CHECK(j.at("nodes")[0].at("parent").is_null());
  CHECK(j.at("nodes")[0].at("action").is_null());
}
