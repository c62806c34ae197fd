#include <doctest.h>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "qsteer/env.hpp"
#include "qsteer/rng.hpp"
#include "qsteer/text.hpp"

using namespace qsteer;

namespace {

// Forward exhaustive enumeration of the best achievable outcome, independent
// of the backward-induction oracle. No memoization: walks every action
// sequence.
double brute_force_best(const Environment& env, const EnvState& state) {
  double best = 0.0;
  for (const Action& a : env.valid_actions(state)) {
    const StepResult res = env.step(state, a);
    const double v =
        res.terminal ? *res.outcome : brute_force_best(env, res.state);
    best = std::max(best, v);
  }
  return best;
}

StepResult step_text(const Environment& env, const EnvState& s,
                     const std::string& a) {
  return env.step(s, make_action(a));
}

}  // namespace

TEST_CASE("reset is deterministic per (kind, seed)") {
  auto shop = make_env(EnvKind::TreasureShop, 7);
  auto again = make_env(EnvKind::TreasureShop, 7);
  CHECK(shop->reset().instruction.text == again->reset().instruction.text);

  auto qa1 = make_env(EnvKind::ChainQA, 0);
  auto qa2 = make_env(EnvKind::ChainQA, 0);
  const ResetResult a = qa1->reset();
  const ResetResult b = qa2->reset();
  CHECK(a.state == b.state);
  CHECK(a.instruction == b.instruction);
  CHECK(a.observation == b.observation);
  CHECK(a.state.step_count == 0);
  CHECK_FALSE(a.state.terminal);
}

TEST_CASE("distinct seeds produce distinct targets") {
  std::set<std::string> required_sets;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto env = make_env(EnvKind::TreasureShop, seed);
    required_sets.insert(env->fixture()["catalog"]["required_attributes"].dump());
  }
  CHECK(required_sets.size() >= 2);
}

TEST_CASE("chainqa answers are always accepted and binary") {
  auto env = make_env(EnvKind::ChainQA, 3);
  const std::string answer = env->fixture()["graph"]["answer"].get<std::string>();
  const EnvState root = env->reset().state;

  SUBCASE("correct answer at the root") {
    const StepResult res = step_text(*env, root, "answer[" + answer + "]");
    CHECK(res.terminal);
    CHECK(res.outcome == 1.0);
  }
  SUBCASE("correct answer after a search") {
    const StepResult mid = env->step(root, env->valid_actions(root).front());
    REQUIRE_FALSE(mid.terminal);
    const StepResult res = step_text(*env, mid.state, "answer[" + answer + "]");
    CHECK(res.terminal);
    CHECK(res.outcome == 1.0);
  }
  SUBCASE("wrong answer scores zero") {
    const StepResult res = step_text(*env, root, "answer[entity99]");
    CHECK(res.terminal);
    CHECK(res.outcome == 0.0);
  }
}

TEST_CASE("treasureshop reward is the requirement-match fraction") {
  // Find a seed with two required attributes, then buy the near-miss item:
  // one attribute matched plus the price requirement = 2 of 3 => 2/3.
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    auto env = make_env(EnvKind::TreasureShop, seed);
    const auto fixture = env->fixture();
    const auto& cat = fixture["catalog"];
    if (cat["required_attributes"].size() != 2) continue;

    const std::string target = cat["target_category"].get<std::string>();
    std::vector<std::string> required;
    for (const auto& a : cat["required_attributes"])
      required.push_back(a.get<std::string>());
    const int cap = cat["price_cap"].get<int>();

    for (const auto& item : cat["items"]) {
      if (item["category"].get<std::string>() != target) continue;
      int matched = 0;
      for (const auto& a : item["attributes"])
        if (std::count(required.begin(), required.end(), a.get<std::string>()))
          ++matched;
      const bool price_ok = item["price"].get<int>() <= cap;
      if (matched != 1 || !price_ok) continue;

      const EnvState root = env->reset().state;
      const StepResult results = step_text(*env, root, "search[" + target + "]");
      const StepResult page = step_text(
          *env, results.state, "click[" + item["title"].get<std::string>() + "]");
      const StepResult cart = step_text(*env, page.state, "click[add to cart]");
      const StepResult bought = step_text(*env, cart.state, "click[buy now]");
      REQUIRE(bought.terminal);
      CHECK(*bought.outcome == doctest::Approx(2.0 / 3.0));
      return;
    }
  }
  FAIL("no suitable near-miss item found in 64 seeds");
}

TEST_CASE("perfect purchase scores 1.0") {
  auto env = make_env(EnvKind::TreasureShop, 7);
  const auto cat = env->fixture()["catalog"];
  const std::string target = cat["target_category"].get<std::string>();
  std::vector<std::string> required;
  for (const auto& a : cat["required_attributes"])
    required.push_back(a.get<std::string>());
  for (const auto& item : cat["items"]) {
    if (item["category"].get<std::string>() != target) continue;
    bool all = true;
    for (const auto& a : required) {
      bool found = false;
      for (const auto& have : item["attributes"])
        if (have.get<std::string>() == a) found = true;
      all = all && found;
    }
    if (!all || item["price"].get<int>() > cat["price_cap"].get<int>()) continue;
    const EnvState root = env->reset().state;
    const StepResult results = step_text(*env, root, "search[" + target + "]");
    const StepResult page = step_text(
        *env, results.state, "click[" + item["title"].get<std::string>() + "]");
    const StepResult cart = step_text(*env, page.state, "click[add to cart]");
    const StepResult bought = step_text(*env, cart.state, "click[buy now]");
    CHECK(*bought.outcome == 1.0);
    return;
  }
  FAIL("planted perfect item missing");
}

TEST_CASE("step cap terminates with outcome zero") {
  auto env = make_env(EnvKind::ChainQA, 11);
  EnvState s = env->reset().state;
  StepResult res;
  for (int i = 0; i < env->max_steps(); ++i) {
    REQUIRE_FALSE(s.terminal);
    res = step_text(*env, s, "lookup[archive]");
    s = res.state;
  }
  CHECK(res.terminal);
  CHECK(res.outcome == 0.0);
  CHECK(s.step_count == env->max_steps());
}

TEST_CASE("invalid actions consume a step without progress") {
  auto env = make_env(EnvKind::TreasureShop, 5);
  const EnvState root = env->reset().state;
  const StepResult res = step_text(*env, root, "click[warp drive]");
  CHECK(res.observation.text == "invalid action.");
  CHECK(res.state.step_count == 1);
  CHECK(res.state.page == root.page);
  CHECK(res.state.cursor == root.cursor);
  CHECK_FALSE(res.terminal);
}

TEST_CASE("stepping or listing a terminal state is rejected") {
  auto env = make_env(EnvKind::ChainQA, 2);
  const StepResult done =
      step_text(*env, env->reset().state, "answer[entity99]");
  REQUIRE(done.terminal);
  CHECK_THROWS_AS(env->step(done.state, make_action("lookup[archive]")),
                  std::invalid_argument);
  CHECK_THROWS_AS(env->valid_actions(done.state), std::invalid_argument);
}

TEST_CASE("valid actions are canonical, stable, and bounded") {
  for (EnvKind kind : {EnvKind::TreasureShop, EnvKind::ChainQA}) {
    auto env = make_env(kind, 13);
    EnvState s = env->reset().state;
    Rng rng(99);
    for (int step = 0; step < env->max_steps() && !s.terminal; ++step) {
      const auto actions = env->valid_actions(s);
      const auto again = env->valid_actions(s);
      CHECK(actions == again);
      CHECK_FALSE(actions.empty());
      CHECK(actions.size() <= 16);
      for (const Action& a : actions) CHECK(a.text == canonicalize(a.text));
      s = env->step(s, actions[rng.next_below(actions.size())]).state;
    }
  }
}

TEST_CASE("treasureshop search page lists exactly the catalog keywords") {
  auto env = make_env(EnvKind::TreasureShop, 21);
  const auto categories = env->fixture()["catalog"]["categories"];
  const auto actions = env->valid_actions(env->reset().state);
  REQUIRE(actions.size() == categories.size());
  for (std::size_t i = 0; i < actions.size(); ++i)
    CHECK(actions[i].text == "search[" + categories[i].get<std::string>() + "]");
}

TEST_CASE("full episode streams are replay-identical") {
  for (EnvKind kind : {EnvKind::TreasureShop, EnvKind::ChainQA}) {
    auto env = make_env(kind, 17);
    std::vector<std::string> first, second;
    for (std::vector<std::string>* sink : {&first, &second}) {
      EnvState s = env->reset().state;
      Rng rng(4242);
      while (!s.terminal) {
        const auto actions = env->valid_actions(s);
        const StepResult res =
            env->step(s, actions[rng.next_below(actions.size())]);
        sink->push_back(res.observation.text);
        if (res.outcome) sink->push_back(std::to_string(*res.outcome));
        s = res.state;
      }
    }
    CHECK(first == second);
  }
}

TEST_CASE("emitted outcomes stay in bounds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (EnvKind kind : {EnvKind::TreasureShop, EnvKind::ChainQA}) {
      auto env = make_env(kind, seed);
      Rng rng(mix_seed(seed, 1));
      EnvState s = env->reset().state;
      while (!s.terminal) {
        const auto actions = env->valid_actions(s);
        const StepResult res =
            env->step(s, actions[rng.next_below(actions.size())]);
        if (res.outcome) {
          CHECK(*res.outcome >= 0.0);
          CHECK(*res.outcome <= 1.0);
          if (kind == EnvKind::ChainQA)
            CHECK((*res.outcome == 0.0 || *res.outcome == 1.0));
        }
        s = res.state;
      }
    }
  }
}

TEST_CASE("oracle: immediate correct answer has Q = 1") {
  auto env = make_env(EnvKind::ChainQA, 9);
  const QTable q = optimal_q_oracle(*env);
  const std::string answer = env->fixture()["graph"]["answer"].get<std::string>();
  const EnvState root = env->reset().state;
  // Reach the state one hop from done: reveal everything, then check the
  // answer action from the frontier.
  EnvState s = root;
  const int hops = env->fixture()["graph"]["hops"].get<int>();
  for (int i = 0; i < hops; ++i) {
    const auto actions = env->valid_actions(s);
    s = env->step(s, actions[s.cursor]).state;  // search the frontier entity
  }
  CHECK(q.at(state_key(s), make_action("answer[" + answer + "]")) == 1.0);
}

TEST_CASE("oracle Q* matches independent exhaustive enumeration") {
  auto env = make_env(EnvKind::TreasureShop, 7);
  const QTable q = optimal_q_oracle(*env);
  const EnvState root = env->reset().state;
  for (const Action& a : env->valid_actions(root)) {
    const StepResult res = env->step(root, a);
    const double expected =
        res.terminal ? *res.outcome : brute_force_best(*env, res.state);
    CHECK(q.at(state_key(root), a) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("oracle satisfies the Bellman optimality recursion") {
  auto env = make_env(EnvKind::ChainQA, 4);
  const QTable q = optimal_q_oracle(*env);
  for (const auto& [key, actions] : q.q) {
    (void)key;
    for (const auto& [text, value] : actions) {
      (void)text;
      CHECK(value >= 0.0);
      CHECK(value <= 1.0);
    }
  }
  // Re-evaluate every tabulated edge against the recursion.
  std::vector<EnvState> stack{env->reset().state};
  std::set<std::string> seen{state_key(stack.back())};
  while (!stack.empty()) {
    const EnvState s = stack.back();
    stack.pop_back();
    if (s.terminal) continue;
    for (const Action& a : env->valid_actions(s)) {
      const StepResult res = env->step(s, a);
      double expected;
      if (res.terminal) {
        expected = *res.outcome;
      } else {
        expected = -1.0;
        for (const Action& b : env->valid_actions(res.state))
          expected = std::max(expected, q.at(state_key(res.state), b));
        if (seen.insert(state_key(res.state)).second) stack.push_back(res.state);
      }
      CHECK(q.at(state_key(s), a) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("oracle respects the state cap") {
  auto env = make_env(EnvKind::TreasureShop, 3);
  CHECK_THROWS_AS(optimal_q_oracle(*env, 5), std::runtime_error);
}

namespace {

// Two-armed one-step bandit: "take[a]" pays 1, "take[b]" pays 0.
class BanditEnv : public Environment {
 public:
  EnvKind kind() const override { return EnvKind::ChainQA; }
  std::uint64_t seed() const override { return 0; }
  int max_steps() const override { return 1; }
  Instruction instruction() const override {
    return Instruction{"chainqa:0", 0, "pick an arm."};
  }
  ResetResult reset() const override {
    EnvState s;
    s.kind = EnvKind::ChainQA;
    return ResetResult{s, instruction(), Observation{"two arms."}};
  }
  StepResult step(const EnvState& state, const Action& action) const override {
    if (state.terminal) throw std::invalid_argument("terminal");
    EnvState next = state;
    next.step_count += 1;
    next.terminal = true;
    const double reward = action == make_action("take[a]") ? 1.0 : 0.0;
    return StepResult{next, Observation{"done."}, true, reward};
  }
  std::vector<Action> valid_actions(const EnvState& state) const override {
    if (state.terminal) throw std::invalid_argument("terminal");
    return {make_action("take[a]"), make_action("take[b]")};
  }
  nlohmann::json fixture() const override { return {}; }
};

}  // namespace

TEST_CASE("uniform policy value on a two-action one-step task") {
  BanditEnv env;
  PolicyFn uniform = [](const EnvState&, const Observation&,
                        const std::vector<Action>& candidates) {
    return std::vector<double>(candidates.size(), 1.0 / candidates.size());
  };
  const QTable q = exact_q_oracle(env, uniform);
  CHECK(q.root_value == 0.5);
  CHECK(q.at(state_key(env.reset().state), make_action("take[a]")) == 1.0);
  CHECK(q.at(state_key(env.reset().state), make_action("take[b]")) == 0.0);
}

TEST_CASE("fixture exports are stable") {
  auto env = make_env(EnvKind::ChainQA, 30);
  const auto a = env->fixture().dump();
  const auto b = make_env(EnvKind::ChainQA, 30)->fixture().dump();
  CHECK(a == b);
  CHECK(env->fixture()["optimal_reward"].get<double>() == 1.0);
}
