#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsteer/types.hpp"

namespace qsteer {

constexpr int kTreasureShopMaxSteps = 10;
constexpr int kChainQaMaxSteps = 7;

// Progress record for one episode. The (page, cursor) pair is interpreted by
// the owning environment kind:
//   TreasureShop: page = {0 search, 1 results, 2 item, 3 done}, cursor =
//                 keyword slot or item id;
//   ChainQA:      cursor = deepest revealed chain index.
// States are plain values; snapshotting a state and stepping the copy later
// is always valid.
struct EnvState {
  EnvKind kind = EnvKind::TreasureShop;
  std::uint64_t seed = 0;
  int step_count = 0;
  bool terminal = false;
  int page = 0;
  int cursor = 0;

  bool operator==(const EnvState&) const = default;
};

// Stable serialization of the progress record, used as an oracle/table key.
std::string state_key(const EnvState& state);

struct ResetResult {
  EnvState state;
  Instruction instruction;
  Observation observation;
};

struct StepResult {
  EnvState state;
  Observation observation;
  bool terminal = false;
  std::optional<double> outcome;  // set only on the terminal transition
};

// Deterministic, enumerable text environment with a sparse terminal reward.
// Instances are immutable after construction; all episode state lives in
// EnvState values, so one environment can serve many concurrent episodes.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual EnvKind kind() const = 0;
  virtual std::uint64_t seed() const = 0;
  virtual int max_steps() const = 0;
  virtual Instruction instruction() const = 0;

  virtual ResetResult reset() const = 0;

  // Deterministic transition. Invalid actions keep the progress record,
  // return an "invalid action." observation and still consume a step.
  // Throws std::invalid_argument when called on a terminal state.
  virtual StepResult step(const EnvState& state, const Action& action) const = 0;

  // Non-empty, deterministic, canonical-order candidate list (<= 16 entries).
  // Throws std::invalid_argument on terminal states.
  virtual std::vector<Action> valid_actions(const EnvState& state) const = 0;

  // Golden-test fixture: {env_kind, seed, instruction_text, catalog|graph,
  // optimal_reward}.
  virtual nlohmann::json fixture() const = 0;
};

std::unique_ptr<Environment> make_env(EnvKind kind, std::uint64_t seed);

// Task ids look like "treasureshop:42"; this rebuilds the environment they
// name. Throws on malformed ids.
std::unique_ptr<Environment> env_from_task_id(const std::string& task_id);

// ---------------------------------------------------------------------------
// Exact Q oracles (brute force over the reachable state graph)
// ---------------------------------------------------------------------------

// Action distribution of a policy at a state, conditioned on the observation
// that led there. Must return one probability per candidate, summing to 1.
using PolicyFn = std::function<std::vector<double>(
    const EnvState& state, const Observation& last_obs,
    const std::vector<Action>& candidates)>;

struct QTable {
  // state_key -> action text -> exact expected terminal outcome.
  std::map<std::string, std::map<std::string, double>> q;
  std::size_t reachable_states = 0;
  double root_value = 0.0;

  double at(const std::string& key, const Action& action) const;  // throws if absent
};

// Expected terminal outcome of taking each action and following `policy`
// afterwards, by backward induction over the reachable graph (transitions are
// deterministic; the expectation is over the policy's own draws). Only
// (state, action) pairs reachable with positive probability are tabulated.
// Throws when more than `max_states` states are enumerated.
QTable exact_q_oracle(const Environment& env, const PolicyFn& policy,
                      std::size_t max_states = 50000);

QTable exact_q_oracle(EnvKind kind, std::uint64_t seed, const PolicyFn& policy,
                      std::size_t max_states = 50000);

// Optimal Q*: the max-over-actions recursion. Covers every reachable state.
QTable optimal_q_oracle(const Environment& env, std::size_t max_states = 50000);

// state_key -> argmax-Q* action; ties broken by earliest candidate order.
std::map<std::string, Action> optimal_action_table(const Environment& env,
                                                   const QTable& optimal);

}  // namespace qsteer
