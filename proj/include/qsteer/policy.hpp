#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qsteer/env.hpp"
#include "qsteer/rng.hpp"
#include "qsteer/types.hpp"

namespace qsteer {

// One decision point: the task, the interaction history so far, the valid
// candidate actions, and the observation the agent is currently looking at
// (the last step's observation, or the reset observation at the start).
struct Context {
  Instruction instruction;
  std::vector<Step> prefix;
  std::vector<Action> candidates;
  Observation last_observation;
};

Context make_context(const Instruction& instruction,
                     const std::vector<Step>& prefix,
                     const Observation& initial_observation,
                     std::vector<Action> candidates);

// ---------------------------------------------------------------------------
// Hashed n-gram featurizer
// ---------------------------------------------------------------------------

inline constexpr int kFeatureDim = 1024;
inline constexpr const char* kFeaturizerVersion = "hash1024-cross-v1";

// Sparse vector: (index, value) pairs, sorted by index, indices unique.
using SparseVec = std::vector<std::pair<int, double>>;

// Signed hashed features of a (context, action) pair: action word uni/bi-grams
// plus instruction-word x action-word and observation-word x action-word
// crosses (one FNV-1a hash; the top bit picks the sign). Pure context terms
// are omitted: they are constant across a candidate set and cancel in the
// softmax.
SparseVec featurize(const Instruction& instruction, const Observation& last_obs,
                    const Action& action, int dim = kFeatureDim);

double sparse_dot(const std::vector<double>& weights, const SparseVec& features);

// ---------------------------------------------------------------------------
// Proposers
// ---------------------------------------------------------------------------

// Anything that can supply candidate actions at a decision point. The state is
// passed alongside the context so table-driven agents can look themselves up;
// text policies ignore it.
class Proposer {
 public:
  virtual ~Proposer() = default;

  // Up to n actions, deduplicated by canonical text, first-draw order kept.
  virtual std::vector<Action> propose(const Context& context,
                                      const EnvState& state, int n,
                                      double temperature, Rng& rng) const = 0;

  // Single best-effort action (argmax for softmax policies; one draw for
  // stochastic agents).
  virtual Action greedy(const Context& context, const EnvState& state,
                        Rng& rng) const = 0;
};

// Linear softmax policy over hashed features, normalized over the context's
// candidate set. Doubles as the trainable model and its frozen reference.
class FeaturizedPolicy : public Proposer {
 public:
  FeaturizedPolicy() : weights_(kFeatureDim, 0.0) {}
  explicit FeaturizedPolicy(std::vector<double> weights);

  static FeaturizedPolicy random_init(std::uint64_t seed, double stddev = 0.5,
                                      int dim = kFeatureDim);

  int dim() const { return static_cast<int>(weights_.size()); }
  const std::vector<double>& weights() const { return weights_; }
  std::vector<double>& weights() { return weights_; }

  // {dim, weights, featurizer_version}
  nlohmann::json to_json() const;
  static FeaturizedPolicy from_json(const nlohmann::json& j);

  // Unnormalized scores theta . phi(context, a) per candidate.
  std::vector<double> logits(const Context& context) const;

  std::vector<Action> propose(const Context& context, const EnvState& state,
                              int n, double temperature, Rng& rng) const override;
  Action greedy(const Context& context, const EnvState& state,
                Rng& rng) const override;

 private:
  std::vector<double> weights_;
};

// log softmax(theta . phi / 1) over the candidate set; throws
// std::invalid_argument when the action is not a candidate.
double log_prob(const FeaturizedPolicy& policy, const Context& context,
                const Action& action);

// Log-probabilities aligned with context.candidates (temperature 1).
std::vector<double> action_log_probs(const FeaturizedPolicy& policy,
                                     const Context& context);

// Probabilities at a given sampling temperature (> 0).
std::vector<double> action_probabilities(const FeaturizedPolicy& policy,
                                         const Context& context,
                                         double temperature);

std::vector<Action> propose(const FeaturizedPolicy& policy, const Context& context,
                            int n, double temperature, Rng& rng);

namespace detail {
std::vector<double> log_softmax(std::vector<double> logits);
}

// Epsilon-noisy wrapper around the exact optimal policy of one environment:
// each draw follows the optimal action with probability 1 - epsilon and a
// uniform random candidate otherwise. epsilon = 0 reproduces the optimal
// policy exactly.
class ScriptedAgent : public Proposer {
 public:
  static ScriptedAgent make(const Environment& env, double epsilon);

  std::vector<Action> propose(const Context& context, const EnvState& state,
                              int n, double temperature, Rng& rng) const override;
  Action greedy(const Context& context, const EnvState& state,
                Rng& rng) const override;

  double epsilon() const { return epsilon_; }

 private:
  ScriptedAgent(double epsilon,
                std::shared_ptr<const std::map<std::string, Action>> table);

  Action draw(const Context& context, const EnvState& state, Rng& rng) const;

  double epsilon_ = 0.0;
  std::shared_ptr<const std::map<std::string, Action>> best_;
};

// Returns the candidate list itself (first n, canonical order). Used to force
// full-branching expansions.
class ExhaustiveProposer : public Proposer {
 public:
  std::vector<Action> propose(const Context& context, const EnvState& state,
                              int n, double temperature, Rng& rng) const override;
  Action greedy(const Context& context, const EnvState& state,
                Rng& rng) const override;
};

}  // namespace qsteer
