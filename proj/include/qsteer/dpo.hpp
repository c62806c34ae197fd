#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsteer/policy.hpp"
#include "qsteer/prefs.hpp"

namespace qsteer {

// Trained weights plus the frozen reference they started from. The scaled
// log-ratio beta * (log pi_theta - log pi_ref) is the action's Q score.
struct QValueModel {
  FeaturizedPolicy theta;
  FeaturizedPolicy ref;
  double beta = 0.1;
};

enum class OptimizerKind { Sgd, Adaptive };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(const std::string& name);

struct TrainConfig {
  double learning_rate = 1e-5;
  int batch_size = 16;
  double warmup_ratio = 0.1;  // fraction of total steps spent ramping lr up
  int epochs = 1;
  std::uint64_t rng_seed = 0;
  OptimizerKind optimizer = OptimizerKind::Adaptive;
  double beta = 0.1;
  // Optional behaviour-cloning warm start on win actions; both theta and the
  // reference snapshot start from its output when enabled.
  bool bc_warmstart = false;
  int bc_epochs = 1;
  double bc_learning_rate = 1e-3;

  void validate() const;  // throws std::invalid_argument
};

// A preference pair with its decision point reconstructed by environment
// replay: the context plus candidate indices of the win/lose actions.
struct StepExample {
  Context context;
  int win_index = 0;
  int lose_index = 0;
};

// A trajectory pair replayed into per-step contexts and chosen-action indices.
struct TrajectoryExample {
  std::vector<Context> win_contexts;
  std::vector<int> win_actions;
  std::vector<Context> lose_contexts;
  std::vector<int> lose_actions;
};

struct PrepareStats {
  int total = 0;
  int skipped = 0;  // pairs whose actions could not be reconstructed
};

std::vector<StepExample> prepare_step_examples(
    const std::vector<PreferencePair>& pairs, PrepareStats* stats = nullptr);

std::vector<TrajectoryExample> prepare_trajectory_examples(
    const std::vector<TrajectoryPair>& pairs, PrepareStats* stats = nullptr);

// -log sigmoid(beta * [(log pi_t(w) - log pi_r(w)) - (log pi_t(l) - log pi_r(l))]).
double step_dpo_loss(const QValueModel& model, const StepExample& example);

// Mean analytic gradient over the batch:
//   -sigmoid(-z) * beta * (grad log pi_theta(w) - grad log pi_theta(l)),
// with grad log pi_theta(a) = phi(a) - sum_b pi_theta(b) phi(b).
std::vector<double> step_dpo_grad(const QValueModel& model,
                                  const std::vector<StepExample>& batch);

// Trajectory-level variant with sequence log-probs (sum of per-step terms).
double trajectory_dpo_loss(const QValueModel& model,
                           const TrajectoryExample& example);
std::vector<double> trajectory_dpo_grad(
    const QValueModel& model, const std::vector<TrajectoryExample>& batch);

struct EpochStats {
  double mean_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> validation_accuracy;
};

struct TrainReport {
  PrepareStats prepare;
  std::vector<EpochStats> epochs;
};

// Minibatch gradient descent with linear warmup; deterministic for a fixed
// seed (seeded shuffle, fixed reduction order). Throws on empty datasets and
// on non-finite losses.
QValueModel train(const std::vector<StepExample>& dataset,
                  const TrainConfig& config,
                  const std::vector<StepExample>* validation = nullptr,
                  TrainReport* report = nullptr,
                  const FeaturizedPolicy* initial = nullptr);

QValueModel train_trajectory(const std::vector<TrajectoryExample>& dataset,
                             const TrainConfig& config,
                             TrainReport* report = nullptr);

// beta * (log pi_theta(a | context) - log pi_ref(a | context)).
double q_value(const QValueModel& model, const Context& context,
               const Action& action);

// Fraction of examples with q(win) > q(lose); ties count as incorrect.
double preference_accuracy(const QValueModel& model,
                           const std::vector<StepExample>& dataset);

// Checkpoint: {beta, theta, ref, dim, featurizer_version, train_config,
// dataset_fingerprint}.
nlohmann::json checkpoint_to_json(const QValueModel& model,
                                  const TrainConfig& config,
                                  const std::string& dataset_fingerprint);
QValueModel checkpoint_from_json(const nlohmann::json& j);

}  // namespace qsteer
