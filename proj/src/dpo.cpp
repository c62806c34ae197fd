#include "qsteer/dpo.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "qsteer/env.hpp"
#include "qsteer/rng.hpp"

namespace qsteer {

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::Sgd ? "sgd" : "adaptive";
}

OptimizerKind optimizer_from_string(const std::string& name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "adaptive") return OptimizerKind::Adaptive;
  throw std::invalid_argument("unknown optimizer: " + name);
}

void TrainConfig::validate() const {
  if (learning_rate < 0.0)
    throw std::invalid_argument("train config: learning_rate must be >= 0");
  if (batch_size < 1)
    throw std::invalid_argument("train config: batch_size must be >= 1");
  if (warmup_ratio < 0.0 || warmup_ratio >= 1.0)
    throw std::invalid_argument("train config: warmup_ratio must be in [0,1)");
  if (epochs < 0)
    throw std::invalid_argument("train config: epochs must be >= 0");
  if (beta <= 0.0)
    throw std::invalid_argument("train config: beta must be > 0");
}

namespace {

// Numerically stable -log sigmoid(z) = softplus(-z).
double neg_log_sigmoid(double z) {
  if (z >= 0.0) return std::log1p(std::exp(-z));
  return -z + std::log1p(std::exp(z));
}

// Numerically stable sigmoid.
double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct ContextScores {
  std::vector<double> theta_log_probs;
  std::vector<double> ref_log_probs;
};

ContextScores score_context(const QValueModel& model, const Context& ctx) {
  return ContextScores{action_log_probs(model.theta, ctx),
                       action_log_probs(model.ref, ctx)};
}

double step_margin(const QValueModel& model, const StepExample& ex) {
  const ContextScores s = score_context(model, ex.context);
  const double win = s.theta_log_probs[ex.win_index] - s.ref_log_probs[ex.win_index];
  const double lose =
      s.theta_log_probs[ex.lose_index] - s.ref_log_probs[ex.lose_index];
  return model.beta * (win - lose);
}

double trajectory_log_ratio(const QValueModel& model,
                            const std::vector<Context>& contexts,
                            const std::vector<int>& actions) {
  double sum = 0.0;
  for (std::size_t t = 0; t < contexts.size(); ++t) {
    const ContextScores s = score_context(model, contexts[t]);
    sum += s.theta_log_probs[actions[t]] - s.ref_log_probs[actions[t]];
  }
  return sum;
}

// grad log pi(a | ctx) accumulated into `out` with the given scale.
void accumulate_log_prob_grad(const FeaturizedPolicy& policy, const Context& ctx,
                              int action_index, double scale,
                              std::vector<double>& out) {
  std::vector<double> probs(action_log_probs(policy, ctx));
  for (double& p : probs) p = std::exp(p);
  for (std::size_t i = 0; i < ctx.candidates.size(); ++i) {
    const SparseVec phi = featurize(ctx.instruction, ctx.last_observation,
                                    ctx.candidates[i], policy.dim());
    const double coeff =
        (static_cast<int>(i) == action_index ? 1.0 : 0.0) - probs[i];
    for (const auto& [index, value] : phi) out[index] += scale * coeff * value;
  }
}

}  // namespace

double step_dpo_loss(const QValueModel& model, const StepExample& ex) {
  return neg_log_sigmoid(step_margin(model, ex));
}

std::vector<double> step_dpo_grad(const QValueModel& model,
                                  const std::vector<StepExample>& batch) {
  if (batch.empty()) throw std::invalid_argument("step_dpo_grad: empty batch");
  std::vector<double> grad(model.theta.dim(), 0.0);
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const StepExample& ex : batch) {
    const double z = step_margin(model, ex);
    const double scale = -sigmoid(-z) * model.beta * inv;
    accumulate_log_prob_grad(model.theta, ex.context, ex.win_index, scale, grad);
    accumulate_log_prob_grad(model.theta, ex.context, ex.lose_index, -scale,
                             grad);
  }
  return grad;
}

double trajectory_dpo_loss(const QValueModel& model,
                           const TrajectoryExample& ex) {
  const double z =
      model.beta * (trajectory_log_ratio(model, ex.win_contexts, ex.win_actions) -
                    trajectory_log_ratio(model, ex.lose_contexts, ex.lose_actions));
  return neg_log_sigmoid(z);
}

std::vector<double> trajectory_dpo_grad(
    const QValueModel& model, const std::vector<TrajectoryExample>& batch) {
  if (batch.empty())
    throw std::invalid_argument("trajectory_dpo_grad: empty batch");
  std::vector<double> grad(model.theta.dim(), 0.0);
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const TrajectoryExample& ex : batch) {
    const double z = model.beta *
                     (trajectory_log_ratio(model, ex.win_contexts, ex.win_actions) -
                      trajectory_log_ratio(model, ex.lose_contexts, ex.lose_actions));
    const double scale = -sigmoid(-z) * model.beta * inv;
    for (std::size_t t = 0; t < ex.win_contexts.size(); ++t)
      accumulate_log_prob_grad(model.theta, ex.win_contexts[t],
                               ex.win_actions[t], scale, grad);
    for (std::size_t t = 0; t < ex.lose_contexts.size(); ++t)
      accumulate_log_prob_grad(model.theta, ex.lose_contexts[t],
                               ex.lose_actions[t], -scale, grad);
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Replay preparation
// ---------------------------------------------------------------------------

namespace {

int index_of(const std::vector<Action>& candidates, const Action& action) {
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (candidates[i] == action) return static_cast<int>(i);
  return -1;
}

// Replays prefix actions in the pair's environment; returns the context at
// the end of the prefix, or nullopt when the replay terminates early.
std::optional<Context> replay_prefix(const Environment& env,
                                     const std::vector<Step>& prefix) {
  const ResetResult rr = env.reset();
  EnvState state = rr.state;
  for (const Step& step : prefix) {
    if (state.terminal) return std::nullopt;
    state = env.step(state, step.action).state;
  }
  if (state.terminal) return std::nullopt;
  return make_context(rr.instruction, prefix, rr.observation,
                      env.valid_actions(state));
}

}  // namespace

std::vector<StepExample> prepare_step_examples(
    const std::vector<PreferencePair>& pairs, PrepareStats* stats) {
  PrepareStats local;
  std::vector<StepExample> out;
  for (const PreferencePair& pair : pairs) {
    local.total += 1;
    try {
      auto env = env_from_task_id(pair.task_id);
      std::optional<Context> ctx = replay_prefix(*env, pair.prefix);
      if (!ctx) {
        local.skipped += 1;
        continue;
      }
      const int win = index_of(ctx->candidates, pair.win_action);
      const int lose = index_of(ctx->candidates, pair.lose_action);
      if (win < 0 || lose < 0 || win == lose) {
        local.skipped += 1;
        continue;
      }
      out.push_back(StepExample{std::move(*ctx), win, lose});
    } catch (const std::exception&) {
      local.skipped += 1;
    }
  }
  if (stats) *stats = local;
  return out;
}

std::vector<TrajectoryExample> prepare_trajectory_examples(
    const std::vector<TrajectoryPair>& pairs, PrepareStats* stats) {
  PrepareStats local;
  std::vector<TrajectoryExample> out;

  auto replay_trajectory = [](const Environment& env, const Trajectory& traj,
                              std::vector<Context>& contexts,
                              std::vector<int>& actions) -> bool {
    const ResetResult rr = env.reset();
    EnvState state = rr.state;
    std::vector<Step> prefix;
    for (const Step& step : traj.steps) {
      if (state.terminal) return false;
      Context ctx = make_context(rr.instruction, prefix, rr.observation,
                                 env.valid_actions(state));
      const int idx = index_of(ctx.candidates, step.action);
      if (idx < 0) return false;
      contexts.push_back(std::move(ctx));
      actions.push_back(idx);
      state = env.step(state, step.action).state;
      prefix.push_back(step);
    }
    return !contexts.empty();
  };

  for (const TrajectoryPair& pair : pairs) {
    local.total += 1;
    try {
      auto env = env_from_task_id(pair.task_id);
      TrajectoryExample ex;
      if (replay_trajectory(*env, pair.win, ex.win_contexts, ex.win_actions) &&
          replay_trajectory(*env, pair.lose, ex.lose_contexts, ex.lose_actions)) {
        out.push_back(std::move(ex));
      } else {
        local.skipped += 1;
      }
    } catch (const std::exception&) {
      local.skipped += 1;
    }
  }
  if (stats) *stats = local;
  return out;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace {

struct Optimizer {
  const TrainConfig& cfg;
  int total_steps;
  int warmup_steps;
  int t = 0;
  std::vector<double> m, v;
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  Optimizer(const TrainConfig& cfg, int total_steps, int dim)
      : cfg(cfg),
        total_steps(total_steps),
        warmup_steps(std::max(
            1, static_cast<int>(std::lround(cfg.warmup_ratio * total_steps)))),
        m(dim, 0.0),
        v(dim, 0.0) {}

  void apply(std::vector<double>& weights, const std::vector<double>& grad) {
    t += 1;
    const double lr =
        cfg.learning_rate *
        std::min(1.0, static_cast<double>(t) / static_cast<double>(warmup_steps));
    if (cfg.optimizer == OptimizerKind::Sgd) {
      for (std::size_t i = 0; i < weights.size(); ++i)
        weights[i] -= lr * grad[i];
      return;
    }
    const double bc1 = 1.0 - std::pow(kBeta1, t);
    const double bc2 = 1.0 - std::pow(kBeta2, t);
    for (std::size_t i = 0; i < weights.size(); ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * grad[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      weights[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kEps);
    }
  }
};

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t j = i + rng.next_below(n - i);
    std::swap(order[i], order[j]);
  }
  return order;
}

// Behaviour cloning on win actions: plain cross-entropy ascent.
FeaturizedPolicy bc_fit(const std::vector<StepExample>& dataset,
                        const TrainConfig& cfg) {
  FeaturizedPolicy policy;
  Rng rng(mix_seed(0xBC01u, cfg.rng_seed));
  for (int epoch = 0; epoch < cfg.bc_epochs; ++epoch) {
    const auto order = shuffled_indices(dataset.size(), rng);
    for (std::size_t idx : order) {
      const StepExample& ex = dataset[idx];
      std::vector<double> grad(policy.dim(), 0.0);
      accumulate_log_prob_grad(policy, ex.context, ex.win_index, 1.0, grad);
      for (int i = 0; i < policy.dim(); ++i)
        policy.weights()[i] += cfg.bc_learning_rate * grad[i];
    }
  }
  return policy;
}

template <typename Example>
QValueModel run_training(
    const std::vector<Example>& dataset, const TrainConfig& cfg,
    const std::vector<StepExample>* validation, TrainReport* report,
    const FeaturizedPolicy* initial,
    double (*loss_fn)(const QValueModel&, const Example&),
    std::vector<double> (*grad_fn)(const QValueModel&,
                                   const std::vector<Example>&),
    double (*accuracy_fn)(const QValueModel&, const std::vector<Example>&)) {
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");

  FeaturizedPolicy init = initial ? *initial : FeaturizedPolicy();
  QValueModel model{init, init, cfg.beta};

  const int batches_per_epoch = static_cast<int>(
      (dataset.size() + cfg.batch_size - 1) / cfg.batch_size);
  const int total_steps = std::max(1, cfg.epochs * batches_per_epoch);
  Optimizer opt(cfg, total_steps, model.theta.dim());
  Rng rng(mix_seed(0xD901u, cfg.rng_seed));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = shuffled_indices(dataset.size(), rng);
    double loss_sum = 0.0;
    int batch_count = 0;
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      std::vector<Example> batch;
      for (std::size_t i = start;
           i < std::min(order.size(), start + cfg.batch_size); ++i)
        batch.push_back(dataset[order[i]]);

      double batch_loss = 0.0;
      for (const Example& ex : batch) batch_loss += loss_fn(model, ex);
      batch_loss /= static_cast<double>(batch.size());
      if (!std::isfinite(batch_loss))
        throw std::runtime_error(
            "train: non-finite loss at epoch " + std::to_string(epoch) +
            ", batch " + std::to_string(batch_count));

      const std::vector<double> grad = grad_fn(model, batch);
      opt.apply(model.theta.weights(), grad);
      loss_sum += batch_loss;
      batch_count += 1;
    }
    if (report) {
      EpochStats stats;
      stats.mean_loss = batch_count ? loss_sum / batch_count : 0.0;
      stats.train_accuracy = accuracy_fn(model, dataset);
      if (validation)
        stats.validation_accuracy = preference_accuracy(model, *validation);
      report->epochs.push_back(stats);
    }
  }
  return model;
}

double trajectory_accuracy(const QValueModel& model,
                           const std::vector<TrajectoryExample>& dataset) {
  if (dataset.empty()) return 0.0;
  int correct = 0;
  for (const TrajectoryExample& ex : dataset) {
    const double margin =
        trajectory_log_ratio(model, ex.win_contexts, ex.win_actions) -
        trajectory_log_ratio(model, ex.lose_contexts, ex.lose_actions);
    if (margin > 0.0) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

}  // namespace

QValueModel train(const std::vector<StepExample>& dataset,
                  const TrainConfig& config,
                  const std::vector<StepExample>* validation,
                  TrainReport* report, const FeaturizedPolicy* initial) {
  FeaturizedPolicy warm;
  const FeaturizedPolicy* init = initial;
  if (config.bc_warmstart && initial == nullptr) {
    warm = bc_fit(dataset, config);
    init = &warm;
  }
  return run_training<StepExample>(dataset, config, validation, report, init,
                                   &step_dpo_loss, &step_dpo_grad,
                                   &preference_accuracy);
}

QValueModel train_trajectory(const std::vector<TrajectoryExample>& dataset,
                             const TrainConfig& config, TrainReport* report) {
  return run_training<TrajectoryExample>(
      dataset, config, nullptr, report, nullptr, &trajectory_dpo_loss,
      &trajectory_dpo_grad, &trajectory_accuracy);
}

double q_value(const QValueModel& model, const Context& context,
               const Action& action) {
  return model.beta * (log_prob(model.theta, context, action) -
                       log_prob(model.ref, context, action));
}

double preference_accuracy(const QValueModel& model,
                           const std::vector<StepExample>& dataset) {
  if (dataset.empty()) return 0.0;
  int correct = 0;
  for (const StepExample& ex : dataset)
    if (step_margin(model, ex) > 0.0) ++correct;
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

nlohmann::json checkpoint_to_json(const QValueModel& model,
                                  const TrainConfig& config,
                                  const std::string& dataset_fingerprint) {
  return {{"beta", model.beta},
          {"theta", model.theta.weights()},
          {"ref", model.ref.weights()},
          {"dim", model.theta.dim()},
          {"featurizer_version", kFeaturizerVersion},
          {"train_config",
           {{"learning_rate", config.learning_rate},
            {"batch_size", config.batch_size},
            {"warmup_ratio", config.warmup_ratio},
            {"epochs", config.epochs},
            {"rng_seed", config.rng_seed},
            {"optimizer", to_string(config.optimizer)},
            {"beta", config.beta},
            {"bc_warmstart", config.bc_warmstart}}},
          {"dataset_fingerprint", dataset_fingerprint}};
}

QValueModel checkpoint_from_json(const nlohmann::json& j) {
  const std::string version = j.at("featurizer_version").get<std::string>();
  if (version != kFeaturizerVersion)
    throw std::runtime_error("checkpoint: featurizer version mismatch: " +
                             version);
  QValueModel model;
  model.beta = j.at("beta").get<double>();
  model.theta = FeaturizedPolicy(j.at("theta").get<std::vector<double>>());
  model.ref = FeaturizedPolicy(j.at("ref").get<std::vector<double>>());
  if (model.theta.dim() != j.at("dim").get<int>() ||
      model.ref.dim() != j.at("dim").get<int>())
    throw std::runtime_error("checkpoint: weight length does not match dim");
  return model;
}

}  // namespace qsteer
