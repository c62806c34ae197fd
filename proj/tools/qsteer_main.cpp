// qsteer: collect step-level preference data with tree search, train a
// Q-value model on it, and evaluate Q-guided action selection on the built-in
// environments. Diagnostics go to stderr; data artifacts go to files.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "qsteer/env.hpp"
#include "qsteer/harness.hpp"

namespace {

struct Overrides {
  std::optional<int> mcts_m, mcts_n;
  std::optional<double> mcts_eta, mcts_temperature;
  std::optional<int> mcts_max_depth;
  std::optional<double> mcts_penalty;
  std::optional<std::uint64_t> mcts_seed;
  std::optional<double> dpo_beta, dpo_lr, dpo_warmup;
  std::optional<int> dpo_batch, dpo_epochs;
  std::optional<std::uint64_t> dpo_seed;
  std::optional<std::string> dpo_level, dpo_optimizer;
  std::optional<std::string> proposer_kind;
  std::optional<double> proposer_epsilon;
  std::optional<std::string> output_dir;
  std::optional<int> workers;
};

void add_override_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--mcts.m", o.mcts_m, "max search iterations");
  cmd->add_option("--mcts.n", o.mcts_n, "expansion samples per node");
  cmd->add_option("--mcts.eta", o.mcts_eta, "exploration weight");
  cmd->add_option("--mcts.temperature", o.mcts_temperature, "sampling temperature");
  cmd->add_option("--mcts.max-depth", o.mcts_max_depth, "search depth cap");
  cmd->add_option("--mcts.penalty-reward", o.mcts_penalty,
                  "reward for rollouts that hit the depth cap");
  cmd->add_option("--mcts.seed", o.mcts_seed, "search rng seed");
  cmd->add_option("--dpo.beta", o.dpo_beta, "KL weight");
  cmd->add_option("--dpo.lr", o.dpo_lr, "learning rate");
  cmd->add_option("--dpo.batch-size", o.dpo_batch, "minibatch size");
  cmd->add_option("--dpo.warmup-ratio", o.dpo_warmup, "warmup fraction");
  cmd->add_option("--dpo.epochs", o.dpo_epochs, "training epochs");
  cmd->add_option("--dpo.seed", o.dpo_seed, "training rng seed");
  cmd->add_option("--dpo.level", o.dpo_level, "step | trajectory");
  cmd->add_option("--dpo.optimizer", o.dpo_optimizer, "adaptive | sgd");
  cmd->add_option("--proposer.kind", o.proposer_kind,
                  "scripted | featurized | exhaustive | remote");
  cmd->add_option("--proposer.epsilon", o.proposer_epsilon,
                  "scripted agent noise");
  cmd->add_option("--output-dir", o.output_dir, "artifact directory");
  cmd->add_option("--workers", o.workers, "worker pool size (0 = hardware)");
}

void apply(const Overrides& o, qsteer::RunConfig& cfg) {
  if (o.mcts_m) cfg.mcts.max_iterations = *o.mcts_m;
  if (o.mcts_n) cfg.mcts.expansion_samples = *o.mcts_n;
  if (o.mcts_eta) cfg.mcts.exploration_weight = *o.mcts_eta;
  if (o.mcts_temperature) cfg.mcts.temperature = *o.mcts_temperature;
  if (o.mcts_max_depth) cfg.mcts.max_depth = *o.mcts_max_depth;
  if (o.mcts_penalty) cfg.mcts.penalty_reward = *o.mcts_penalty;
  if (o.mcts_seed) cfg.mcts.rng_seed = *o.mcts_seed;
  if (o.dpo_beta) cfg.dpo.beta = *o.dpo_beta;
  if (o.dpo_lr) cfg.dpo.learning_rate = *o.dpo_lr;
  if (o.dpo_batch) cfg.dpo.batch_size = *o.dpo_batch;
  if (o.dpo_warmup) cfg.dpo.warmup_ratio = *o.dpo_warmup;
  if (o.dpo_epochs) cfg.dpo.epochs = *o.dpo_epochs;
  if (o.dpo_seed) cfg.dpo.rng_seed = *o.dpo_seed;
  if (o.dpo_level) cfg.dpo_level = *o.dpo_level;
  if (o.dpo_optimizer)
    cfg.dpo.optimizer = qsteer::optimizer_from_string(*o.dpo_optimizer);
  if (o.proposer_kind) cfg.proposer.kind = *o.proposer_kind;
  if (o.proposer_epsilon) cfg.proposer.epsilon = *o.proposer_epsilon;
  if (o.output_dir) cfg.task.output_dir = *o.output_dir;
  if (o.workers) cfg.workers = *o.workers;
  cfg.validate();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"step-level Q-value models for text-environment agents"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides overrides;

  auto* collect = app.add_subcommand("collect", "search tasks and extract pairs");
  collect->add_option("--config", config_path, "toml config")->required();
  add_override_flags(collect, overrides);

  auto* train = app.add_subcommand("train", "fit a q-value model");
  std::string dataset_override;
  train->add_option("--config", config_path, "toml config")->required();
  train->add_option("--dataset", dataset_override, "dataset path override");
  add_override_flags(train, overrides);

  auto* evaluate = app.add_subcommand("evaluate", "run inference strategies");
  std::string checkpoint_override;
  evaluate->add_option("--config", config_path, "toml config")->required();
  evaluate->add_option("--checkpoint", checkpoint_override,
                       "checkpoint path override");
  add_override_flags(evaluate, overrides);

  auto* inspect = app.add_subcommand("inspect", "summarize an artifact");
  std::string artifact, export_dir, fixture_spec;
  inspect->add_option("--artifact", artifact,
                      "tree dump, checkpoint, or dataset file");
  inspect->add_option("--config", config_path,
                      "toml config (enables checkpoint episode sweeps)");
  inspect->add_option("--export-dir", export_dir, "where csv exports land");
  inspect->add_option("--env-fixture", fixture_spec,
                      "print an environment fixture, e.g. treasureshop:7");
  add_override_flags(inspect, overrides);

  CLI11_PARSE(app, argc, argv);

  try {
    qsteer::RunConfig config;
    const bool have_config = !config_path.empty();
    if (have_config) {
      config = qsteer::load_config(config_path);
      apply(overrides, config);
    }

    if (collect->parsed()) {
      qsteer::run_collect(config);
    } else if (train->parsed()) {
      qsteer::run_train(config, dataset_override);
    } else if (evaluate->parsed()) {
      qsteer::run_evaluate(config, checkpoint_override);
    } else if (inspect->parsed()) {
      if (!fixture_spec.empty()) {
        auto env = qsteer::env_from_task_id(fixture_spec);
        std::cout << env->fixture().dump(2) << "\n";
        return 0;
      }
      qsteer::InspectOptions options;
      options.artifact = artifact;
      options.export_dir = export_dir;
      options.config = have_config ? &config : nullptr;
      qsteer::run_inspect(options);
    }
  } catch (const std::exception& e) {
    std::cerr << "qsteer: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
