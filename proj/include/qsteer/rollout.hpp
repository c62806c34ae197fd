#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "qsteer/dpo.hpp"
#include "qsteer/env.hpp"
#include "qsteer/policy.hpp"

namespace qsteer {

enum class Strategy { Greedy, Sample, BestOfN, QGuided };

std::string to_string(Strategy strategy);
Strategy strategy_from_string(const std::string& name);

struct EpisodeResult {
  Trajectory trajectory;
  double reward = 0.0;
  Strategy strategy = Strategy::Greedy;
  int n_used = 1;
  int proposal_calls = 0;  // cost accounting
};

// One best-effort action per step, run to termination or the step cap.
EpisodeResult greedy_episode(const Environment& env, const Proposer& policy,
                             Rng& rng);

// One temperature sample per step.
EpisodeResult sample_episode(const Environment& env, const Proposer& policy,
                             double temperature, Rng& rng);

// n independent sampled trajectories; keeps the one with the highest outcome
// (ties keep the earliest). Uses privileged reward access: evaluation only.
EpisodeResult best_of_n_episode(const Environment& env, const Proposer& policy,
                                int n, Rng& rng);

// At each step: propose n candidates at temperature 1, score each with the
// Q-value model, execute the argmax (ties break toward the first proposed).
// Single trial; the environment outcome is only observed at the end.
EpisodeResult q_guided_episode(const Environment& env, const Proposer& policy,
                               const QValueModel& model, int n, Rng& rng);

// ---------------------------------------------------------------------------
// Evaluation suite
// ---------------------------------------------------------------------------

struct SuiteSpec {
  Strategy strategy = Strategy::Greedy;
  int n = 1;
  const QValueModel* model = nullptr;  // required for QGuided
  std::string label;                   // defaults to the strategy name
};

struct SuiteRow {
  std::string label;
  int n = 1;
  double mean_reward = 0.0;
  double stderr_reward = 0.0;
  int num_tasks = 0;
};

struct SuiteResult {
  std::vector<SuiteRow> rows;
  // rows x tasks reward matrix for paired analysis.
  std::vector<std::vector<double>> per_task;
  std::vector<std::uint64_t> task_seeds;
};

using ProposerFactory =
    std::function<std::unique_ptr<Proposer>(const Environment&)>;

// Runs every spec on every task seed; per-episode rng streams are derived
// from (episode_seed, task seed, spec index) so results are deterministic and
// task-paired across specs. Tasks run on a bounded worker pool; aggregation
// order is fixed.
SuiteResult evaluate_suite(EnvKind kind, const std::vector<SuiteSpec>& specs,
                           const ProposerFactory& make_proposer,
                           const std::vector<std::uint64_t>& task_seeds,
                           std::uint64_t episode_seed, int workers = 0);

void write_metrics_csv(const SuiteResult& result, const std::string& path);
void write_metrics_json(const SuiteResult& result, const std::string& path);
void write_per_task_jsonl(const SuiteResult& result, EnvKind kind,
                          const std::string& path);

// Deterministic-order parallel map: applies fn(0..count-1) on a worker pool
// and returns when all calls finish. workers <= 0 uses the hardware count.
void parallel_for(int count, const std::function<void(int)>& fn, int workers);

}  // namespace qsteer
