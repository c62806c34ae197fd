#include "qsteer/rollout.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "qsteer/stats.hpp"

namespace qsteer {

std::string to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::Greedy:
      return "greedy";
    case Strategy::Sample:
      return "sample";
    case Strategy::BestOfN:
      return "best_of_n";
    case Strategy::QGuided:
      return "q_guided";
  }
  return "unknown";
}

Strategy strategy_from_string(const std::string& name) {
  if (name == "greedy") return Strategy::Greedy;
  if (name == "sample") return Strategy::Sample;
  if (name == "best_of_n") return Strategy::BestOfN;
  if (name == "q_guided") return Strategy::QGuided;
  throw std::invalid_argument("unknown strategy: " + name);
}

namespace {

// Shared episode loop: `choose` picks one action per decision point.
EpisodeResult run_episode(
    const Environment& env, Strategy strategy, int n_used,
    const std::function<Action(const Context&, const EnvState&, int&)>& choose) {
  const ResetResult rr = env.reset();
  EpisodeResult result;
  result.strategy = strategy;
  result.n_used = n_used;
  result.trajectory.instruction = rr.instruction;

  EnvState state = rr.state;
  int proposal_calls = 0;
  while (!state.terminal) {
    const Context ctx =
        make_context(rr.instruction, result.trajectory.steps, rr.observation,
                     env.valid_actions(state));
    const Action action = choose(ctx, state, proposal_calls);
    const StepResult res = env.step(state, action);
    result.trajectory.steps.push_back(Step{action, res.observation});
    state = res.state;
    if (res.terminal) {
      result.reward = *res.outcome;
      result.trajectory.outcome = res.outcome;
    }
  }
  result.proposal_calls = proposal_calls;
  return result;
}

}  // namespace

EpisodeResult greedy_episode(const Environment& env, const Proposer& policy,
                             Rng& rng) {
  return run_episode(env, Strategy::Greedy, 1,
                     [&](const Context& ctx, const EnvState& state, int& calls) {
                       calls += 1;
                       return policy.greedy(ctx, state, rng);
                     });
}

EpisodeResult sample_episode(const Environment& env, const Proposer& policy,
                             double temperature, Rng& rng) {
  return run_episode(env, Strategy::Sample, 1,
                     [&](const Context& ctx, const EnvState& state, int& calls) {
                       calls += 1;
                       return policy.propose(ctx, state, 1, temperature, rng)
                           .front();
                     });
}

EpisodeResult best_of_n_episode(const Environment& env, const Proposer& policy,
                                int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("best_of_n: n must be >= 1");
  EpisodeResult best;
  int proposal_calls = 0;
  for (int i = 0; i < n; ++i) {
    EpisodeResult trial = sample_episode(env, policy, 1.0, rng);
    proposal_calls += trial.proposal_calls;
    if (i == 0 || trial.reward > best.reward) best = std::move(trial);
  }
  best.strategy = Strategy::BestOfN;
  best.n_used = n;
  best.proposal_calls = proposal_calls;
  return best;
}

EpisodeResult q_guided_episode(const Environment& env, const Proposer& policy,
                               const QValueModel& model, int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("q_guided: n must be >= 1");
  EpisodeResult result = run_episode(
      env, Strategy::QGuided, n,
      [&](const Context& ctx, const EnvState& state, int& calls) {
        calls += 1;
        const std::vector<Action> proposals =
            policy.propose(ctx, state, n, 1.0, rng);
        Action best = proposals.front();
        bool scored = false;
        double best_q = 0.0;
        for (const Action& a : proposals) {
          // Proposals outside the candidate set (possible with remote
          // proposers) are not scoreable; they only run if nothing scores.
          if (std::find(ctx.candidates.begin(), ctx.candidates.end(), a) ==
              ctx.candidates.end())
            continue;
          const double q = q_value(model, ctx, a);
          if (!scored || q > best_q) {  // strict: ties keep the first proposed
            scored = true;
            best_q = q;
            best = a;
          }
        }
        return best;
      });
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation suite
// ---------------------------------------------------------------------------

void parallel_for(int count, const std::function<void(int)>& fn, int workers) {
  if (count <= 0) return;
  int pool = workers > 0 ? workers
                         : static_cast<int>(std::thread::hardware_concurrency());
  pool = std::max(1, std::min(pool, count));
  if (pool == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> threads;
  threads.reserve(pool);
  for (int w = 0; w < pool; ++w) {
    threads.emplace_back([&]() {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= count) return;
        fn(i);
      }
    });
  }
  for (std::thread& t : threads) t.join();
}

SuiteResult evaluate_suite(EnvKind kind, const std::vector<SuiteSpec>& specs,
                           const ProposerFactory& make_proposer,
                           const std::vector<std::uint64_t>& task_seeds,
                           std::uint64_t episode_seed, int workers) {
  if (task_seeds.empty())
    throw std::invalid_argument("evaluate_suite: no task seeds");
  for (const SuiteSpec& spec : specs)
    if (spec.strategy == Strategy::QGuided && spec.model == nullptr)
      throw std::invalid_argument("evaluate_suite: q_guided without a model");

  SuiteResult result;
  result.task_seeds = task_seeds;
  result.per_task.assign(specs.size(),
                         std::vector<double>(task_seeds.size(), 0.0));

  parallel_for(
      static_cast<int>(task_seeds.size()),
      [&](int task_index) {
        auto env = make_env(kind, task_seeds[task_index]);
        auto proposer = make_proposer(*env);
        for (std::size_t s = 0; s < specs.size(); ++s) {
          const SuiteSpec& spec = specs[s];
          Rng rng(mix_seed(episode_seed, task_seeds[task_index],
                           static_cast<std::uint64_t>(s)));
          EpisodeResult episode;
          switch (spec.strategy) {
            case Strategy::Greedy:
              episode = greedy_episode(*env, *proposer, rng);
              break;
            case Strategy::Sample:
              episode = sample_episode(*env, *proposer, 1.0, rng);
              break;
            case Strategy::BestOfN:
              episode = best_of_n_episode(*env, *proposer, spec.n, rng);
              break;
            case Strategy::QGuided:
              episode = q_guided_episode(*env, *proposer, *spec.model, spec.n,
                                         rng);
              break;
          }
          result.per_task[s][task_index] = episode.reward;
        }
      },
      workers);

  for (std::size_t s = 0; s < specs.size(); ++s) {
    SuiteRow row;
    row.label = specs[s].label.empty() ? to_string(specs[s].strategy)
                                       : specs[s].label;
    row.n = specs[s].n;
    row.mean_reward = mean(result.per_task[s]);
    row.stderr_reward = standard_error(result.per_task[s]);
    row.num_tasks = static_cast<int>(task_seeds.size());
    result.rows.push_back(std::move(row));
  }
  return result;
}

namespace {

std::string f64(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_metrics_csv(const SuiteResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "strategy,n,mean_reward,stderr,num_tasks\n";
  for (const SuiteRow& row : result.rows)
    out << row.label << ',' << row.n << ',' << f64(row.mean_reward) << ','
        << f64(row.stderr_reward) << ',' << row.num_tasks << '\n';
}

void write_metrics_json(const SuiteResult& result, const std::string& path) {
  nlohmann::json rows = nlohmann::json::array();
  for (const SuiteRow& row : result.rows)
    rows.push_back({{"strategy", row.label},
                    {"n", row.n},
                    {"mean_reward", row.mean_reward},
                    {"stderr", row.stderr_reward},
                    {"num_tasks", row.num_tasks}});
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << nlohmann::json({{"rows", rows}}).dump(2) << '\n';
}

void write_per_task_jsonl(const SuiteResult& result, EnvKind kind,
                          const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (std::size_t s = 0; s < result.rows.size(); ++s) {
    for (std::size_t t = 0; t < result.task_seeds.size(); ++t) {
      out << "{\"strategy\":" << nlohmann::json(result.rows[s].label).dump()
          << ",\"n\":" << result.rows[s].n << ",\"task_id\":\""
          << to_string(kind) << ':' << result.task_seeds[t] << "\",\"reward\":"
          << f64(result.per_task[s][t]) << "}\n";
    }
  }
}

}  // namespace qsteer
