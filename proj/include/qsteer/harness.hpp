#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "qsteer/dpo.hpp"
#include "qsteer/mcts.hpp"
#include "qsteer/prefs.hpp"
#include "qsteer/rollout.hpp"

namespace qsteer {

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

struct TaskConfig {
  EnvKind env = EnvKind::TreasureShop;
  std::uint64_t train_seed_start = 0;
  int train_tasks = 250;
  std::uint64_t val_seed_start = 10000;
  int val_tasks = 100;
  std::uint64_t test_seed_start = 20000;
  int test_tasks = 100;
  std::string output_dir = "out";
};

struct ProposerConfig {
  std::string kind = "scripted";  // scripted | featurized | exhaustive | remote
  double epsilon = 0.3;           // scripted
  std::string weights_file;       // featurized: optional weight checkpoint
  std::uint64_t random_init_seed = 0;  // featurized: nonzero -> gaussian init
  std::string base_url;           // remote
  std::string model = "qsteer-proposer";
};

struct EvalConfig {
  std::vector<std::string> strategies = {"greedy", "q_guided"};
  std::vector<int> n_values = {1, 3, 5, 7};
  std::uint64_t episode_seed = 1234;
};

struct RunConfig {
  TaskConfig task;
  ProposerConfig proposer;
  SearchConfig mcts;
  TrainConfig dpo;
  std::string dpo_level = "step";  // step | trajectory
  int trajectory_k = 2;            // lose trajectories kept per tree
  EvalConfig eval;
  int workers = 0;  // 0: hardware concurrency

  void validate() const;          // throws; includes split-disjointness
  nlohmann::json to_json() const; // fully resolved, for provenance
};

// ---------------------------------------------------------------------------
// TOML subset
// ---------------------------------------------------------------------------

// Value of the supported TOML subset: strings, integers, floats, booleans and
// flat arrays of those. Tables are one level deep ([section] headers only).
using TomlValue =
    std::variant<std::string, std::int64_t, double, bool,
                 std::vector<std::string>, std::vector<std::int64_t>>;

// Parses the subset into "section.key" -> value. Throws std::runtime_error
// with a line number on malformed input.
std::map<std::string, TomlValue> parse_toml(const std::string& text);

RunConfig config_from_toml(const std::string& text);
RunConfig load_config(const std::string& path);

// ---------------------------------------------------------------------------
// Pipelines
// ---------------------------------------------------------------------------

ProposerFactory make_proposer_factory(const ProposerConfig& config);

struct CollectResult {
  std::vector<PreferencePair> pairs;
  std::vector<TrajectoryPair> trajectory_pairs;
  std::vector<nlohmann::json> trees;  // ordered by task index
  int tasks_attempted = 0;
  int tasks_failed = 0;
  int trees_with_terminals = 0;
  int early_stopped = 0;
};

// Runs one search per task seed and extracts preference data. Per-task rng
// streams derive from (mcts.rng_seed, task seed), so results do not depend on
// worker scheduling.
CollectResult collect_preferences(EnvKind kind, std::uint64_t seed_start,
                                  int count, const ProposerConfig& proposer,
                                  const SearchConfig& mcts, int trajectory_k,
                                  int workers);

// collect: writes pairs.jsonl, pairs_val.jsonl, trajectory_pairs.jsonl,
// trees.jsonl and collect_report.json under the output directory.
void run_collect(const RunConfig& config);

// train: reads the collected datasets, trains the configured level, writes
// checkpoint.json and curves.csv.
void run_train(const RunConfig& config, const std::string& dataset_override = "");

// evaluate: runs the configured strategies over the test split and writes
// metrics.csv / metrics.json / per_task.jsonl.
void run_evaluate(const RunConfig& config,
                  const std::string& checkpoint_override = "");

// inspect: artifact summaries. For checkpoints an episode sweep exports
// q_histogram.csv (label,q) drawn from successful vs failed episodes.
struct InspectOptions {
  std::string artifact;     // file to inspect
  std::string export_dir;   // where csv exports land (default: alongside)
  const RunConfig* config = nullptr;  // required for checkpoint episode sweeps
};
void run_inspect(const InspectOptions& options);

// FNV-1a of a file's bytes, hex-encoded. Used as the dataset fingerprint.
std::string file_fingerprint(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace qsteer
