#include "qsteer/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "qsteer/remote.hpp"
#include "qsteer/stats.hpp"
#include "qsteer/text.hpp"

namespace fs = std::filesystem;

namespace qsteer {

namespace {

std::string f64(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void check_range_overlap(std::uint64_t a_start, int a_count,
                         std::uint64_t b_start, int b_count,
                         const std::string& what) {
  const std::uint64_t a_end = a_start + static_cast<std::uint64_t>(a_count);
  const std::uint64_t b_end = b_start + static_cast<std::uint64_t>(b_count);
  if (a_start < b_end && b_start < a_end)
    throw std::invalid_argument("config: seed ranges overlap: " + what);
}

}  // namespace

void RunConfig::validate() const {
  if (task.train_tasks < 0 || task.val_tasks < 0 || task.test_tasks < 0)
    throw std::invalid_argument("config: task counts must be >= 0");
  check_range_overlap(task.train_seed_start, task.train_tasks,
                      task.val_seed_start, task.val_tasks, "train/validation");
  check_range_overlap(task.train_seed_start, task.train_tasks,
                      task.test_seed_start, task.test_tasks, "train/test");
  check_range_overlap(task.val_seed_start, task.val_tasks,
                      task.test_seed_start, task.test_tasks, "validation/test");
  mcts.validate();
  dpo.validate();
  if (dpo_level != "step" && dpo_level != "trajectory")
    throw std::invalid_argument("config: dpo.level must be step or trajectory");
  if (proposer.kind != "scripted" && proposer.kind != "featurized" &&
      proposer.kind != "exhaustive" && proposer.kind != "remote")
    throw std::invalid_argument("config: unknown proposer kind " + proposer.kind);
  if (trajectory_k < 0)
    throw std::invalid_argument("config: trajectory_k must be >= 0");
  for (const std::string& s : eval.strategies) strategy_from_string(s);
  for (int n : eval.n_values)
    if (n < 1) throw std::invalid_argument("config: n_values must be >= 1");
}

nlohmann::json RunConfig::to_json() const {
  return {{"task",
           {{"env", to_string(task.env)},
            {"train_seed_start", task.train_seed_start},
            {"train_tasks", task.train_tasks},
            {"val_seed_start", task.val_seed_start},
            {"val_tasks", task.val_tasks},
            {"test_seed_start", task.test_seed_start},
            {"test_tasks", task.test_tasks},
            {"output_dir", task.output_dir}}},
          {"proposer",
           {{"kind", proposer.kind},
            {"epsilon", proposer.epsilon},
            {"weights_file", proposer.weights_file},
            {"random_init_seed", proposer.random_init_seed},
            {"base_url", proposer.base_url},
            {"model", proposer.model}}},
          {"mcts",
           {{"m", mcts.max_iterations},
            {"n", mcts.expansion_samples},
            {"eta", mcts.exploration_weight},
            {"temperature", mcts.temperature},
            {"max_depth", mcts.max_depth},
            {"penalty_reward", mcts.penalty_reward},
            {"seed", mcts.rng_seed}}},
          {"dpo",
           {{"beta", dpo.beta},
            {"learning_rate", dpo.learning_rate},
            {"batch_size", dpo.batch_size},
            {"warmup_ratio", dpo.warmup_ratio},
            {"epochs", dpo.epochs},
            {"seed", dpo.rng_seed},
            {"optimizer", to_string(dpo.optimizer)},
            {"level", dpo_level},
            {"bc_warmstart", dpo.bc_warmstart}}},
          {"collect", {{"trajectory_k", trajectory_k}}},
          {"eval",
           {{"strategies", eval.strategies},
            {"n_values", eval.n_values},
            {"episode_seed", eval.episode_seed}}},
          {"run", {{"workers", workers}}}};
}

// ---------------------------------------------------------------------------
// TOML subset parser
// ---------------------------------------------------------------------------

namespace {

std::string strip(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// Removes a trailing comment that is not inside a double-quoted string.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

[[noreturn]] void fail(int line_no, const std::string& message) {
  throw std::runtime_error("toml: line " + std::to_string(line_no) + ": " +
                           message);
}

bool looks_like_int(const std::string& s) {
  if (s.empty()) return false;
  std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size()) return false;
  for (; i < s.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  return true;
}

bool looks_like_float(const std::string& s) {
  if (s.empty()) return false;
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

TomlValue parse_scalar(const std::string& raw, int line_no) {
  const std::string s = strip(raw);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    // Reuse the JSON string grammar for escapes.
    try {
      return nlohmann::json::parse(s).get<std::string>();
    } catch (const nlohmann::json::exception&) {
      fail(line_no, "bad string literal " + s);
    }
  }
  if (s == "true") return true;
  if (s == "false") return false;
  if (looks_like_int(s)) return static_cast<std::int64_t>(std::stoll(s));
  if (looks_like_float(s)) return std::stod(s);
  fail(line_no, "unrecognized value " + s);
}

std::vector<std::string> split_array_items(const std::string& body,
                                           int line_no) {
  std::vector<std::string> items;
  std::string current;
  bool in_string = false;
  for (char c : body) {
    if (c == '"') in_string = !in_string;
    if (c == ',' && !in_string) {
      items.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (in_string) fail(line_no, "unterminated string in array");
  if (!strip(current).empty() || !items.empty()) items.push_back(current);
  // Allow a trailing comma.
  while (!items.empty() && strip(items.back()).empty()) items.pop_back();
  return items;
}

TomlValue parse_value(const std::string& raw, int line_no) {
  const std::string s = strip(raw);
  if (s.empty()) fail(line_no, "missing value");
  if (s.front() == '[') {
    if (s.back() != ']') fail(line_no, "unterminated array");
    const auto items = split_array_items(s.substr(1, s.size() - 2), line_no);
    std::vector<std::string> strings;
    std::vector<std::int64_t> ints;
    bool all_strings = true, all_ints = true;
    for (const std::string& item : items) {
      const TomlValue v = parse_scalar(item, line_no);
      if (const auto* sv = std::get_if<std::string>(&v))
        strings.push_back(*sv);
      else
        all_strings = false;
      if (const auto* iv = std::get_if<std::int64_t>(&v))
        ints.push_back(*iv);
      else
        all_ints = false;
    }
    if (all_strings) return strings;
    if (all_ints) return ints;
    fail(line_no, "arrays must be all strings or all integers");
  }
  return parse_scalar(s, line_no);
}

}  // namespace

std::map<std::string, TomlValue> parse_toml(const std::string& text) {
  std::map<std::string, TomlValue> out;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = strip(strip_comment(line));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') fail(line_no, "unterminated section header");
      section = strip(body.substr(1, body.size() - 2));
      if (section.empty()) fail(line_no, "empty section name");
      continue;
    }
    const std::size_t eq = body.find('=');
    if (eq == std::string::npos) fail(line_no, "expected key = value");
    const std::string key = strip(body.substr(0, eq));
    if (key.empty()) fail(line_no, "empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (out.count(full)) fail(line_no, "duplicate key " + full);
    out.emplace(full, parse_value(body.substr(eq + 1), line_no));
  }
  return out;
}

namespace {

struct ConfigReader {
  std::map<std::string, TomlValue> values;
  std::map<std::string, bool> consumed;

  template <typename T>
  void read(const std::string& key, T& target) {
    auto it = values.find(key);
    if (it == values.end()) return;
    consumed[key] = true;
    if constexpr (std::is_same_v<T, std::string>) {
      if (const auto* v = std::get_if<std::string>(&it->second)) {
        target = *v;
        return;
      }
    } else if constexpr (std::is_same_v<T, bool>) {
      if (const auto* v = std::get_if<bool>(&it->second)) {
        target = *v;
        return;
      }
    } else if constexpr (std::is_same_v<T, double>) {
      if (const auto* v = std::get_if<double>(&it->second)) {
        target = *v;
        return;
      }
      if (const auto* v = std::get_if<std::int64_t>(&it->second)) {
        target = static_cast<double>(*v);
        return;
      }
    } else if constexpr (std::is_integral_v<T>) {
      if (const auto* v = std::get_if<std::int64_t>(&it->second)) {
        target = static_cast<T>(*v);
        return;
      }
    }
    throw std::runtime_error("config: wrong type for " + key);
  }

  void read_string_list(const std::string& key, std::vector<std::string>& t) {
    auto it = values.find(key);
    if (it == values.end()) return;
    consumed[key] = true;
    if (const auto* v = std::get_if<std::vector<std::string>>(&it->second)) {
      t = *v;
      return;
    }
    throw std::runtime_error("config: wrong type for " + key);
  }

  void read_int_list(const std::string& key, std::vector<int>& t) {
    auto it = values.find(key);
    if (it == values.end()) return;
    consumed[key] = true;
    if (const auto* v = std::get_if<std::vector<std::int64_t>>(&it->second)) {
      t.assign(v->begin(), v->end());
      return;
    }
    throw std::runtime_error("config: wrong type for " + key);
  }

  void reject_unknown() const {
    for (const auto& [key, value] : values) {
      (void)value;
      if (!consumed.count(key))
        throw std::runtime_error("config: unknown key " + key);
    }
  }
};

}  // namespace

RunConfig config_from_toml(const std::string& text) {
  ConfigReader reader{parse_toml(text), {}};
  RunConfig cfg;

  std::string env_name = to_string(cfg.task.env);
  reader.read("task.env", env_name);
  cfg.task.env = env_kind_from_string(env_name);
  reader.read("task.train_seed_start", cfg.task.train_seed_start);
  reader.read("task.train_tasks", cfg.task.train_tasks);
  reader.read("task.val_seed_start", cfg.task.val_seed_start);
  reader.read("task.val_tasks", cfg.task.val_tasks);
  reader.read("task.test_seed_start", cfg.task.test_seed_start);
  reader.read("task.test_tasks", cfg.task.test_tasks);
  reader.read("task.output_dir", cfg.task.output_dir);

  reader.read("proposer.kind", cfg.proposer.kind);
  reader.read("proposer.epsilon", cfg.proposer.epsilon);
  reader.read("proposer.weights_file", cfg.proposer.weights_file);
  reader.read("proposer.random_init_seed", cfg.proposer.random_init_seed);
  reader.read("proposer.base_url", cfg.proposer.base_url);
  reader.read("proposer.model", cfg.proposer.model);

  reader.read("mcts.m", cfg.mcts.max_iterations);
  reader.read("mcts.n", cfg.mcts.expansion_samples);
  reader.read("mcts.eta", cfg.mcts.exploration_weight);
  reader.read("mcts.temperature", cfg.mcts.temperature);
  reader.read("mcts.max_depth", cfg.mcts.max_depth);
  reader.read("mcts.penalty_reward", cfg.mcts.penalty_reward);
  reader.read("mcts.seed", cfg.mcts.rng_seed);

  reader.read("dpo.beta", cfg.dpo.beta);
  reader.read("dpo.learning_rate", cfg.dpo.learning_rate);
  reader.read("dpo.batch_size", cfg.dpo.batch_size);
  reader.read("dpo.warmup_ratio", cfg.dpo.warmup_ratio);
  reader.read("dpo.epochs", cfg.dpo.epochs);
  reader.read("dpo.seed", cfg.dpo.rng_seed);
  std::string optimizer = to_string(cfg.dpo.optimizer);
  reader.read("dpo.optimizer", optimizer);
  cfg.dpo.optimizer = optimizer_from_string(optimizer);
  reader.read("dpo.level", cfg.dpo_level);
  reader.read("dpo.bc_warmstart", cfg.dpo.bc_warmstart);
  reader.read("dpo.bc_epochs", cfg.dpo.bc_epochs);
  reader.read("dpo.bc_learning_rate", cfg.dpo.bc_learning_rate);

  reader.read("collect.trajectory_k", cfg.trajectory_k);

  reader.read_string_list("eval.strategies", cfg.eval.strategies);
  reader.read_int_list("eval.n_values", cfg.eval.n_values);
  reader.read("eval.episode_seed", cfg.eval.episode_seed);

  reader.read("run.workers", cfg.workers);

  reader.reject_unknown();
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  return config_from_toml(read_file(path));
}

// ---------------------------------------------------------------------------
// File helpers
// ---------------------------------------------------------------------------

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
}

std::string file_fingerprint(const std::string& path) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(read_file(path))));
  return buf;
}

// ---------------------------------------------------------------------------
// Proposer factory
// ---------------------------------------------------------------------------

ProposerFactory make_proposer_factory(const ProposerConfig& config) {
  if (config.kind == "scripted") {
    const double epsilon = config.epsilon;
    return [epsilon](const Environment& env) -> std::unique_ptr<Proposer> {
      return std::make_unique<ScriptedAgent>(ScriptedAgent::make(env, epsilon));
    };
  }
  if (config.kind == "featurized") {
    FeaturizedPolicy policy;
    if (!config.weights_file.empty())
      policy = FeaturizedPolicy::from_json(
          nlohmann::json::parse(read_file(config.weights_file)));
    else if (config.random_init_seed != 0)
      policy = FeaturizedPolicy::random_init(config.random_init_seed);
    return [policy](const Environment&) -> std::unique_ptr<Proposer> {
      return std::make_unique<FeaturizedPolicy>(policy);
    };
  }
  if (config.kind == "exhaustive") {
    return [](const Environment&) -> std::unique_ptr<Proposer> {
      return std::make_unique<ExhaustiveProposer>();
    };
  }
  if (config.kind == "remote") {
    EndpointConfig endpoint;
    endpoint.base_url = config.base_url;
    endpoint.model = config.model;
    return [endpoint](const Environment&) -> std::unique_ptr<Proposer> {
      return std::make_unique<RemotePolicy>(endpoint);
    };
  }
  throw std::invalid_argument("unknown proposer kind: " + config.kind);
}

// ---------------------------------------------------------------------------
// collect
// ---------------------------------------------------------------------------

CollectResult collect_preferences(EnvKind kind, std::uint64_t seed_start,
                                  int count, const ProposerConfig& proposer_cfg,
                                  const SearchConfig& mcts_cfg, int trajectory_k,
                                  int workers) {
  const ProposerFactory factory = make_proposer_factory(proposer_cfg);

  struct TaskOutput {
    std::vector<PreferencePair> pairs;
    std::vector<TrajectoryPair> trajectory_pairs;
    nlohmann::json tree;
    bool failed = false;
    bool has_terminal = false;
    bool early_stopped = false;
  };
  std::vector<TaskOutput> outputs(count);

  parallel_for(
      count,
      [&](int i) {
        TaskOutput& out = outputs[i];
        try {
          const std::uint64_t task_seed =
              seed_start + static_cast<std::uint64_t>(i);
          auto env = make_env(kind, task_seed);
          auto proposer = factory(*env);
          SearchConfig cfg = mcts_cfg;
          cfg.rng_seed = mix_seed(mcts_cfg.rng_seed, task_seed);
          const SearchTree tree = run_search(*env, *proposer, cfg);
          out.tree = nlohmann::json{
              {"task_id", env->instruction().task_id},
              {"early_stopped", tree.early_stopped},
              {"iterations_used", tree.iterations_used},
              {"tree", tree_to_json(tree)}};
          out.early_stopped = tree.early_stopped;
          for (const TreeNode& node : tree.nodes)
            if (node.terminal) out.has_terminal = true;
          if (out.has_terminal) {
            out.pairs = extract_pairs(tree);
            out.trajectory_pairs = extract_trajectory_pairs(tree, trajectory_k);
          }
        } catch (const std::exception& e) {
          out.failed = true;
          std::cerr << "collect: task " << i << " failed: " << e.what() << "\n";
        }
      },
      workers);

  CollectResult result;
  result.tasks_attempted = count;
  for (TaskOutput& out : outputs) {
    if (out.failed) {
      result.tasks_failed += 1;
      continue;
    }
    if (out.has_terminal) result.trees_with_terminals += 1;
    if (out.early_stopped) result.early_stopped += 1;
    result.trees.push_back(std::move(out.tree));
    result.pairs.insert(result.pairs.end(), out.pairs.begin(), out.pairs.end());
    result.trajectory_pairs.insert(result.trajectory_pairs.end(),
                                   out.trajectory_pairs.begin(),
                                   out.trajectory_pairs.end());
  }
  return result;
}

void run_collect(const RunConfig& config) {
  config.validate();
  if (config.task.train_tasks == 0)
    throw std::runtime_error("collect: no training tasks configured");
  fs::create_directories(config.task.output_dir);
  const std::string out = config.task.output_dir;

  const CollectResult train_result = collect_preferences(
      config.task.env, config.task.train_seed_start, config.task.train_tasks,
      config.proposer, config.mcts, config.trajectory_k, config.workers);
  if (train_result.tasks_failed == train_result.tasks_attempted)
    throw std::runtime_error("collect: every task failed");

  write_dataset(train_result.pairs, out + "/pairs.jsonl");
  write_trajectory_dataset(train_result.trajectory_pairs,
                           out + "/trajectory_pairs.jsonl");
  {
    std::ofstream trees(out + "/trees.jsonl", std::ios::binary);
    for (const nlohmann::json& t : train_result.trees) trees << t.dump() << '\n';
  }

  CollectResult val_result;
  if (config.task.val_tasks > 0) {
    val_result = collect_preferences(
        config.task.env, config.task.val_seed_start, config.task.val_tasks,
        config.proposer, config.mcts, config.trajectory_k, config.workers);
    write_dataset(val_result.pairs, out + "/pairs_val.jsonl");
  }

  nlohmann::json report = {
      {"tasks_attempted", train_result.tasks_attempted},
      {"tasks_failed", train_result.tasks_failed},
      {"trees_with_terminals", train_result.trees_with_terminals},
      {"pairs_emitted", train_result.pairs.size()},
      {"trajectory_pairs_emitted", train_result.trajectory_pairs.size()},
      {"early_stop_rate",
       train_result.tasks_attempted
           ? static_cast<double>(train_result.early_stopped) /
                 train_result.tasks_attempted
           : 0.0},
      {"validation_pairs_emitted", val_result.pairs.size()},
      {"dataset_fingerprint", file_fingerprint(out + "/pairs.jsonl")},
      {"config", config.to_json()}};
  write_file(out + "/collect_report.json", report.dump(2) + "\n");

  std::cerr << "collect: " << train_result.pairs.size() << " pairs from "
            << train_result.tasks_attempted << " tasks ("
            << train_result.trees_with_terminals << " trees with terminals)\n";
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

void run_train(const RunConfig& config, const std::string& dataset_override) {
  config.validate();
  const std::string out = config.task.output_dir;
  fs::create_directories(out);

  TrainReport report;
  QValueModel model;
  std::string dataset_path;

  if (config.dpo_level == "trajectory") {
    dataset_path = dataset_override.empty() ? out + "/trajectory_pairs.jsonl"
                                            : dataset_override;
    const std::vector<TrajectoryPair> pairs =
        read_trajectory_dataset(dataset_path);
    if (pairs.empty()) throw std::runtime_error("train: dataset is empty");
    const std::vector<TrajectoryExample> examples =
        prepare_trajectory_examples(pairs, &report.prepare);
    model = train_trajectory(examples, config.dpo, &report);
  } else {
    dataset_path = dataset_override.empty() ? out + "/pairs.jsonl" : dataset_override;
    const std::vector<PreferencePair> pairs = read_dataset(dataset_path);
    if (pairs.empty()) throw std::runtime_error("train: dataset is empty");
    const std::vector<StepExample> examples =
        prepare_step_examples(pairs, &report.prepare);

    std::vector<StepExample> val_examples;
    const std::string val_path = out + "/pairs_val.jsonl";
    if (dataset_override.empty() && fs::exists(val_path))
      val_examples = prepare_step_examples(read_dataset(val_path));

    model = train(examples, config.dpo,
                  val_examples.empty() ? nullptr : &val_examples, &report);
  }

  write_file(out + "/checkpoint.json",
             checkpoint_to_json(model, config.dpo, file_fingerprint(dataset_path))
                     .dump(2) +
                 "\n");

  std::ostringstream curves;
  curves << "epoch,mean_loss,train_accuracy,val_accuracy\n";
  for (std::size_t e = 0; e < report.epochs.size(); ++e) {
    const EpochStats& s = report.epochs[e];
    curves << e << ',' << f64(s.mean_loss) << ',' << f64(s.train_accuracy)
           << ',';
    if (s.validation_accuracy) curves << f64(*s.validation_accuracy);
    curves << '\n';
  }
  write_file(out + "/curves.csv", curves.str());

  if (report.prepare.skipped > 0)
    std::cerr << "train: skipped " << report.prepare.skipped << " of "
              << report.prepare.total << " pairs (not reconstructible)\n";
  if (!report.epochs.empty())
    std::cerr << "train: final train accuracy "
              << report.epochs.back().train_accuracy << "\n";
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

void run_evaluate(const RunConfig& config, const std::string& checkpoint_override) {
  config.validate();
  if (config.task.test_tasks == 0)
    throw std::runtime_error("evaluate: no test tasks configured");
  const std::string out = config.task.output_dir;
  fs::create_directories(out);

  const std::string checkpoint_path =
      checkpoint_override.empty() ? out + "/checkpoint.json" : checkpoint_override;

  QValueModel model;
  bool have_model = false;
  std::vector<SuiteSpec> specs;
  for (const std::string& name : config.eval.strategies) {
    const Strategy strategy = strategy_from_string(name);
    if (strategy == Strategy::Greedy || strategy == Strategy::Sample) {
      specs.push_back(SuiteSpec{strategy, 1, nullptr, name});
    } else {
      if (strategy == Strategy::QGuided && !have_model) {
        model = checkpoint_from_json(
            nlohmann::json::parse(read_file(checkpoint_path)));
        have_model = true;
      }
      for (int n : config.eval.n_values)
        specs.push_back(SuiteSpec{strategy, n,
                                  strategy == Strategy::QGuided ? &model : nullptr,
                                  name});
    }
  }

  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < config.task.test_tasks; ++i)
    seeds.push_back(config.task.test_seed_start + static_cast<std::uint64_t>(i));

  const SuiteResult result = evaluate_suite(
      config.task.env, specs, make_proposer_factory(config.proposer), seeds,
      config.eval.episode_seed, config.workers);

  write_metrics_csv(result, out + "/metrics.csv");
  write_metrics_json(result, out + "/metrics.json");
  write_per_task_jsonl(result, config.task.env, out + "/per_task.jsonl");

  for (const SuiteRow& row : result.rows)
    std::cerr << "evaluate: " << row.label << " n=" << row.n << " mean="
              << row.mean_reward << " se=" << row.stderr_reward << "\n";
}

// ---------------------------------------------------------------------------
// inspect
// ---------------------------------------------------------------------------

namespace {

void inspect_checkpoint(const nlohmann::json& j, const InspectOptions& options) {
  const QValueModel model = checkpoint_from_json(j);
  std::cout << "checkpoint: dim=" << model.theta.dim() << " beta=" << model.beta
            << " fingerprint=" << j.value("dataset_fingerprint", "?") << "\n";
  if (options.config == nullptr) {
    std::cout << "(no config given: skipping the episode sweep)\n";
    return;
  }

  const RunConfig& config = *options.config;
  const ProposerFactory factory = make_proposer_factory(config.proposer);
  constexpr int kPerGroup = 100;

  // Sweep sampled episodes over the test split; collect per-action Q values
  // from fully successful and fully failed episodes until both groups have
  // 100 draws.
  std::vector<double> success_q, failure_q;
  for (int i = 0; i < config.task.test_tasks * 8; ++i) {
    if (static_cast<int>(success_q.size()) >= kPerGroup &&
        static_cast<int>(failure_q.size()) >= kPerGroup)
      break;
    const std::uint64_t seed =
        config.task.test_seed_start +
        static_cast<std::uint64_t>(i % std::max(1, config.task.test_tasks));
    auto env = make_env(config.task.env, seed);
    auto proposer = factory(*env);
    Rng rng(mix_seed(config.eval.episode_seed, 0x1457u, i));
    const EpisodeResult episode = sample_episode(*env, *proposer, 1.0, rng);
    std::vector<double>* bucket = nullptr;
    if (episode.reward >= 1.0) bucket = &success_q;
    if (episode.reward <= 0.0) bucket = &failure_q;
    if (bucket == nullptr) continue;

    const ResetResult rr = env->reset();
    EnvState state = rr.state;
    std::vector<Step> prefix;
    for (const Step& step : episode.trajectory.steps) {
      if (static_cast<int>(bucket->size()) >= kPerGroup) break;
      if (state.terminal) break;
      const Context ctx = make_context(rr.instruction, prefix, rr.observation,
                                       env->valid_actions(state));
      if (std::find(ctx.candidates.begin(), ctx.candidates.end(), step.action) !=
          ctx.candidates.end())
        bucket->push_back(q_value(model, ctx, step.action));
      state = env->step(state, step.action).state;
      prefix.push_back(step);
    }
  }

  const std::string dir =
      options.export_dir.empty() ? config.task.output_dir : options.export_dir;
  fs::create_directories(dir);
  std::ostringstream csv;
  csv << "label,q\n";
  for (double q : success_q) csv << "success," << f64(q) << '\n';
  for (double q : failure_q) csv << "failed," << f64(q) << '\n';
  write_file(dir + "/q_histogram.csv", csv.str());

  auto describe = [](const char* label, const std::vector<double>& xs) {
    if (xs.empty()) {
      std::cout << label << ": no samples\n";
      return;
    }
    std::cout << label << ": count=" << xs.size() << " mean=" << mean(xs)
              << " skew=" << skewness(xs) << "\n";
  };
  describe("success", success_q);
  describe("failed", failure_q);
}

void inspect_tree(const nlohmann::json& j) {
  const nlohmann::json& tree = j.contains("tree") ? j["tree"] : j;
  const auto& nodes = tree.at("nodes");
  int terminals = 0;
  double best = -2.0;
  for (const auto& node : nodes) {
    if (node.at("terminal").get<bool>()) {
      ++terminals;
      if (!node.at("reward").is_null())
        best = std::max(best, node.at("reward").get<double>());
    }
  }
  std::cout << "tree: nodes=" << nodes.size() << " terminals=" << terminals;
  if (terminals > 0) std::cout << " best_reward=" << best;
  std::cout << "\n";
}

void inspect_dataset(const std::string& path) {
  const std::vector<PreferencePair> pairs = read_dataset(path);
  std::map<int, int> by_depth;
  for (const PreferencePair& p : pairs) by_depth[p.depth] += 1;
  std::cout << "dataset: " << pairs.size() << " pairs\n";
  for (const auto& [depth, count] : by_depth)
    std::cout << "  depth " << depth << ": " << count << "\n";
}

}  // namespace

void run_inspect(const InspectOptions& options) {
  if (options.artifact.empty())
    throw std::invalid_argument("inspect: no artifact given");
  const std::string content = read_file(options.artifact);

  // Whole-file json first (checkpoints, single tree dumps), then the first
  // line (jsonl datasets and tree streams).
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(content);
  } catch (const nlohmann::json::exception&) {
    const std::string first_line = content.substr(0, content.find('\n'));
    try {
      j = nlohmann::json::parse(first_line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("inspect: not a json artifact: " +
                               std::string(e.what()));
    }
  }

  if (j.contains("theta") && j.contains("ref")) {
    inspect_checkpoint(j, options);
  } else if (j.contains("tree") || j.contains("nodes")) {
    inspect_tree(j);
  } else if (j.contains("win_action")) {
    inspect_dataset(options.artifact);
  } else {
    throw std::runtime_error("inspect: unrecognized artifact shape");
  }
}

}  // namespace qsteer
