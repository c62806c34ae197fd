#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "qsteer/harness.hpp"

using namespace qsteer;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"(
# tiny pipeline for tests
[task]
env = "treasureshop"
train_seed_start = 0
train_tasks = 8
val_seed_start = 100
val_tasks = 4
test_seed_start = 200
test_tasks = 6
output_dir = "OUTDIR"

[proposer]
kind = "scripted"
epsilon = 0.3

[mcts]
m = 20
n = 4
eta = 2.0
temperature = 1.0
seed = 5

[dpo]
beta = 0.1
learning_rate = 1e-3
batch_size = 8
warmup_ratio = 0.1
epochs = 2
seed = 3

[eval]
strategies = ["greedy", "q_guided"]
n_values = [1, 3]
episode_seed = 17

[run]
workers = 2
)";

std::string tiny_config_text(const std::string& outdir) {
  std::string text = kTinyConfig;
  const std::string token = "OUTDIR";
  text.replace(text.find(token), token.size(), outdir);
  return text;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("toml subset parses sections, scalars, arrays, comments") {
  const auto values = parse_toml(R"(
top = 1
[alpha]
name = "hello # not a comment"  # real comment
ratio = 0.25
flag = true
words = ["a", "b", "c"]
counts = [1, 2, 3]
negative = -4
)");
  CHECK(std::get<std::int64_t>(values.at("top")) == 1);
  CHECK(std::get<std::string>(values.at("alpha.name")) ==
        "hello # not a comment");
  CHECK(std::get<double>(values.at("alpha.ratio")) == 0.25);
  CHECK(std::get<bool>(values.at("alpha.flag")) == true);
  CHECK(std::get<std::vector<std::string>>(values.at("alpha.words")).size() == 3);
  CHECK(std::get<std::vector<std::int64_t>>(values.at("alpha.counts"))[2] == 3);
  CHECK(std::get<std::int64_t>(values.at("alpha.negative")) == -4);
}

TEST_CASE("toml errors carry line numbers") {
  auto expect_error = [](const char* text, const char* fragment) {
    try {
      parse_toml(text);
      FAIL_CHECK("expected an error for: " << text);
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find(fragment) != std::string::npos);
    }
  };
  expect_error("key value\n", "line 1");
  expect_error("[unterminated\n", "line 1");
  expect_error("x = \n", "line 1");
  expect_error("x = [1, \"a\"]\n", "line 1");
  expect_error("x = 1\nx = 2\n", "line 2");
  expect_error("x = what\n", "unrecognized");
}

TEST_CASE("config round-trips defaults and rejects unknown keys") {
  const RunConfig cfg = config_from_toml(tiny_config_text("/tmp/qsteer_x"));
  CHECK(cfg.task.env == EnvKind::TreasureShop);
  CHECK(cfg.task.train_tasks == 8);
  CHECK(cfg.mcts.max_iterations == 20);
  CHECK(cfg.mcts.expansion_samples == 4);
  CHECK(cfg.dpo.batch_size == 8);
  CHECK(cfg.eval.n_values == std::vector<int>{1, 3});
  CHECK(cfg.workers == 2);

  CHECK_THROWS_WITH_AS(config_from_toml("[task]\nenv = \"treasureshop\"\n"
                                        "misspelled_key = 3\n"),
                       doctest::Contains("unknown key"), std::runtime_error);
}

TEST_CASE("overlapping seed splits are rejected") {
  std::string text = tiny_config_text("/tmp/qsteer_y");
  const std::string needle = "val_seed_start = 100";
  text.replace(text.find(needle), needle.size(), "val_seed_start = 4");
  CHECK_THROWS_WITH_AS(config_from_toml(text), doctest::Contains("overlap"),
                       std::invalid_argument);
}

TEST_CASE("collect produces pairs, trees, and a report") {
  TempDir dir("qsteer_harness_collect");
  RunConfig cfg = config_from_toml(tiny_config_text(dir.path.string()));
  run_collect(cfg);

  CHECK(fs::exists(dir.path / "pairs.jsonl"));
  CHECK(fs::exists(dir.path / "pairs_val.jsonl"));
  CHECK(fs::exists(dir.path / "trajectory_pairs.jsonl"));
  CHECK(fs::exists(dir.path / "trees.jsonl"));

  const nlohmann::json report =
      nlohmann::json::parse(read_file((dir.path / "collect_report.json").string()));
  CHECK(report.at("tasks_attempted").get<int>() == 8);
  CHECK(report.at("pairs_emitted").get<int>() > 0);
  CHECK(report.at("config").at("mcts").at("m").get<int>() == 20);

  const auto pairs = read_dataset((dir.path / "pairs.jsonl").string());
  CHECK(static_cast<int>(pairs.size()) == report.at("pairs_emitted").get<int>());
}

TEST_CASE("train and evaluate complete the pipeline") {
  TempDir dir("qsteer_harness_pipeline");
  RunConfig cfg = config_from_toml(tiny_config_text(dir.path.string()));
  run_collect(cfg);
  run_train(cfg);

  CHECK(fs::exists(dir.path / "checkpoint.json"));
  const std::string curves = read_file((dir.path / "curves.csv").string());
  CHECK(curves.rfind("epoch,mean_loss,train_accuracy,val_accuracy\n", 0) == 0);

  run_evaluate(cfg);
  CHECK(fs::exists(dir.path / "metrics.csv"));
  CHECK(fs::exists(dir.path / "metrics.json"));
  CHECK(fs::exists(dir.path / "per_task.jsonl"));

  const std::string metrics = read_file((dir.path / "metrics.csv").string());
  CHECK(metrics.find("greedy,1,") != std::string::npos);
  CHECK(metrics.find("q_guided,1,") != std::string::npos);
  CHECK(metrics.find("q_guided,3,") != std::string::npos);

  // Checkpoint inspection with an episode sweep.
  InspectOptions options;
  options.artifact = (dir.path / "checkpoint.json").string();
  options.export_dir = dir.path.string();
  options.config = &cfg;
  run_inspect(options);
  const std::string hist = read_file((dir.path / "q_histogram.csv").string());
  CHECK(hist.rfind("label,q\n", 0) == 0);

  // Tree and dataset inspection paths.
  {
    std::ofstream one_tree((dir.path / "one_tree.json").string());
    const std::string trees = read_file((dir.path / "trees.jsonl").string());
    one_tree << trees.substr(0, trees.find('\n')) << "\n";
  }
  InspectOptions tree_options;
  tree_options.artifact = (dir.path / "one_tree.json").string();
  run_inspect(tree_options);
  InspectOptions data_options;
  data_options.artifact = (dir.path / "pairs.jsonl").string();
  run_inspect(data_options);
}

TEST_CASE("trajectory-level training runs through the pipeline") {
  TempDir dir("qsteer_harness_traj");
  RunConfig cfg = config_from_toml(tiny_config_text(dir.path.string()));
  cfg.dpo_level = "trajectory";
  run_collect(cfg);
  run_train(cfg);
  CHECK(fs::exists(dir.path / "checkpoint.json"));
}

TEST_CASE("empty collections exit with an error") {
  TempDir dir("qsteer_harness_empty");
  RunConfig cfg = config_from_toml(tiny_config_text(dir.path.string()));
  cfg.task.train_tasks = 0;
  CHECK_THROWS_AS(run_collect(cfg), std::runtime_error);
}

TEST_CASE("collect -> train -> evaluate twice is byte-identical") {
  // Small-scale determinism check; the acceptance suite runs the full one.
  TempDir dir1("qsteer_det_a");
  TempDir dir2("qsteer_det_b");
  for (const TempDir* dir : {&dir1, &dir2}) {
    RunConfig cfg = config_from_toml(tiny_config_text(dir->path.string()));
    cfg.task.train_tasks = 6;
    cfg.task.test_tasks = 4;
    run_collect(cfg);
    run_train(cfg);
    run_evaluate(cfg);
  }
  for (const char* name :
       {"pairs.jsonl", "pairs_val.jsonl", "trajectory_pairs.jsonl",
        "trees.jsonl", "checkpoint.json", "curves.csv", "metrics.csv",
        "metrics.json", "per_task.jsonl"}) {
    CHECK_MESSAGE(read_file((dir1.path / name).string()) ==
                      read_file((dir2.path / name).string()),
                  name);
  }
}

TEST_CASE("file fingerprints are content hashes") {
  TempDir dir("qsteer_fingerprint");
  write_file((dir.path / "a").string(), "hello");
  write_file((dir.path / "b").string(), "hello");
  write_file((dir.path / "c").string(), "world");
  CHECK(file_fingerprint((dir.path / "a").string()) ==
        file_fingerprint((dir.path / "b").string()));
  CHECK(file_fingerprint((dir.path / "a").string()) !=
        file_fingerprint((dir.path / "c").string()));
}
