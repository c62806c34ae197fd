#include "qsteer/prefs.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace qsteer {

namespace {

std::string f64(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string quoted(const std::string& s) { return nlohmann::json(s).dump(); }

Trajectory trajectory_of(const SearchTree& tree, int terminal_id) {
  Trajectory t;
  t.instruction = tree.instruction;
  t.steps = tree.prefix_of(terminal_id);
  t.outcome = tree.nodes[terminal_id].terminal_reward;
  return t;
}

}  // namespace

int best_terminal(const SearchTree& tree) {
  int best = -1;
  for (const TreeNode& node : tree.nodes) {
    if (!node.terminal) continue;
    if (best < 0 || *node.terminal_reward > *tree.nodes[best].terminal_reward)
      best = node.id;
  }
  if (best < 0) throw std::runtime_error("best_terminal: no terminal node");
  return best;
}

std::vector<PreferencePair> extract_pairs(const SearchTree& tree) {
  const int terminal = best_terminal(tree);
  const std::vector<int> path = tree.path_to(terminal);
  const std::vector<Step> full_prefix = tree.prefix_of(terminal);

  std::vector<PreferencePair> pairs;
  for (std::size_t t = 0; t + 1 < path.size(); ++t) {
    const TreeNode& parent = tree.nodes[path[t]];
    const TreeNode& win = tree.nodes[path[t + 1]];
    const QEstimate win_q = q_estimate(tree, parent.id, *win.incoming_action);
    if (win_q.unvisited()) continue;  // no evidence for the win side

    int lose = -1;
    double lose_q = 0.0;
    for (int sibling_id : parent.children) {
      if (sibling_id == win.id) continue;
      const TreeNode& sibling = tree.nodes[sibling_id];
      if (sibling.visits == 0) continue;  // unvisited siblings never lose
      if (*sibling.incoming_action == *win.incoming_action) continue;
      const QEstimate q =
          q_estimate(tree, parent.id, *sibling.incoming_action);
      if (q.value >= win_q.value) continue;  // strict preference only
      if (lose < 0 || q.value < lose_q) {
        lose = sibling_id;
        lose_q = q.value;
      }
    }
    if (lose < 0) continue;

    PreferencePair pair;
    pair.task_id = tree.instruction.task_id;
    pair.depth = static_cast<int>(t);
    pair.prefix.assign(full_prefix.begin(), full_prefix.begin() + t);
    pair.win_action = *win.incoming_action;
    pair.lose_action = *tree.nodes[lose].incoming_action;
    pair.q_win = win_q.value;
    pair.q_lose = lose_q;
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

std::vector<TrajectoryPair> extract_trajectory_pairs(const SearchTree& tree,
                                                     int k) {
  std::vector<int> terminals;
  for (const TreeNode& node : tree.nodes)
    if (node.terminal) terminals.push_back(node.id);
  if (terminals.size() < 2) return {};

  int best = terminals.front();
  for (int id : terminals)
    if (*tree.nodes[id].terminal_reward > *tree.nodes[best].terminal_reward)
      best = id;
  const double best_reward = *tree.nodes[best].terminal_reward;

  std::vector<int> losers;
  for (int id : terminals)
    if (*tree.nodes[id].terminal_reward < best_reward) losers.push_back(id);
  std::sort(losers.begin(), losers.end(), [&](int a, int b) {
    const double ra = *tree.nodes[a].terminal_reward;
    const double rb = *tree.nodes[b].terminal_reward;
    if (ra != rb) return ra < rb;  // worst first
    return a < b;
  });
  if (static_cast<int>(losers.size()) > k) losers.resize(k);

  std::vector<TrajectoryPair> pairs;
  for (int id : losers) {
    TrajectoryPair pair;
    pair.task_id = tree.instruction.task_id;
    pair.win = trajectory_of(tree, best);
    pair.lose = trajectory_of(tree, id);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

std::string pair_to_jsonl(const PreferencePair& p) {
  std::ostringstream os;
  os << "{\"task_id\":" << quoted(p.task_id) << ",\"depth\":" << p.depth
     << ",\"prefix\":[";
  for (std::size_t i = 0; i < p.prefix.size(); ++i) {
    if (i) os << ',';
    os << "{\"action\":" << quoted(p.prefix[i].action.text)
       << ",\"observation\":" << quoted(p.prefix[i].observation.text) << '}';
  }
  os << "],\"win_action\":" << quoted(p.win_action.text)
     << ",\"lose_action\":" << quoted(p.lose_action.text)
     << ",\"q_win\":" << f64(p.q_win) << ",\"q_lose\":" << f64(p.q_lose) << '}';
  return os.str();
}

void write_dataset(const std::vector<PreferencePair>& pairs,
                   const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (const PreferencePair& p : pairs) out << pair_to_jsonl(p) << '\n';
}

std::vector<PreferencePair> read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::vector<PreferencePair> pairs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      PreferencePair p;
      p.task_id = j.at("task_id").get<std::string>();
      p.depth = j.at("depth").get<int>();
      for (const auto& step : j.at("prefix"))
        p.prefix.push_back(Step{Action{step.at("action").get<std::string>()},
                                Observation{step.at("observation").get<std::string>()}});
      p.win_action = Action{j.at("win_action").get<std::string>()};
      p.lose_action = Action{j.at("lose_action").get<std::string>()};
      p.q_win = j.at("q_win").get<double>();
      p.q_lose = j.at("q_lose").get<double>();
      pairs.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                               ": " + e.what());
    }
  }
  return pairs;
}

namespace {

std::string trajectory_json(const Trajectory& t) {
  std::ostringstream os;
  os << "{\"steps\":[";
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    if (i) os << ',';
    os << "{\"action\":" << quoted(t.steps[i].action.text)
       << ",\"observation\":" << quoted(t.steps[i].observation.text) << '}';
  }
  os << "],\"reward\":" << f64(t.outcome.value_or(0.0)) << '}';
  return os.str();
}

Trajectory trajectory_from_json(const nlohmann::json& j,
                                const Instruction& instruction) {
  Trajectory t;
  t.instruction = instruction;
  for (const auto& step : j.at("steps"))
    t.steps.push_back(Step{Action{step.at("action").get<std::string>()},
                           Observation{step.at("observation").get<std::string>()}});
  t.outcome = j.at("reward").get<double>();
  return t;
}

}  // namespace

void write_trajectory_dataset(const std::vector<TrajectoryPair>& pairs,
                              const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (const TrajectoryPair& p : pairs) {
    out << "{\"task_id\":" << quoted(p.task_id)
        << ",\"win\":" << trajectory_json(p.win)
        << ",\"lose\":" << trajectory_json(p.lose) << "}\n";
  }
}

std::vector<TrajectoryPair> read_trajectory_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::vector<TrajectoryPair> pairs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      TrajectoryPair p;
      p.task_id = j.at("task_id").get<std::string>();
      Instruction instruction;
      instruction.task_id = p.task_id;
      p.win = trajectory_from_json(j.at("win"), instruction);
      p.lose = trajectory_from_json(j.at("lose"), instruction);
      pairs.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                               ": " + e.what());
    }
  }
  return pairs;
}

}  // namespace qsteer
