#pragma once

#include <string>
#include <vector>

#include "qsteer/mcts.hpp"
#include "qsteer/types.hpp"

namespace qsteer {

// Step-level preference: a shared prefix on the tree's best trajectory, the
// action the trajectory took (win) and the worst-valued visited sibling
// (lose). q_win > q_lose holds strictly for every emitted pair.
struct PreferencePair {
  std::string task_id;
  int depth = 0;
  std::vector<Step> prefix;
  Action win_action;
  Action lose_action;
  double q_win = 0.0;
  double q_lose = 0.0;
};

struct TrajectoryPair {
  std::string task_id;
  Trajectory win;
  Trajectory lose;
};

// Terminal node with the highest stored reward; ties break toward the lowest
// id (earliest discovery). Throws std::runtime_error when the tree has no
// terminal node.
int best_terminal(const SearchTree& tree);

// Walk the best trajectory; at each depth pair the trajectory's action with
// the lowest-Q visited sibling strictly below it. Depths with no qualifying
// sibling emit nothing.
std::vector<PreferencePair> extract_pairs(const SearchTree& tree);

// Pair the best terminal trajectory with up to k strictly-lower-reward
// terminal trajectories, worst first. Empty when no two terminals have
// distinct rewards.
std::vector<TrajectoryPair> extract_trajectory_pairs(const SearchTree& tree,
                                                     int k);

// UTF-8 JSONL, one pair per line, floats with 17 significant digits.
// read(write(x)) == x and re-serialization is byte-identical.
void write_dataset(const std::vector<PreferencePair>& pairs,
                   const std::string& path);
std::vector<PreferencePair> read_dataset(const std::string& path);

std::string pair_to_jsonl(const PreferencePair& pair);

void write_trajectory_dataset(const std::vector<TrajectoryPair>& pairs,
                              const std::string& path);
std::vector<TrajectoryPair> read_trajectory_dataset(const std::string& path);

}  // namespace qsteer
