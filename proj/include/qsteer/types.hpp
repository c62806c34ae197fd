#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qsteer {

enum class EnvKind { TreasureShop, ChainQA };

std::string to_string(EnvKind kind);
EnvKind env_kind_from_string(const std::string& name);  // throws on unknown

// A task: identifier, generator seed, and the rendered goal text. The same
// (kind, seed) always renders the same text and underlying target.
struct Instruction {
  std::string task_id;
  std::uint64_t seed = 0;
  std::string text;

  bool operator==(const Instruction&) const = default;
};

// Canonical action string, e.g. "search[sandals]" or "click[buy now]".
struct Action {
  std::string text;

  bool operator==(const Action&) const = default;
  bool operator<(const Action& other) const { return text < other.text; }
};

// Builds an action from raw text, canonicalizing it.
Action make_action(std::string_view raw);

// Sentinel for unparseable or refused proposals; environments treat it as an
// invalid action (consumes a step, no progress).
Action invalid_action();

struct Observation {
  std::string text;

  bool operator==(const Observation&) const = default;
};

struct Step {
  Action action;
  Observation observation;

  bool operator==(const Step&) const = default;
};

struct Trajectory {
  Instruction instruction;
  std::vector<Step> steps;
  std::optional<double> outcome;  // present once terminal or step cap reached
};

}  // namespace qsteer
