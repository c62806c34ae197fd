#include "qsteer/types.hpp"

#include <stdexcept>

#include "qsteer/text.hpp"

namespace qsteer {

std::string to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::TreasureShop:
      return "treasureshop";
    case EnvKind::ChainQA:
      return "chainqa";
  }
  return "unknown";
}

EnvKind env_kind_from_string(const std::string& name) {
  const std::string c = canonicalize(name);
  if (c == "treasureshop") return EnvKind::TreasureShop;
  if (c == "chainqa") return EnvKind::ChainQA;
  throw std::invalid_argument("unknown environment kind: " + name);
}

Action make_action(std::string_view raw) { return Action{canonicalize(raw)}; }

Action invalid_action() { return Action{"nothing"}; }

}  // namespace qsteer
