#include "qsteer/env.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "qsteer/rng.hpp"
#include "qsteer/text.hpp"

namespace qsteer {

namespace {

const Observation kInvalidObservation{"invalid action."};

std::string entity_name(int id) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "entity%02d", id);
  return buf;
}

}  // namespace

std::string state_key(const EnvState& s) {
  std::ostringstream os;
  os << to_string(s.kind) << '|' << s.seed << '|' << s.step_count << '|'
     << (s.terminal ? 1 : 0) << '|' << s.page << '|' << s.cursor;
  return os.str();
}

// ---------------------------------------------------------------------------
// TreasureShop: seeded product catalog behind search/results/item pages.
// Buying yields a graded reward; everything else navigates or wastes a step.
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string> kAttributePool = {
    "black",      "blue",    "red",      "green",   "white",       "anti slip",
    "waterproof", "wireless", "foldable", "organic", "compact",    "rechargeable"};

const std::vector<std::string> kCategoryPool = {
    "sandals", "headphones", "lamp", "backpack", "kettle", "jacket", "bottle", "mat"};

const std::vector<int> kPriceCaps = {30, 50, 80};

// Prices come from a small grid so (cap, price) combinations recur across
// catalogs.
const std::vector<int> kPriceGrid = {15, 25, 35, 45, 55, 65, 75, 85, 95, 105};

int grid_price_below(Rng& rng, int cap) {
  std::vector<int> options;
  for (int p : kPriceGrid)
    if (p <= cap - 5) options.push_back(p);
  return options[rng.next_below(options.size())];
}

int grid_price_above(Rng& rng, int cap) {
  std::vector<int> options;
  for (int p : kPriceGrid)
    if (p > cap) options.push_back(p);
  return options[rng.next_below(options.size())];
}

struct ShopItem {
  int id = 0;
  int category = 0;               // index into catalog categories
  std::vector<int> attrs;         // indices into kAttributePool, sorted
  int price = 0;
  std::string title;              // "item3 black anti slip sandals $24"
};

struct ShopCatalog {
  std::vector<int> categories;    // 3 distinct indices into kCategoryPool
  int target_slot = 0;            // which of the 3 is the instruction's target
  std::vector<int> required;      // required attribute indices, sorted
  int price_cap = 0;
  std::vector<ShopItem> items;    // ordered by id
};

std::vector<int> sample_distinct(Rng& rng, int universe, int count) {
  std::vector<int> pool(universe);
  for (int i = 0; i < universe; ++i) pool[i] = i;
  // Partial Fisher-Yates.
  for (int i = 0; i < count; ++i) {
    int j = i + static_cast<int>(rng.next_below(universe - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

ShopCatalog generate_catalog(std::uint64_t seed) {
  Rng rng(mix_seed(0x5407u, seed));
  ShopCatalog cat;
  cat.categories =
      sample_distinct(rng, static_cast<int>(kCategoryPool.size()), 4);
  cat.target_slot = static_cast<int>(rng.next_below(4));
  const int required_count = 2 + static_cast<int>(rng.next_below(2));  // 2 or 3
  cat.required = sample_distinct(rng, static_cast<int>(kAttributePool.size()),
                                 required_count);
  std::sort(cat.required.begin(), cat.required.end());
  cat.price_cap = kPriceCaps[rng.next_below(kPriceCaps.size())];

  // Attribute required[0] is reserved for the target category so only the
  // planted item can satisfy every requirement.
  const int reserved = cat.required[0];

  auto random_attrs = [&](bool allow_reserved) {
    const int n = 1 + static_cast<int>(rng.next_below(3));
    std::vector<int> attrs;
    while (static_cast<int>(attrs.size()) < n) {
      int a = static_cast<int>(rng.next_below(kAttributePool.size()));
      if (!allow_reserved && a == reserved) continue;
      if (std::find(attrs.begin(), attrs.end(), a) == attrs.end())
        attrs.push_back(a);
    }
    std::sort(attrs.begin(), attrs.end());
    return attrs;
  };

  std::vector<ShopItem> generated;
  for (int slot = 0; slot < 4; ++slot) {
    if (slot == cat.target_slot) {
      // Planted perfect item: all required attributes, within the cap.
      ShopItem perfect;
      perfect.category = slot;
      perfect.attrs = cat.required;
      perfect.price = grid_price_below(rng, cat.price_cap);
      generated.push_back(perfect);

      // Near miss: drops one required attribute, gains a distractor.
      ShopItem near;
      near.category = slot;
      near.attrs = cat.required;
      near.attrs.erase(near.attrs.begin() +
                       static_cast<long>(1 + rng.next_below(near.attrs.size() - 1)));
      while (true) {
        int extra = static_cast<int>(rng.next_below(kAttributePool.size()));
        if (extra == reserved) continue;
        if (std::find(cat.required.begin(), cat.required.end(), extra) ==
            cat.required.end()) {
          near.attrs.push_back(extra);
          break;
        }
      }
      std::sort(near.attrs.begin(), near.attrs.end());
      near.price = grid_price_below(rng, cat.price_cap);
      generated.push_back(near);

      // Trap: every attribute matches but the price busts the cap.
      ShopItem trap;
      trap.category = slot;
      trap.attrs = cat.required;
      trap.price = grid_price_above(rng, cat.price_cap);
      generated.push_back(trap);

      ShopItem filler;
      filler.category = slot;
      filler.attrs = random_attrs(false);
      filler.price = kPriceGrid[rng.next_below(kPriceGrid.size())];
      generated.push_back(filler);
    } else {
      for (int i = 0; i < 4; ++i) {
        ShopItem item;
        item.category = slot;
        item.attrs = random_attrs(false);
        item.price = kPriceGrid[rng.next_below(kPriceGrid.size())];
        generated.push_back(item);
      }
    }
  }

  // Assign ids by a seeded permutation so slot order never leaks into titles.
  std::vector<int> perm(generated.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
  for (std::size_t i = 0; i + 1 < perm.size(); ++i) {
    std::size_t j = i + rng.next_below(perm.size() - i);
    std::swap(perm[i], perm[j]);
  }
  cat.items.resize(generated.size());
  for (std::size_t i = 0; i < generated.size(); ++i) {
    ShopItem item = generated[i];
    item.id = perm[i];
    cat.items[item.id] = std::move(item);
  }
  for (ShopItem& item : cat.items) {
    std::ostringstream title;
    title << "item" << item.id;
    for (int a : item.attrs) title << ' ' << kAttributePool[a];
    title << ' ' << kCategoryPool[cat.categories[item.category]];
    title << " $" << item.price;
    item.title = canonicalize(title.str());
  }
  return cat;
}

enum ShopPage {
  kPageSearch = 0,
  kPageResults = 1,
  kPageItem = 2,
  kPageDone = 3,
  kPageCart = 4
};

class TreasureShopEnv : public Environment {
 public:
  explicit TreasureShopEnv(std::uint64_t seed)
      : seed_(seed), catalog_(generate_catalog(seed)) {}

  EnvKind kind() const override { return EnvKind::TreasureShop; }
  std::uint64_t seed() const override { return seed_; }
  int max_steps() const override { return kTreasureShopMaxSteps; }

  Instruction instruction() const override {
    const std::string& noun =
        kCategoryPool[catalog_.categories[catalog_.target_slot]];
    std::ostringstream text;
    text << "i am looking for";
    for (int a : catalog_.required) text << ' ' << kAttributePool[a];
    text << ' ' << noun << ". pick " << noun << " priced under "
         << catalog_.price_cap << " dollars.";
    return Instruction{"treasureshop:" + std::to_string(seed_), seed_,
                       canonicalize(text.str())};
  }

  ResetResult reset() const override {
    EnvState s;
    s.kind = EnvKind::TreasureShop;
    s.seed = seed_;
    s.page = kPageSearch;
    return ResetResult{s, instruction(),
                       Observation{"treasureshop search page."}};
  }

  std::vector<Action> valid_actions(const EnvState& state) const override {
    require_live(state);
    std::vector<Action> out;
    switch (state.page) {
      case kPageSearch:
        for (int c : catalog_.categories)
          out.push_back(make_action("search[" + kCategoryPool[c] + "]"));
        break;
      case kPageResults:
        for (const ShopItem& item : catalog_.items)
          if (item.category == state.cursor)
            out.push_back(make_action("click[" + item.title + "]"));
        out.push_back(make_action("click[back to search]"));
        break;
      case kPageItem:
        out.push_back(make_action("click[add to cart]"));
        out.push_back(make_action("click[description]"));
        out.push_back(make_action("click[back to search]"));
        break;
      case kPageCart:
        out.push_back(make_action("click[buy now]"));
        break;
      default:
        break;
    }
    return out;
  }

  StepResult step(const EnvState& state, const Action& raw) const override {
    require_live(state);
    const Action action = make_action(raw.text);
    EnvState next = state;
    next.step_count += 1;

    Observation obs = kInvalidObservation;
    std::optional<double> outcome;
    bool done = false;

    if (state.page == kPageSearch) {
      for (int slot = 0; slot < 4; ++slot) {
        const std::string kw = kCategoryPool[catalog_.categories[slot]];
        if (action == make_action("search[" + kw + "]")) {
          next.page = kPageResults;
          next.cursor = slot;
          obs = results_observation(slot);
          break;
        }
      }
    } else if (state.page == kPageResults) {
      if (action == make_action("click[back to search]")) {
        next.page = kPageSearch;
        next.cursor = 0;
        obs = Observation{"treasureshop search page."};
      } else {
        for (const ShopItem& item : catalog_.items) {
          if (item.category == state.cursor &&
              action == make_action("click[" + item.title + "]")) {
            next.page = kPageItem;
            next.cursor = item.id;
            obs = Observation{canonicalize("viewing " + item.title +
                                           ". click buy now to purchase or go back.")};
            break;
          }
        }
      }
    } else if (state.page == kPageItem) {
      if (action == make_action("click[add to cart]")) {
        const ShopItem& item = catalog_.items[state.cursor];
        next.page = kPageCart;
        obs = Observation{canonicalize("cart holds " + item.title +
                                       ". buy now to place the order.")};
      } else if (action == make_action("click[description]")) {
        const ShopItem& item = catalog_.items[state.cursor];
        obs = Observation{canonicalize("description: " + item.title +
                                       ", in stock.")};
      } else if (action == make_action("click[back to search]")) {
        next.page = kPageSearch;
        next.cursor = 0;
        obs = Observation{"treasureshop search page."};
      }
    } else if (state.page == kPageCart) {
      // Checkout is a commitment: the cart page only offers the purchase.
      if (action == make_action("click[buy now]")) {
        const ShopItem& item = catalog_.items[state.cursor];
        done = true;
        next.page = kPageDone;
        outcome = purchase_reward(item);
        obs = Observation{"order placed. thanks for shopping."};
      }
    }

    if (!done && next.step_count >= max_steps()) {
      // Step cap exhausted without a purchase.
      done = true;
      outcome = 0.0;
    }
    next.terminal = done;
    return StepResult{next, obs, done, outcome};
  }

  nlohmann::json fixture() const override;

  const ShopCatalog& catalog() const { return catalog_; }

 private:
  void require_live(const EnvState& state) const {
    if (state.terminal)
      throw std::invalid_argument("treasureshop: state is terminal");
  }

  Observation results_observation(int slot) const {
    std::ostringstream os;
    os << "results for " << kCategoryPool[catalog_.categories[slot]] << ":";
    bool first = true;
    for (const ShopItem& item : catalog_.items) {
      if (item.category != slot) continue;
      os << (first ? " " : "; ") << item.title;
      first = false;
    }
    os << ". click a product title or go back.";
    return Observation{canonicalize(os.str())};
  }

  double purchase_reward(const ShopItem& item) const {
    int matched = 0;
    for (int a : catalog_.required)
      if (std::find(item.attrs.begin(), item.attrs.end(), a) != item.attrs.end())
        ++matched;
    const int price_ok = item.price <= catalog_.price_cap ? 1 : 0;
    double r = static_cast<double>(matched + price_ok) /
               static_cast<double>(catalog_.required.size() + 1);
    return std::clamp(r, 0.0, 1.0);
  }

  std::uint64_t seed_;
  ShopCatalog catalog_;
};

// ---------------------------------------------------------------------------
// ChainQA: follow a seeded chain of related entities and answer the last one.
// Binary outcome; searching the frontier entity reveals the next hop.
// ---------------------------------------------------------------------------

struct ChainGraph {
  std::vector<int> chain;  // entity ids c0..ch; answer = chain.back()
  int hops = 0;            // number of links to follow
};

ChainGraph generate_chain(std::uint64_t seed) {
  Rng rng(mix_seed(0xC4A1u, seed));
  ChainGraph g;
  g.hops = 2 + static_cast<int>(rng.next_below(3));  // 2..4
  g.chain = sample_distinct(rng, 10, g.hops + 1);
  return g;
}

const std::vector<std::string> kLookupKeys = {"archive", "index"};

class ChainQaEnv : public Environment {
 public:
  explicit ChainQaEnv(std::uint64_t seed)
      : seed_(seed), graph_(generate_chain(seed)) {}

  EnvKind kind() const override { return EnvKind::ChainQA; }
  std::uint64_t seed() const override { return seed_; }
  int max_steps() const override { return kChainQaMaxSteps; }

  Instruction instruction() const override {
    std::ostringstream text;
    text << "question: starting from " << entity_name(graph_.chain[0])
         << ", follow the closely related link " << graph_.hops
         << " times. answer with the entity you reach.";
    return Instruction{"chainqa:" + std::to_string(seed_), seed_,
                       canonicalize(text.str())};
  }

  ResetResult reset() const override {
    EnvState s;
    s.kind = EnvKind::ChainQA;
    s.seed = seed_;
    return ResetResult{
        s, instruction(),
        Observation{canonicalize("you may search known entities, look things up, or answer. start with " +
                                 entity_name(graph_.chain[0]) + ".")}};
  }

  std::vector<Action> valid_actions(const EnvState& state) const override {
    require_live(state);
    std::vector<Action> out;
    for (int i = 0; i <= state.cursor; ++i)
      out.push_back(make_action("search[" + entity_name(graph_.chain[i]) + "]"));
    for (int i = 0; i <= state.cursor; ++i)
      out.push_back(make_action("answer[" + entity_name(graph_.chain[i]) + "]"));
    for (const std::string& key : kLookupKeys)
      out.push_back(make_action("lookup[" + key + "]"));
    return out;
  }

  StepResult step(const EnvState& state, const Action& raw) const override {
    require_live(state);
    const Action action = make_action(raw.text);
    EnvState next = state;
    next.step_count += 1;

    Observation obs = kInvalidObservation;
    std::optional<double> outcome;
    bool done = false;

    if (action.text.rfind("answer[", 0) == 0 && action.text.back() == ']') {
      // Answering is always accepted and always terminal.
      const std::string given =
          action.text.substr(7, action.text.size() - 8);
      done = true;
      const bool correct = given == entity_name(graph_.chain.back());
      outcome = correct ? 1.0 : 0.0;
      obs = Observation{correct ? "correct. task complete."
                                : "that is not the entity asked for."};
    } else {
      for (int i = 0; i <= state.cursor; ++i) {
        if (action == make_action("search[" + entity_name(graph_.chain[i]) + "]")) {
          obs = paragraph(i);
          if (i == state.cursor && state.cursor < graph_.hops)
            next.cursor = state.cursor + 1;
          break;
        }
      }
      for (std::size_t k = 0; k < kLookupKeys.size(); ++k) {
        if (action == make_action("lookup[" + kLookupKeys[k] + "]")) {
          obs = Observation{"the " + kLookupKeys[k] +
                            " returns no further details."};
          break;
        }
      }
    }

    if (!done && next.step_count >= max_steps()) {
      done = true;
      outcome = 0.0;
    }
    next.terminal = done;
    return StepResult{next, obs, done, outcome};
  }

  nlohmann::json fixture() const override;

  const ChainGraph& graph() const { return graph_; }

 private:
  void require_live(const EnvState& state) const {
    if (state.terminal) throw std::invalid_argument("chainqa: state is terminal");
  }

  Observation paragraph(int chain_index) const {
    const int id = graph_.chain[chain_index];
    std::ostringstream os;
    os << entity_name(id) << " is a catalogued subject.";
    if (chain_index < graph_.hops) {
      os << " it is closely related to "
         << entity_name(graph_.chain[chain_index + 1]) << ".";
      if (chain_index == graph_.hops - 1)
        os << " the definitive answer is "
           << entity_name(graph_.chain[chain_index + 1]) << ".";
    } else {
      os << " end of trail.";
    }
    return Observation{canonicalize(os.str())};
  }

  std::uint64_t seed_;
  ChainGraph graph_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Fixtures
// ---------------------------------------------------------------------------

nlohmann::json TreasureShopEnv::fixture() const {
  nlohmann::json items = nlohmann::json::array();
  for (const ShopItem& item : catalog_.items) {
    nlohmann::json attrs = nlohmann::json::array();
    for (int a : item.attrs) attrs.push_back(kAttributePool[a]);
    items.push_back({{"id", item.id},
                     {"category", kCategoryPool[catalog_.categories[item.category]]},
                     {"attributes", attrs},
                     {"price", item.price},
                     {"title", item.title}});
  }
  nlohmann::json required = nlohmann::json::array();
  for (int a : catalog_.required) required.push_back(kAttributePool[a]);
  nlohmann::json categories = nlohmann::json::array();
  for (int c : catalog_.categories) categories.push_back(kCategoryPool[c]);
  const QTable optimal = optimal_q_oracle(*this);
  return {{"env_kind", to_string(kind())},
          {"seed", seed_},
          {"instruction_text", instruction().text},
          {"catalog",
           {{"categories", categories},
            {"target_category",
             kCategoryPool[catalog_.categories[catalog_.target_slot]]},
            {"required_attributes", required},
            {"price_cap", catalog_.price_cap},
            {"items", items}}},
          {"optimal_reward", optimal.root_value}};
}

nlohmann::json ChainQaEnv::fixture() const {
  nlohmann::json chain = nlohmann::json::array();
  for (int id : graph_.chain) chain.push_back(entity_name(id));
  const QTable optimal = optimal_q_oracle(*this);
  return {{"env_kind", to_string(kind())},
          {"seed", seed_},
          {"instruction_text", instruction().text},
          {"graph",
           {{"chain", chain},
            {"hops", graph_.hops},
            {"answer", entity_name(graph_.chain.back())},
            {"lookups", kLookupKeys}}},
          {"optimal_reward", optimal.root_value}};
}

std::unique_ptr<Environment> make_env(EnvKind kind, std::uint64_t seed) {
  switch (kind) {
    case EnvKind::TreasureShop:
      return std::make_unique<TreasureShopEnv>(seed);
    case EnvKind::ChainQA:
      return std::make_unique<ChainQaEnv>(seed);
  }
  throw std::invalid_argument("unknown environment kind");
}

std::unique_ptr<Environment> env_from_task_id(const std::string& task_id) {
  const auto colon = task_id.find(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("malformed task id: " + task_id);
  const EnvKind kind = env_kind_from_string(task_id.substr(0, colon));
  const std::uint64_t seed = std::stoull(task_id.substr(colon + 1));
  return make_env(kind, seed);
}

// ---------------------------------------------------------------------------
// Exact Q oracles
// ---------------------------------------------------------------------------

double QTable::at(const std::string& key, const Action& action) const {
  auto it = q.find(key);
  if (it == q.end()) throw std::out_of_range("oracle: unknown state " + key);
  auto jt = it->second.find(action.text);
  if (jt == it->second.end())
    throw std::out_of_range("oracle: unknown action " + action.text + " at " + key);
  return jt->second;
}

namespace {

struct OracleBuilder {
  const Environment& env;
  const PolicyFn* policy;  // null -> optimal (max over actions)
  std::size_t max_states;
  QTable table;
  std::unordered_set<std::string> seen_states;
  // Memo of Q(s, a); the successor observation is a deterministic function of
  // (s, a), so the value is well defined without knowing how we reached s.
  std::unordered_map<std::string, double> memo;

  double action_value(const EnvState& state, const Action& action) {
    const std::string key = state_key(state) + "\x1f" + action.text;
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    const StepResult res = env.step(state, action);
    double value;
    if (res.terminal) {
      value = *res.outcome;
    } else {
      value = state_value(res.state, res.observation);
    }
    memo.emplace(key, value);
    table.q[state_key(state)][action.text] = value;
    return value;
  }

  double state_value(const EnvState& state, const Observation& last_obs) {
    if (seen_states.insert(state_key(state)).second &&
        seen_states.size() > max_states) {
      throw std::runtime_error("oracle: reachable state cap exceeded");
    }
    const std::vector<Action> candidates = env.valid_actions(state);
    if (policy == nullptr) {
      double best = -1.0;
      for (const Action& a : candidates)
        best = std::max(best, action_value(state, a));
      return best;
    }
    const std::vector<double> probs = (*policy)(state, last_obs, candidates);
    if (probs.size() != candidates.size())
      throw std::runtime_error("oracle: policy returned wrong arity");
    double value = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (probs[i] == 0.0) continue;  // skip unreachable branches
      value += probs[i] * action_value(state, candidates[i]);
    }
    return value;
  }
};

QTable build_oracle(const Environment& env, const PolicyFn* policy,
                    std::size_t max_states) {
  OracleBuilder builder{env, policy, max_states, {}, {}, {}};
  const ResetResult rr = env.reset();
  builder.table.root_value = builder.state_value(rr.state, rr.observation);
  builder.table.reachable_states = builder.seen_states.size();
  return std::move(builder.table);
}

}  // namespace

QTable exact_q_oracle(const Environment& env, const PolicyFn& policy,
                      std::size_t max_states) {
  return build_oracle(env, &policy, max_states);
}

QTable exact_q_oracle(EnvKind kind, std::uint64_t seed, const PolicyFn& policy,
                      std::size_t max_states) {
  return exact_q_oracle(*make_env(kind, seed), policy, max_states);
}

QTable optimal_q_oracle(const Environment& env, std::size_t max_states) {
  return build_oracle(env, nullptr, max_states);
}

namespace {

// Minimum steps to reach a terminal while only taking Q*-optimal actions.
// Used to break Q* ties toward the fastest optimal continuation.
int steps_to_go(const Environment& env, const QTable& optimal,
                const EnvState& state,
                std::unordered_map<std::string, int>& memo) {
  const std::string key = state_key(state);
  if (auto it = memo.find(key); it != memo.end()) return it->second;
  const std::vector<Action> candidates = env.valid_actions(state);
  double best_q = -2.0;
  for (const Action& a : candidates)
    best_q = std::max(best_q, optimal.at(key, a));
  int best_steps = env.max_steps() + 1;
  for (const Action& a : candidates) {
    if (optimal.at(key, a) < best_q - 1e-12) continue;
    const StepResult res = env.step(state, a);
    const int steps =
        res.terminal ? 1 : 1 + steps_to_go(env, optimal, res.state, memo);
    best_steps = std::min(best_steps, steps);
  }
  memo.emplace(key, best_steps);
  return best_steps;
}

}  // namespace

std::map<std::string, Action> optimal_action_table(const Environment& env,
                                                   const QTable& optimal) {
  std::map<std::string, Action> best;
  std::unordered_map<std::string, int> steps_memo;
  // Walk the reachable graph so ties break by candidate order, not text order.
  std::unordered_set<std::string> visited;
  std::vector<EnvState> frontier;
  frontier.push_back(env.reset().state);
  visited.insert(state_key(frontier.back()));
  while (!frontier.empty()) {
    const EnvState state = frontier.back();
    frontier.pop_back();
    if (state.terminal) continue;
    const std::vector<Action> candidates = env.valid_actions(state);
    const std::string key = state_key(state);
    double best_q = -2.0;
    int best_steps = 0;
    Action best_action;
    for (const Action& a : candidates) {
      const double q = optimal.at(key, a);
      const StepResult res = env.step(state, a);
      if (!res.terminal && visited.insert(state_key(res.state)).second)
        frontier.push_back(res.state);
      int steps = env.max_steps() + 2;
      if (q >= best_q - 1e-12)
        steps = res.terminal
                    ? 1
                    : 1 + steps_to_go(env, optimal, res.state, steps_memo);
      if (q > best_q + 1e-12 || (q > best_q - 1e-12 && steps < best_steps)) {
        best_q = std::max(best_q, q);
        best_steps = steps;
        best_action = a;
      }
    }
    best.emplace(key, best_action);
  }
  return best;
}

}  // namespace qsteer
