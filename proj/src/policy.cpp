#include "qsteer/policy.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "qsteer/text.hpp"

namespace qsteer {

Context make_context(const Instruction& instruction,
                     const std::vector<Step>& prefix,
                     const Observation& initial_observation,
                     std::vector<Action> candidates) {
  if (candidates.empty())
    throw std::invalid_argument("context: candidate set must be non-empty");
  Context ctx;
  ctx.instruction = instruction;
  ctx.prefix = prefix;
  ctx.candidates = std::move(candidates);
  ctx.last_observation =
      prefix.empty() ? initial_observation : prefix.back().observation;
  return ctx;
}

namespace {

void add_feature(std::map<int, double>& acc, std::string_view key, int dim) {
  const std::uint64_t h = fnv1a64(key);
  const int index = static_cast<int>(h % static_cast<std::uint64_t>(dim));
  const double sign = (h >> 63) ? -1.0 : 1.0;
  acc[index] += sign;
}

// Glue words excluded from the cross features. Pure-glue tokens are constant
// within a context, so their crosses duplicate the action unigrams while
// adding hash-collision load.
bool is_stopword(const std::string& t) {
  static const std::set<std::string> kStopwords = {
      "a",      "an",      "the",     "i",     "am",    "is",     "are",
      "it",     "to",      "of",      "and",   "or",    "for",    "with",
      "you",    "your",    "in",      "on",    "by",    "we",     "may",
      "can",    "one",     "this",    "that",  "from",  "at",     "as",
      "be",     "no",      "not",     "looking", "choose", "please",
      "lower",  "than",    "dollars", "price", "question", "starting",
      "follow", "times",   "reach",   "link",  "catalogued", "subject",
      "closely", "pick",   "priced",  "under", "holds",  "place",
      "order",  "page",    "products"};
  if (kStopwords.count(t) > 0) return true;
  // Catalog item ids are shuffled per seed; their tokens carry no signal.
  if (t.size() > 4 && t.rfind("item", 0) == 0 &&
      t.find_first_not_of("0123456789", 4) == std::string::npos)
    return true;
  return false;
}

// Content tokens for the cross features; repeats keep their counts.
std::vector<std::string> cross_tokens(const std::string& text) {
  std::vector<std::string> out;
  for (std::string& t : tokenize(text))
    if (!is_stopword(t)) out.push_back(std::move(t));
  return out;
}

}  // namespace

SparseVec featurize(const Instruction& instruction, const Observation& last_obs,
                    const Action& action, int dim) {
  std::vector<std::string> act;
  for (std::string& t : tokenize(action.text))
    if (!is_stopword(t)) act.push_back(std::move(t));
  const std::vector<std::string> ins = cross_tokens(instruction.text);
  const std::vector<std::string> obs = cross_tokens(last_obs.text);

  std::map<int, double> acc;
  for (const std::string& t : act) add_feature(acc, "a:" + t, dim);
  for (std::size_t i = 0; i + 1 < act.size(); ++i)
    add_feature(acc, "a2:" + act[i] + "_" + act[i + 1], dim);
  for (const std::string& u : ins)
    for (const std::string& t : act) add_feature(acc, "ia:" + u + "|" + t, dim);
  for (const std::string& o : obs)
    for (const std::string& t : act) add_feature(acc, "oa:" + o + "|" + t, dim);

  SparseVec out;
  out.reserve(acc.size());
  for (const auto& [index, value] : acc)
    if (value != 0.0) out.emplace_back(index, value);
  return out;
}

double sparse_dot(const std::vector<double>& weights, const SparseVec& features) {
  double sum = 0.0;
  for (const auto& [index, value] : features) sum += weights[index] * value;
  return sum;
}

// ---------------------------------------------------------------------------
// FeaturizedPolicy
// ---------------------------------------------------------------------------

FeaturizedPolicy::FeaturizedPolicy(std::vector<double> weights)
    : weights_(std::move(weights)) {
  if (weights_.empty())
    throw std::invalid_argument("policy: weight vector must be non-empty");
}

FeaturizedPolicy FeaturizedPolicy::random_init(std::uint64_t seed, double stddev,
                                               int dim) {
  Rng rng(mix_seed(0xF0A7u, seed));
  std::vector<double> w(dim);
  for (double& x : w) x = stddev * rng.next_gaussian();
  return FeaturizedPolicy(std::move(w));
}

nlohmann::json FeaturizedPolicy::to_json() const {
  return {{"dim", dim()},
          {"weights", weights_},
          {"featurizer_version", kFeaturizerVersion}};
}

FeaturizedPolicy FeaturizedPolicy::from_json(const nlohmann::json& j) {
  const std::string version = j.at("featurizer_version").get<std::string>();
  if (version != kFeaturizerVersion)
    throw std::runtime_error("policy: featurizer version mismatch: " + version);
  std::vector<double> w = j.at("weights").get<std::vector<double>>();
  if (static_cast<int>(w.size()) != j.at("dim").get<int>())
    throw std::runtime_error("policy: weight length does not match dim");
  return FeaturizedPolicy(std::move(w));
}

std::vector<double> FeaturizedPolicy::logits(const Context& context) const {
  std::vector<double> out;
  out.reserve(context.candidates.size());
  for (const Action& a : context.candidates)
    out.push_back(sparse_dot(
        weights_, featurize(context.instruction, context.last_observation, a,
                            dim())));
  return out;
}

namespace detail {

std::vector<double> log_softmax(std::vector<double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - m);
  const double lse = m + std::log(sum);
  for (double& v : logits) v -= lse;
  return logits;
}

}  // namespace detail

std::vector<double> action_log_probs(const FeaturizedPolicy& policy,
                                     const Context& context) {
  return detail::log_softmax(policy.logits(context));
}

double log_prob(const FeaturizedPolicy& policy, const Context& context,
                const Action& action) {
  const std::vector<double> lp = action_log_probs(policy, context);
  for (std::size_t i = 0; i < context.candidates.size(); ++i)
    if (context.candidates[i] == action) return lp[i];
  throw std::invalid_argument("log_prob: action not in candidate set: " +
                              action.text);
}

std::vector<double> action_probabilities(const FeaturizedPolicy& policy,
                                         const Context& context,
                                         double temperature) {
  if (temperature <= 0.0)
    throw std::invalid_argument("temperature must be positive");
  std::vector<double> logits = policy.logits(context);
  for (double& v : logits) v /= temperature;
  std::vector<double> probs = detail::log_softmax(std::move(logits));
  for (double& v : probs) v = std::exp(v);
  return probs;
}

namespace {

std::size_t sample_index(const std::vector<double>& probs, Rng& rng) {
  const double u = rng.next_double();
  double cum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) return i;
  }
  return probs.size() - 1;  // guard against rounding at the top end
}

std::vector<Action> dedup_keep_order(const std::vector<Action>& draws) {
  std::vector<Action> out;
  for (const Action& a : draws)
    if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
  return out;
}

}  // namespace

std::vector<Action> propose(const FeaturizedPolicy& policy, const Context& context,
                            int n, double temperature, Rng& rng) {
  if (n < 1) throw std::invalid_argument("propose: n must be >= 1");
  const std::vector<double> probs =
      action_probabilities(policy, context, temperature);
  std::vector<Action> draws;
  draws.reserve(n);
  for (int i = 0; i < n; ++i)
    draws.push_back(context.candidates[sample_index(probs, rng)]);
  return dedup_keep_order(draws);
}

std::vector<Action> FeaturizedPolicy::propose(const Context& context,
                                              const EnvState& /*state*/, int n,
                                              double temperature,
                                              Rng& rng) const {
  return qsteer::propose(*this, context, n, temperature, rng);
}

Action FeaturizedPolicy::greedy(const Context& context, const EnvState& /*state*/,
                                Rng& /*rng*/) const {
  const std::vector<double> scores = logits(context);
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return context.candidates[best];
}

// ---------------------------------------------------------------------------
// ScriptedAgent
// ---------------------------------------------------------------------------

ScriptedAgent::ScriptedAgent(
    double epsilon, std::shared_ptr<const std::map<std::string, Action>> table)
    : epsilon_(epsilon), best_(std::move(table)) {
  if (epsilon_ < 0.0 || epsilon_ > 1.0)
    throw std::invalid_argument("scripted agent: epsilon must be in [0,1]");
}

ScriptedAgent ScriptedAgent::make(const Environment& env, double epsilon) {
  const QTable optimal = optimal_q_oracle(env);
  auto table = std::make_shared<std::map<std::string, Action>>(
      optimal_action_table(env, optimal));
  return ScriptedAgent(epsilon, std::move(table));
}

Action ScriptedAgent::draw(const Context& context, const EnvState& state,
                           Rng& rng) const {
  if (rng.next_double() < epsilon_)
    return context.candidates[rng.next_below(context.candidates.size())];
  auto it = best_->find(state_key(state));
  if (it == best_->end())
    return context.candidates[rng.next_below(context.candidates.size())];
  return it->second;
}

std::vector<Action> ScriptedAgent::propose(const Context& context,
                                           const EnvState& state, int n,
                                           double /*temperature*/,
                                           Rng& rng) const {
  if (n < 1) throw std::invalid_argument("propose: n must be >= 1");
  std::vector<Action> draws;
  draws.reserve(n);
  for (int i = 0; i < n; ++i) draws.push_back(draw(context, state, rng));
  return dedup_keep_order(draws);
}

Action ScriptedAgent::greedy(const Context& context, const EnvState& state,
                             Rng& rng) const {
  return draw(context, state, rng);
}

// ---------------------------------------------------------------------------
// ExhaustiveProposer
// ---------------------------------------------------------------------------

std::vector<Action> ExhaustiveProposer::propose(const Context& context,
                                                const EnvState& /*state*/, int n,
                                                double /*temperature*/,
                                                Rng& /*rng*/) const {
  std::vector<Action> out = context.candidates;
  if (static_cast<int>(out.size()) > n) out.resize(n);
  return out;
}

Action ExhaustiveProposer::greedy(const Context& context,
                                  const EnvState& /*state*/, Rng& /*rng*/) const {
  return context.candidates.front();
}

}  // namespace qsteer
