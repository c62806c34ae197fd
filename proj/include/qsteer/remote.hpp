#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qsteer/policy.hpp"
#include "qsteer/types.hpp"

namespace qsteer {

// Chat-completions endpoint. Auth comes from the Q_STEER_API_KEY environment
// variable when set (sent as a bearer token).
struct EndpointConfig {
  std::string base_url;  // e.g. "http://127.0.0.1:8089"
  std::string model = "qsteer-proposer";
  int max_attempts = 3;          // transport errors retried with backoff
  int backoff_initial_ms = 100;  // doubles after each failed attempt
  int timeout_ms = 5000;
};

// Fixed prompt template: instruction, the action/observation history, the
// current observation, the candidate list, and a request for a
// "thought: ... / action: ..." reply.
std::string render_prompt(const Context& context);

// First "action: ..." line of a completion, canonicalized; the invalid-action
// sentinel when no such line exists.
Action parse_action(const std::string& content);

// One POST {base_url}/v1/chat/completions with fields {model, messages,
// temperature, n}; reads choices[i].message.content, parses each choice and
// deduplicates. Retries transport errors and 5xx responses up to
// max_attempts; throws std::runtime_error when attempts are exhausted or the
// response body is malformed.
std::vector<Action> remote_propose(const EndpointConfig& config,
                                   const Context& context, int n,
                                   double temperature);

class RemotePolicy : public Proposer {
 public:
  explicit RemotePolicy(EndpointConfig config) : config_(std::move(config)) {}

  std::vector<Action> propose(const Context& context, const EnvState& state,
                              int n, double temperature, Rng& rng) const override;
  Action greedy(const Context& context, const EnvState& state,
                Rng& rng) const override;

 private:
  EndpointConfig config_;
};

}  // namespace qsteer
