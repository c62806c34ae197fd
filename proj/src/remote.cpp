#include "qsteer/remote.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "qsteer/text.hpp"

namespace qsteer {

std::string render_prompt(const Context& context) {
  std::ostringstream os;
  os << "instruction: " << context.instruction.text << '\n';
  for (const Step& step : context.prefix) {
    os << "action: " << step.action.text << '\n';
    os << "observation: " << step.observation.text << '\n';
  }
  if (context.prefix.empty())
    os << "observation: " << context.last_observation.text << '\n';
  os << "valid actions: ";
  for (std::size_t i = 0; i < context.candidates.size(); ++i) {
    if (i) os << " | ";
    os << context.candidates[i].text;
  }
  os << "\nreply with a line 'thought: ...' followed by a line 'action: ...'.";
  return os.str();
}

Action parse_action(const std::string& content) {
  std::istringstream in(content);
  std::string line;
  while (std::getline(in, line)) {
    const std::string canon = canonicalize(line);
    if (canon.rfind("action:", 0) == 0)
      return make_action(canon.substr(7));
  }
  return invalid_action();
}

std::vector<Action> remote_propose(const EndpointConfig& config,
                                   const Context& context, int n,
                                   double temperature) {
  if (n < 1) throw std::invalid_argument("remote_propose: n must be >= 1");

  nlohmann::json body = {
      {"model", config.model},
      {"messages",
       {{{"role", "system"},
         {"content",
          "you are an agent completing tasks in a text environment. respond "
          "with 'thought: ...' then 'action: <one valid action>'."}},
        {{"role", "user"}, {"content", render_prompt(context)}}}},
      {"temperature", temperature},
      {"n", n}};

  httplib::Client client(config.base_url);
  client.set_connection_timeout(0, config.timeout_ms * 1000);
  client.set_read_timeout(config.timeout_ms / 1000,
                          (config.timeout_ms % 1000) * 1000);
  httplib::Headers headers;
  if (const char* key = std::getenv("Q_STEER_API_KEY"); key != nullptr)
    headers.emplace("Authorization", std::string("Bearer ") + key);

  int backoff_ms = config.backoff_initial_ms;
  std::string last_error;
  for (int attempt = 1; attempt <= config.max_attempts; ++attempt) {
    httplib::Result res = client.Post("/v1/chat/completions", headers,
                                      body.dump(), "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
    } else if (res->status >= 500) {
      last_error = "server error: status " + std::to_string(res->status);
    } else if (res->status != 200) {
      throw std::runtime_error("remote_propose: unexpected status " +
                               std::to_string(res->status));
    } else {
      nlohmann::json reply;
      try {
        reply = nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("remote_propose: malformed body: ") +
                                 e.what());
      }
      if (!reply.contains("choices") || !reply["choices"].is_array())
        throw std::runtime_error("remote_propose: response has no choices");
      std::vector<Action> actions;
      for (const auto& choice : reply["choices"]) {
        const Action a =
            parse_action(choice.at("message").at("content").get<std::string>());
        if (std::find(actions.begin(), actions.end(), a) == actions.end())
          actions.push_back(a);
      }
      if (actions.empty()) actions.push_back(invalid_action());
      return actions;
    }
    if (attempt < config.max_attempts) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
      backoff_ms *= 2;
    }
  }
  throw std::runtime_error("remote_propose: " + last_error + " after " +
                           std::to_string(config.max_attempts) + " attempts");
}

std::vector<Action> RemotePolicy::propose(const Context& context,
                                          const EnvState& /*state*/, int n,
                                          double temperature,
                                          Rng& /*rng*/) const {
  return remote_propose(config_, context, n, temperature);
}

Action RemotePolicy::greedy(const Context& context, const EnvState& /*state*/,
                            Rng& /*rng*/) const {
  return remote_propose(config_, context, 1, 0.0).front();
}

}  // namespace qsteer
