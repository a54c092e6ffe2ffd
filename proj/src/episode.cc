#include "pushdqn/episode.h"

#include <numeric>

namespace pushdqn {

double EpisodeRecord::Return() const {
  return std::accumulate(rewards.begin(), rewards.end(), 0.0);
}

void to_json(nlohmann::json& j, const EpisodeRecord& r) {
  j = {{"mode", r.mode},
       {"seed", r.seed},
       {"n_obstacles", r.n_obstacles},
       {"actions", r.actions},
       {"rewards", r.rewards},
       {"outcome", StatusName(r.outcome)},
       {"length", r.length()}};
  if (r.episode) j["episode"] = *r.episode;
  if (!r.latency_ms.empty()) j["latency_ms"] = r.latency_ms;
}

void from_json(const nlohmann::json& j, EpisodeRecord& r) {
  r.mode = j.at("mode").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.n_obstacles = j.at("n_obstacles").get<int>();
  r.actions = j.at("actions").get<std::vector<int>>();
  r.rewards = j.at("rewards").get<std::vector<double>>();
  r.outcome = StatusFromName(j.at("outcome").get<std::string>());
  r.episode.reset();
  if (j.contains("episode")) r.episode = j.at("episode").get<std::int64_t>();
  r.latency_ms = j.value("latency_ms", std::vector<double>{});
}

std::vector<std::string> ValidateEpisodeJson(const nlohmann::json& j,
                                             int max_length) {
  std::vector<std::string> problems;
  auto fail = [&](std::string msg) { problems.push_back(std::move(msg)); };
  if (!j.is_object()) {
    fail("record is not an object");
    return problems;
  }
  static const char* const kRequired[] = {"mode",    "seed",    "n_obstacles",
                                          "actions", "rewards", "outcome",
                                          "length"};
  for (const char* key : kRequired) {
    if (!j.contains(key)) fail(std::string("missing key: ") + key);
  }
  if (!problems.empty()) return problems;

  const auto& mode = j["mode"];
  if (!mode.is_string() ||
      (mode != "train" && mode != "eval" && mode != "agent" &&
       mode != "human")) {
    fail("mode must be one of train, eval, agent, human");
  }
  if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) {
    fail("seed must be an integer");
  }
  if (!j["n_obstacles"].is_number_integer() || j["n_obstacles"] < 0) {
    fail("n_obstacles must be a non-negative integer");
  }
  const auto& actions = j["actions"];
  const auto& rewards = j["rewards"];
  if (!actions.is_array()) {
    fail("actions must be an array");
  } else {
    for (const auto& a : actions) {
      if (!a.is_number_integer() || a < 1 || a > kNumActions) {
        fail("action out of range 1..5");
        break;
      }
    }
  }
  if (!rewards.is_array()) {
    fail("rewards must be an array");
  } else {
    for (const auto& r : rewards) {
      if (!r.is_number()) {
        fail("rewards must be numbers");
        break;
      }
    }
  }
  if (actions.is_array() && rewards.is_array() &&
      actions.size() != rewards.size()) {
    fail("actions and rewards differ in length");
  }
  const auto& length = j["length"];
  if (!length.is_number_integer()) {
    fail("length must be an integer");
  } else {
    if (actions.is_array() && length != actions.size()) {
      fail("length does not match the action count");
    }
    if (length > max_length) fail("length exceeds the step limit");
  }
  if (!j["outcome"].is_string()) {
    fail("outcome must be a string");
  } else {
    try {
      if (!IsTerminal(StatusFromName(j["outcome"].get<std::string>()))) {
        fail("outcome must be terminal");
      }
    } catch (const std::invalid_argument&) {
      fail("unknown outcome");
    }
  }
  if (j.contains("latency_ms")) {
    const auto& lat = j["latency_ms"];
    if (!lat.is_array() || (actions.is_array() && lat.size() != actions.size())) {
      fail("latency_ms must be an array with one entry per action");
    }
  }
  if (j.contains("episode") && !j["episode"].is_number_integer()) {
    fail("episode must be an integer");
  }
  return problems;
}

}  // namespace pushdqn
