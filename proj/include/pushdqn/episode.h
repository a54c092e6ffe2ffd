#ifndef PUSHDQN_EPISODE_H_
#define PUSHDQN_EPISODE_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pushdqn/env.h"

namespace pushdqn {

// One finished (or, for live sessions, in-progress) episode. The JSON form
// is the line format shared by training logs and human-play logs.
struct EpisodeRecord {
  std::string mode = "train";  // train | eval | agent | human
  std::uint64_t seed = 0;
  int n_obstacles = 0;
  std::optional<std::int64_t> episode;  // training episode index
  std::vector<int> actions;
  std::vector<double> rewards;
  Status outcome = Status::kRunning;
  // Wall-clock time per step as reported by the client (human play only).
  std::vector<double> latency_ms;

  int length() const { return static_cast<int>(actions.size()); }
  double Return() const;
};

void to_json(nlohmann::json& j, const EpisodeRecord& r);
void from_json(const nlohmann::json& j, EpisodeRecord& r);

// Schema check for one log line. Returns the list of problems (empty when
// valid). max_length bounds the episode length.
std::vector<std::string> ValidateEpisodeJson(const nlohmann::json& j,
                                             int max_length);

}  // namespace pushdqn

#endif  // PUSHDQN_EPISODE_H_
