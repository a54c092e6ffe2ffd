#ifndef PUSHDQN_SESSION_H_
#define PUSHDQN_SESSION_H_

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "pushdqn/env.h"
#include "pushdqn/episode.h"
#include "pushdqn/network.h"
#include "pushdqn/reward.h"

namespace pushdqn {

// Vector description of a world: poses and extents in cm, palette colors,
// live counters and the generator state. Sufficient to rebuild the world.
nlohmann::json SceneToJson(const WorldState& world, const GeometryConfig& geo);

struct Scene {
  WorldState world;
  GeometryConfig geometry;
};
// Inverse of SceneToJson; throws std::invalid_argument on malformed input.
Scene SceneFromJson(const nlohmann::json& j);

enum class SessionMode { kHuman, kAgent };

// Raised for protocol-level failures; becomes an "error" message.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SessionServiceConfig {
  GeometryConfig geometry;
  RewardWeights weights;
  // Used by agent sessions that do not name their own checkpoint.
  std::string default_checkpoint;
  // Finished episodes are appended here as JSONL (may be null).
  std::ostream* episode_log = nullptr;
};

// Owns all live sessions and implements the message protocol. Envelopes are
// {type, session, payload, seq}. Requests: create, step, perturb. Replies:
// created, stepped, perturbed, error. A request's seq must exceed every seq
// previously seen for its session; replies echo it. Thread-safe; operations
// on one session are serialized.
class SessionManager {
 public:
  using ConnectionId = std::uint64_t;

  explicit SessionManager(SessionServiceConfig cfg);

  // Handles one request from `owner` and returns the reply envelope.
  nlohmann::json Handle(const nlohmann::json& request, ConnectionId owner);
  nlohmann::json HandleText(const std::string& text, ConnectionId owner);

  // Forgets every session owned by the connection.
  void DropConnection(ConnectionId owner);

  std::size_t session_count() const;

 private:
  struct Session {
    std::mutex mu;
    std::string id;
    ConnectionId owner = 0;
    SessionMode mode = SessionMode::kHuman;
    GeometryConfig geometry;
    std::shared_ptr<const QNetwork<float>> net;
    WorldState world;
    Status status = Status::kRunning;
    EpisodeRecord record;
    std::int64_t last_seq = 0;
    std::chrono::steady_clock::time_point last_reply;
  };

  nlohmann::json Create(const nlohmann::json& payload, std::int64_t seq,
                        ConnectionId owner);
  nlohmann::json Step(Session& s, const nlohmann::json& payload);
  nlohmann::json Perturb(Session& s, const nlohmann::json& payload);
  std::shared_ptr<Session> Find(const std::string& id, ConnectionId owner);
  std::shared_ptr<const QNetwork<float>> LoadNetwork(const std::string& path);
  void Finish(Session& s);

  SessionServiceConfig cfg_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::string, std::shared_ptr<const QNetwork<float>>> networks_;
  std::uint64_t next_id_ = 1;
  std::mutex log_mu_;
};

}  // namespace pushdqn

#endif  // PUSHDQN_SESSION_H_
