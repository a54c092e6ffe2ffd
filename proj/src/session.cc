#include "pushdqn/session.h"

#include "pushdqn/checkpoint.h"
#include "pushdqn/observe.h"
#include "pushdqn/trainer.h"

namespace pushdqn {

namespace {

nlohmann::json Color(const Rgb& c) { return {c[0], c[1], c[2]}; }

nlohmann::json Body(const Vec2& pose, double half) {
  return {{"pose", pose}, {"half_extent", half}};
}

Vec2 Square(double h) { return {h, h}; }

bool InsideSurface(const Vec2& c, const Vec2& half, const GeometryConfig& g) {
  return c.x - half.x >= 0.0 && c.x + half.x <= g.surface_width &&
         c.y - half.y >= 0.0 && c.y + half.y <= g.surface_height;
}

Vec2 RequirePosition(const nlohmann::json& payload) {
  if (!payload.contains("position")) {
    throw ProtocolError("perturb: missing position");
  }
  try {
    return payload.at("position").get<Vec2>();
  } catch (const nlohmann::json::exception&) {
    throw ProtocolError("perturb: position must be {x, y}");
  }
}

nlohmann::json Envelope(std::string type, const std::string& session,
                        nlohmann::json payload, std::int64_t seq) {
  return {{"type", std::move(type)},
          {"session", session.empty() ? nlohmann::json(nullptr)
                                      : nlohmann::json(session)},
          {"payload", std::move(payload)},
          {"seq", seq}};
}

}  // namespace

nlohmann::json SceneToJson(const WorldState& w, const GeometryConfig& g) {
  nlohmann::json obstacles = nlohmann::json::array();
  for (std::size_t i = 0; i < w.obstacles.size(); ++i) {
    nlohmann::json o = Body(w.obstacles[i], g.obstacle_half_extent);
    o["initial"] = w.obstacle_initial[i];
    o["displacement"] = w.cumulative_obstacle_displacement[i];
    obstacles.push_back(std::move(o));
  }
  nlohmann::json distractors = nlohmann::json::array();
  for (const Vec2& d : w.distractors) {
    distractors.push_back(Body(d, g.object_half_extent));
  }
  return {
      {"surface", {{"width", g.surface_width}, {"height", g.surface_height}}},
      {"tool", {{"pose", w.tool_pose}, {"half_extents", g.tool_half_extents}}},
      {"object", Body(w.object_pose, g.object_half_extent)},
      {"target", Body(w.target_pose, g.target_half_extent)},
      {"obstacles", std::move(obstacles)},
      {"distractors", std::move(distractors)},
      {"step_count", w.step_count},
      {"status", StatusName(Termination(w, g))},
      {"geometry", g},
      {"rng_state", w.rng.State()},
      {"colors",
       {{"background", Color(palette::kBackground)},
        {"target", Color(palette::kTarget)},
        {"obstacle", Color(palette::kObstacle)},
        {"distractor", Color(palette::kDistractor)},
        {"object", Color(palette::kObject)},
        {"tool", Color(palette::kTool)}}},
  };
}

Scene SceneFromJson(const nlohmann::json& j) {
  try {
    Scene s;
    s.geometry = j.at("geometry").get<GeometryConfig>();
    s.geometry.Validate();
    WorldState& w = s.world;
    w.tool_pose = j.at("tool").at("pose").get<Vec2>();
    w.object_pose = j.at("object").at("pose").get<Vec2>();
    w.target_pose = j.at("target").at("pose").get<Vec2>();
    for (const auto& o : j.at("obstacles")) {
      w.obstacles.push_back(o.at("pose").get<Vec2>());
      w.obstacle_initial.push_back(o.at("initial").get<Vec2>());
      w.cumulative_obstacle_displacement.push_back(
          o.at("displacement").get<double>());
    }
    for (const auto& d : j.at("distractors")) {
      w.distractors.push_back(d.at("pose").get<Vec2>());
    }
    w.step_count = j.at("step_count").get<int>();
    w.rng.SetState(j.at("rng_state").get<std::string>());
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("scene: ") + e.what());
  }
}

SessionManager::SessionManager(SessionServiceConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.geometry.Validate();
}

std::size_t SessionManager::session_count() const {
  std::lock_guard<std::mutex> lock(mu_);
  return sessions_.size();
}

nlohmann::json SessionManager::HandleText(const std::string& text,
                                          ConnectionId owner) {
  nlohmann::json request;
  try {
    request = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    return Envelope("error", "", {{"message", std::string("bad json: ") + e.what()}},
                    0);
  }
  return Handle(request, owner);
}

nlohmann::json SessionManager::Handle(const nlohmann::json& request,
                                      ConnectionId owner) {
  std::string session_id;
  std::int64_t seq = 0;
  try {
    if (!request.is_object() || !request.contains("type") ||
        !request["type"].is_string()) {
      throw ProtocolError("envelope needs a string type");
    }
    if (!request.contains("seq") || !request["seq"].is_number_integer()) {
      throw ProtocolError("envelope needs an integer seq");
    }
    seq = request["seq"].get<std::int64_t>();
    if (request.contains("session") && request["session"].is_string()) {
      session_id = request["session"].get<std::string>();
    }
    const nlohmann::json payload =
        request.value("payload", nlohmann::json::object());
    if (!payload.is_object()) throw ProtocolError("payload must be an object");
    const std::string type = request["type"].get<std::string>();

    if (type == "create") return Create(payload, seq, owner);
    if (type != "step" && type != "perturb") {
      throw ProtocolError("unknown message type: " + type);
    }
    if (session_id.empty()) throw ProtocolError(type + ": missing session");
    std::shared_ptr<Session> s = Find(session_id, owner);
    std::lock_guard<std::mutex> lock(s->mu);
    if (seq <= s->last_seq) {
      throw ProtocolError("seq " + std::to_string(seq) +
                          " does not increase (last " +
                          std::to_string(s->last_seq) + ")");
    }
    nlohmann::json reply = type == "step" ? Step(*s, payload) : Perturb(*s, payload);
    s->last_seq = seq;
    s->last_reply = std::chrono::steady_clock::now();
    return Envelope(type == "step" ? "stepped" : "perturbed", session_id,
                    std::move(reply), seq);
  } catch (const std::exception& e) {
    return Envelope("error", session_id, {{"message", e.what()}}, seq);
  }
}

nlohmann::json SessionManager::Create(const nlohmann::json& payload,
                                      std::int64_t seq, ConnectionId owner) {
  auto s = std::make_shared<Session>();
  const std::string mode = payload.value("mode", std::string("human"));
  if (mode == "human") {
    s->mode = SessionMode::kHuman;
  } else if (mode == "agent") {
    s->mode = SessionMode::kAgent;
  } else {
    throw ProtocolError("create: mode must be human or agent");
  }
  const auto seed = payload.value("seed", std::uint64_t{0});
  const int n_obstacles = payload.value("n_obstacles", 2);
  if (n_obstacles < 0) throw ProtocolError("create: n_obstacles must be >= 0");
  s->geometry = cfg_.geometry;
  if (payload.contains("slip_sigma")) {
    s->geometry.slip_sigma = payload["slip_sigma"].get<double>();
    s->geometry.Validate();
  }
  if (s->mode == SessionMode::kAgent) {
    std::string path = payload.value("checkpoint", cfg_.default_checkpoint);
    if (path.empty()) throw ProtocolError("create: agent mode needs a checkpoint");
    s->net = LoadNetwork(path);
  }
  s->world = MakeScenario(seed, n_obstacles, s->geometry);
  s->status = Termination(s->world, s->geometry);
  s->owner = owner;
  s->last_seq = seq;
  s->last_reply = std::chrono::steady_clock::now();
  s->record.mode = s->mode == SessionMode::kHuman ? "human" : "agent";
  s->record.seed = seed;
  s->record.n_obstacles = n_obstacles;
  {
    std::lock_guard<std::mutex> lock(mu_);
    s->id = "s" + std::to_string(next_id_++);
    sessions_[s->id] = s;
  }
  return Envelope("created", s->id,
                  {{"scene", SceneToJson(s->world, s->geometry)},
                   {"mode", s->record.mode}},
                  seq);
}

std::shared_ptr<SessionManager::Session> SessionManager::Find(
    const std::string& id, ConnectionId owner) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ProtocolError("unknown session " + id);
  if (it->second->owner != owner) {
    throw ProtocolError("session " + id + " belongs to another connection");
  }
  return it->second;
}

std::shared_ptr<const QNetwork<float>> SessionManager::LoadNetwork(
    const std::string& path) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = networks_.find(path);
    if (it != networks_.end()) return it->second;
  }
  Checkpoint ck = [&] {
    try {
      return ReadCheckpointFile(path, ConfigHash(cfg_.geometry));
    } catch (const CheckpointError& e) {
      throw ProtocolError(std::string("create: bad checkpoint: ") + e.what());
    }
  }();
  const bool primary = ck.meta.run_config.value("exploit_with_primary", false);
  auto net = std::make_shared<const QNetwork<float>>(
      primary ? std::move(ck.pair.primary) : std::move(ck.pair.target));
  std::lock_guard<std::mutex> lock(mu_);
  return networks_.emplace(path, std::move(net)).first->second;
}

nlohmann::json SessionManager::Step(Session& s, const nlohmann::json& payload) {
  if (IsTerminal(s.status)) {
    throw ProtocolError("step: episode already ended (" +
                        std::string(StatusName(s.status)) + ")");
  }
  std::optional<Action> action;
  if (payload.value("auto", false)) {
    if (s.mode != SessionMode::kAgent) {
      throw ProtocolError("step: auto needs an agent session");
    }
    action = GreedyAction(*s.net, s.world, s.geometry, s.net->arch().in_height);
  } else {
    if (!payload.contains("action") || !payload["action"].is_number_integer()) {
      throw ProtocolError("step: needs an integer action or auto:true");
    }
    const int index = payload["action"].get<int>();
    if (index < 1 || index > kNumActions) {
      throw ProtocolError("step: action must be in 1..5");
    }
    action = Action(index);
  }
  StepResult r = pushdqn::Step(s.world, *action, s.geometry);
  const double reward =
      RewardTotal(s.world, r.world, r.status, cfg_.weights, s.geometry.d_a);
  s.world = std::move(r.world);
  s.status = r.status;
  s.record.actions.push_back(action->index());
  s.record.rewards.push_back(reward);
  if (s.mode == SessionMode::kHuman) {
    double latency;
    if (payload.contains("latency_ms") && payload["latency_ms"].is_number()) {
      latency = payload["latency_ms"].get<double>();
    } else {
      latency = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - s.last_reply)
                    .count();
    }
    s.record.latency_ms.push_back(latency);
  }
  if (IsTerminal(s.status)) Finish(s);
  return {{"scene", SceneToJson(s.world, s.geometry)},
          {"action", action->index()},
          {"reward", reward},
          {"status", StatusName(s.status)}};
}

nlohmann::json SessionManager::Perturb(Session& s,
                                       const nlohmann::json& payload) {
  if (IsTerminal(s.status)) {
    throw ProtocolError("perturb: episode already ended");
  }
  const std::string kind = payload.value("kind", std::string());
  const GeometryConfig& g = s.geometry;
  WorldState& w = s.world;
  if (kind == "move_object") {
    const Vec2 p = RequirePosition(payload);
    if (!InsideSurface(p, Square(g.object_half_extent), g)) {
      throw ProtocolError("perturb: object position off the surface");
    }
    w.object_pose = p;
  } else if (kind == "move_obstacle") {
    const int i = payload.value("index", 0);
    if (i < 0 || i >= static_cast<int>(w.obstacles.size())) {
      throw ProtocolError("perturb: no obstacle " + std::to_string(i));
    }
    const Vec2 p = RequirePosition(payload);
    if (!InsideSurface(p, Square(g.obstacle_half_extent), g)) {
      throw ProtocolError("perturb: obstacle position off the surface");
    }
    // Shift the reference pose with the obstacle so the move itself does
    // not count as displacement caused by the tool.
    w.obstacle_initial[i] += p - w.obstacles[i];
    w.obstacles[i] = p;
  } else if (kind == "move_target") {
    const Vec2 p = RequirePosition(payload);
    if (!InsideSurface(p, Square(g.target_half_extent), g)) {
      throw ProtocolError("perturb: target position off the surface");
    }
    w.target_pose = p;
  } else if (kind == "set_slip_sigma") {
    if (!payload.contains("value") || !payload["value"].is_number() ||
        payload["value"].get<double>() < 0.0) {
      throw ProtocolError("perturb: set_slip_sigma needs a value >= 0");
    }
    s.geometry.slip_sigma = payload["value"].get<double>();
  } else if (kind == "add_distractor") {
    const Vec2 p = RequirePosition(payload);
    if (!InsideSurface(p, Square(g.object_half_extent), g)) {
      throw ProtocolError("perturb: distractor position off the surface");
    }
    w.distractors.push_back(p);
  } else {
    throw ProtocolError("perturb: unknown kind '" + kind + "'");
  }
  s.status = Termination(w, s.geometry);
  if (IsTerminal(s.status)) Finish(s);
  return {{"scene", SceneToJson(w, s.geometry)},
          {"kind", kind},
          {"status", StatusName(s.status)}};
}

void SessionManager::Finish(Session& s) {
  s.record.outcome = s.status;
  if (cfg_.episode_log == nullptr) return;
  std::lock_guard<std::mutex> lock(log_mu_);
  *cfg_.episode_log << nlohmann::json(s.record).dump() << '\n';
  cfg_.episode_log->flush();
}

void SessionManager::DropConnection(ConnectionId owner) {
  std::lock_guard<std::mutex> lock(mu_);
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    if (it->second->owner == owner) {
      it = sessions_.erase(it);
    } else {
      ++it;
    }
  }
}

}  // namespace pushdqn
