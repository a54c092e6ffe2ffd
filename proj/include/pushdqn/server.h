#ifndef PUSHDQN_SERVER_H_
#define PUSHDQN_SERVER_H_

#include <string>

#include "pushdqn/env.h"
#include "pushdqn/reward.h"

namespace pushdqn {

struct ServerOptions {
  std::string host = "127.0.0.1";
  unsigned short port = 8765;
  // UI assets served over plain HTTP; empty disables static hosting.
  std::string static_dir;
  // Finished session episodes are appended here (JSONL); empty disables.
  std::string episode_log;
  std::string default_checkpoint;
  GeometryConfig geometry;
  RewardWeights weights;
};

// Serves the session protocol over WebSocket (any path, typically /ws) and
// static files over HTTP on the same port. Blocks until the process ends.
int RunServer(const ServerOptions& opts);

}  // namespace pushdqn

#endif  // PUSHDQN_SERVER_H_
