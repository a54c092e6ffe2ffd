#ifndef PUSHDQN_CHECKPOINT_H_
#define PUSHDQN_CHECKPOINT_H_

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pushdqn/dqn.h"
#include "pushdqn/env.h"

namespace pushdqn {

inline constexpr int kCheckpointFormatVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { kVersionMismatch, kCorrupt, kIo };
  CheckpointError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct CheckpointMeta {
  std::int64_t episode = 0;
  std::uint64_t config_hash = 0;
  std::string rng_state;
  // Free-form record of the run configuration.
  nlohmann::json run_config = nlohmann::json::object();
};

struct Checkpoint {
  NetworkPair<float> pair;
  AdamState<float> adam;
  CheckpointMeta meta;
  // Non-fatal findings, e.g. a geometry hash that differs from the caller's.
  std::vector<std::string> warnings;
};

// FNV-1a over the canonical JSON form of the geometry.
std::uint64_t ConfigHash(const GeometryConfig& cfg);

// Layout: 8-byte magic "PDQNCKPT", u32 little-endian header length, JSON
// header, then little-endian blocks: primary, target, Adam first moments,
// Adam second moments (float32), and the target accumulator (float64).
std::string SaveCheckpoint(const NetworkPair<float>& pair,
                           const AdamState<float>& adam,
                           const CheckpointMeta& meta);

// When expected_hash is given and differs, the checkpoint still loads and a
// warning is recorded.
Checkpoint LoadCheckpoint(std::string_view bytes,
                          std::optional<std::uint64_t> expected_hash = {});

void WriteCheckpointFile(const std::string& path, const NetworkPair<float>& pair,
                         const AdamState<float>& adam,
                         const CheckpointMeta& meta);
Checkpoint ReadCheckpointFile(const std::string& path,
                              std::optional<std::uint64_t> expected_hash = {});

}  // namespace pushdqn

#endif  // PUSHDQN_CHECKPOINT_H_
