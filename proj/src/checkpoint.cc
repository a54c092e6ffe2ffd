#include "pushdqn/checkpoint.h"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <zlib.h>

namespace pushdqn {

namespace {

constexpr char kMagic[8] = {'P', 'D', 'Q', 'N', 'C', 'K', 'P', 'T'};

template <typename U>
U ToLittle(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    U r = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      r = (r << 8) | (v & 0xff);
      v >>= 8;
    }
    return r;
  } else {
    return v;
  }
}

void AppendU32(std::string& out, std::uint32_t v) {
  v = ToLittle(v);
  out.append(reinterpret_cast<const char*>(&v), sizeof(v));
}

void AppendFloats(std::string& out, const ParamList<float>& list) {
  for (const auto& t : list) {
    for (float f : t.values()) {
      const std::uint32_t bits = ToLittle(std::bit_cast<std::uint32_t>(f));
      out.append(reinterpret_cast<const char*>(&bits), sizeof(bits));
    }
  }
}

void AppendDoubles(std::string& out,
                   const std::vector<std::vector<double>>& list) {
  for (const auto& v : list) {
    for (double d : v) {
      const std::uint64_t bits = ToLittle(std::bit_cast<std::uint64_t>(d));
      out.append(reinterpret_cast<const char*>(&bits), sizeof(bits));
    }
  }
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view Take(std::size_t n) {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(CheckpointError::Kind::kCorrupt,
                            "checkpoint: truncated payload");
    }
    std::string_view s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t U32() {
    std::uint32_t v;
    std::memcpy(&v, Take(sizeof(v)).data(), sizeof(v));
    return ToLittle(v);
  }
  void ReadFloats(ParamList<float>& list) {
    for (auto& t : list) {
      for (float& f : t.values()) {
        std::uint32_t bits;
        std::memcpy(&bits, Take(sizeof(bits)).data(), sizeof(bits));
        f = std::bit_cast<float>(ToLittle(bits));
      }
    }
  }
  void ReadDoubles(std::vector<std::vector<double>>& list) {
    for (auto& v : list) {
      for (double& d : v) {
        std::uint64_t bits;
        std::memcpy(&bits, Take(sizeof(bits)).data(), sizeof(bits));
        d = std::bit_cast<double>(ToLittle(bits));
      }
    }
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::string_view Rest() const { return bytes_.substr(pos_); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string HashHex(std::uint64_t h) {
  std::ostringstream s;
  s << std::hex;
  s.width(16);
  s.fill('0');
  s << h;
  return s.str();
}

std::uint32_t Crc(std::string_view data) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(data.data()),
            static_cast<uInt>(data.size())));
}

}  // namespace

std::uint64_t ConfigHash(const GeometryConfig& cfg) {
  const std::string canonical = nlohmann::json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string SaveCheckpoint(const NetworkPair<float>& pair,
                           const AdamState<float>& adam,
                           const CheckpointMeta& meta) {
  std::string payload;
  AppendFloats(payload, pair.primary.params());
  AppendFloats(payload, pair.target.params());
  AppendFloats(payload, adam.m);
  AppendFloats(payload, adam.v);
  AppendDoubles(payload, pair.target_master);

  const Architecture& arch = pair.primary.arch();
  nlohmann::json header = {
      {"format_version", kCheckpointFormatVersion},
      {"arch_id", arch.Id()},
      {"architecture", arch},
      {"shapes", arch.ParamShapes()},
      {"blocks",
       {{{"name", "primary"}, {"dtype", "f32le"}},
        {{"name", "target"}, {"dtype", "f32le"}},
        {{"name", "adam_m"}, {"dtype", "f32le"}},
        {{"name", "adam_v"}, {"dtype", "f32le"}},
        {{"name", "target_accumulator"}, {"dtype", "f64le"}}}},
      {"payload_bytes", payload.size()},
      {"payload_crc32", Crc(payload)},
      {"episode", meta.episode},
      {"config_hash", HashHex(meta.config_hash)},
      {"rng_state", meta.rng_state},
      {"adam",
       {{"step_count", adam.step_count},
        {"beta1", adam.beta1},
        {"beta2", adam.beta2},
        {"eps", adam.eps},
        {"learning_rate", adam.learning_rate}}},
      {"run_config", meta.run_config},
  };
  const std::string header_text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  AppendU32(out, static_cast<std::uint32_t>(header_text.size()));
  out += header_text;
  out += payload;
  return out;
}

Checkpoint LoadCheckpoint(std::string_view bytes,
                          std::optional<std::uint64_t> expected_hash) {
  using Kind = CheckpointError::Kind;
  Reader r(bytes);
  if (r.Take(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
    throw CheckpointError(Kind::kCorrupt, "checkpoint: bad magic");
  }
  const std::uint32_t header_len = r.U32();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.Take(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(Kind::kCorrupt,
                          std::string("checkpoint: bad header: ") + e.what());
  }

  const int version = header.value("format_version", -1);
  if (version != kCheckpointFormatVersion) {
    throw CheckpointError(Kind::kVersionMismatch,
                          "checkpoint: format version " +
                              std::to_string(version) + ", expected " +
                              std::to_string(kCheckpointFormatVersion));
  }

  try {
    const Architecture arch = header.at("architecture").get<Architecture>();
    if (arch.Id() != header.at("arch_id").get<std::string>()) {
      throw CheckpointError(Kind::kCorrupt,
                            "checkpoint: arch_id does not match architecture");
    }
    if (header.at("shapes").get<std::vector<std::vector<int>>>() !=
        arch.ParamShapes()) {
      throw CheckpointError(Kind::kCorrupt,
                            "checkpoint: shapes do not match architecture");
    }
    const std::string_view payload = r.Rest();
    if (payload.size() != header.at("payload_bytes").get<std::size_t>()) {
      throw CheckpointError(Kind::kCorrupt,
                            "checkpoint: payload size mismatch (truncated?)");
    }
    if (Crc(payload) != header.at("payload_crc32").get<std::uint32_t>()) {
      throw CheckpointError(Kind::kCorrupt, "checkpoint: payload checksum");
    }

    Checkpoint ck{NetworkPair<float>(arch), {}, {}, {}};
    ck.adam = AdamState<float>::For(ck.pair.primary.params());
    r.ReadFloats(ck.pair.primary.params());
    r.ReadFloats(ck.pair.target.params());
    r.ReadFloats(ck.adam.m);
    r.ReadFloats(ck.adam.v);
    r.ReadDoubles(ck.pair.target_master);
    if (r.remaining() != 0) {
      throw CheckpointError(Kind::kCorrupt, "checkpoint: trailing bytes");
    }

    const nlohmann::json& adam = header.at("adam");
    ck.adam.step_count = adam.at("step_count").get<std::int64_t>();
    ck.adam.beta1 = adam.at("beta1").get<double>();
    ck.adam.beta2 = adam.at("beta2").get<double>();
    ck.adam.eps = adam.at("eps").get<double>();
    ck.adam.learning_rate = adam.at("learning_rate").get<double>();

    ck.meta.episode = header.at("episode").get<std::int64_t>();
    ck.meta.config_hash =
        std::stoull(header.at("config_hash").get<std::string>(), nullptr, 16);
    ck.meta.rng_state = header.at("rng_state").get<std::string>();
    ck.meta.run_config = header.value("run_config", nlohmann::json::object());

    if (expected_hash && *expected_hash != ck.meta.config_hash) {
      ck.warnings.push_back("checkpoint geometry hash " +
                            HashHex(ck.meta.config_hash) +
                            " differs from current " + HashHex(*expected_hash));
    }
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(Kind::kCorrupt,
                          std::string("checkpoint: bad header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(Kind::kCorrupt,
                          std::string("checkpoint: ") + e.what());
  }
}

void WriteCheckpointFile(const std::string& path,
                         const NetworkPair<float>& pair,
                         const AdamState<float>& adam,
                         const CheckpointMeta& meta) {
  const std::string bytes = SaveCheckpoint(pair, adam, meta);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) {
      throw CheckpointError(CheckpointError::Kind::kIo,
                            "cannot open " + tmp + " for writing");
    }
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) {
      throw CheckpointError(CheckpointError::Kind::kIo, "write failed: " + tmp);
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw CheckpointError(CheckpointError::Kind::kIo,
                          "cannot move checkpoint into place: " + path);
  }
}

Checkpoint ReadCheckpointFile(const std::string& path,
                              std::optional<std::uint64_t> expected_hash) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw CheckpointError(CheckpointError::Kind::kIo,
                          "cannot open checkpoint " + path);
  }
  std::ostringstream s;
  s << f.rdbuf();
  return LoadCheckpoint(s.str(), expected_hash);
}

}  // namespace pushdqn
