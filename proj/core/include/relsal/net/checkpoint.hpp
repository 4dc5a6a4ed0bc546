#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "relsal/net/model.hpp"

namespace relsal::net {

inline constexpr char kCheckpointMagic[8] = {'R', 'S', 'A', 'L', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  NetworkParams<float> params;
  double gt_scale = 1.0;
};

/// Binary little-endian layout; see docs/checkpoint.md.
std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace relsal::net
