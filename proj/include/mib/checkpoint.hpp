#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mib/common.hpp"

namespace mib {

inline constexpr int kCheckpointVersion = 1;

// Checkpoint container: a JSON manifest (format version, embedded run config,
// counters, rng states, tensor names/shapes/offsets) followed by the raw
// little-endian f32 tensor payload. Replay buffer transitions are not stored.
struct CheckpointData {
  int version = kCheckpointVersion;
  std::string config_json;
  long env_steps = 0;
  long interactions = 0;
  long updates = 0;
  long buffer_cursor = 0;
  std::map<std::string, std::string> rng_states;
  std::map<std::string, long> counters;
  VecD running_mean, running_m2;
  long running_n = 0;
  std::vector<std::pair<std::string, MatF>> tensors;

  const MatF& tensor(const std::string& name) const;
};

void write_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData read_checkpoint(const std::string& path);

}  // namespace mib
