#pragma once

#include <memory>
#include <string>

#include "mib/core.hpp"
#include "mib/rng.hpp"

namespace mib {

struct EnvSpec {
  int proprio_dim = 0;
  int action_dim = 0;
  int action_repeat = 1;
  int frame_stack = 3;
  int episode_length = 1000;  // raw env steps; effective steps = episode_length / action_repeat

  bool valid() const {
    return proprio_dim > 0 && action_dim > 0 && action_repeat > 0 && frame_stack > 0 &&
           episode_length > 0;
  }
};

struct StepResult {
  MultimodalObservation obs;
  float reward = 0.f;
  bool done = false;
  bool truncated = false;  // done caused by the time limit only
};

// Pluggable environment: reset/step/spec. Each instance is single-threaded;
// run several instances for parallel evaluation.
class Env {
 public:
  virtual ~Env() = default;
  virtual EnvSpec spec() const = 0;
  virtual MultimodalObservation reset(RngStream& rng) = 0;
  virtual StepResult step(const VecF& action) = 0;
  // Pixel value of empty background, used by the moving-pattern distractor.
  virtual std::uint8_t background_value() const { return 0; }
};

struct EnvOptions {
  int action_repeat = 2;
  int episode_length = 1000;
  int frame_stack = 3;
};

// Factory by task name. Knows "corridor-pointmass".
std::unique_ptr<Env> make_env(const std::string& name, const EnvOptions& opts);

}  // namespace mib
