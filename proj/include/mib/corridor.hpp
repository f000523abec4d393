#pragma once

#include <deque>
#include <vector>

#include "mib/env.hpp"

namespace mib {

// 2D point mass driving down an endless corridor with procedurally placed
// block obstacles. Obstacles appear only in the egocentric rendering; the
// proprioceptive vector carries position, velocity and the last action, so
// solving the task requires fusing both modalities.
//
// Dynamics (per raw env step, dt = 0.05):
//   v += dt * (kForceGain * a - kDrag * v);  p += dt * v
// Reward per raw step: kForwardRewardWeight * vx * dt, minus
// kCollisionPenalty while in contact with an obstacle.
class CorridorPointMass final : public Env {
 public:
  static constexpr int kImageSize = 84;
  static constexpr double kDt = 0.05;
  static constexpr double kForceGain = 4.0;
  static constexpr double kDrag = 1.0;
  static constexpr double kHalfWidth = 1.0;   // corridor spans y in [-1, 1]
  static constexpr double kAgentRadius = 0.06;
  static constexpr double kForwardRewardWeight = 0.5;
  static constexpr double kCollisionPenalty = 0.1;
  static constexpr std::uint8_t kBackgroundValue = 40;

  explicit CorridorPointMass(const EnvOptions& opts, bool with_obstacles = true);

  EnvSpec spec() const override;
  MultimodalObservation reset(RngStream& rng) override;
  StepResult step(const VecF& action) override;
  std::uint8_t background_value() const override { return kBackgroundValue; }

  // exposed for tests
  double x() const { return x_; }
  double y() const { return y_; }
  double vx() const { return vx_; }
  struct Obstacle {
    double cx, cy, half_depth, half_width;
  };
  const std::vector<Obstacle>& obstacles() const { return obstacles_; }
  void render_frame(std::vector<std::uint8_t>& frame) const;

 private:
  void physics_step(double ax, double ay, double& reward);
  void ensure_obstacles_until(double x_max);
  MultimodalObservation make_observation() const;
  void push_frame();

  EnvOptions opts_;
  bool with_obstacles_;
  double x_ = 0, y_ = 0, vx_ = 0, vy_ = 0;
  double last_ax_ = 0, last_ay_ = 0;
  int steps_taken_ = 0;  // raw env steps this episode
  bool in_collision_ = false;
  std::vector<Obstacle> obstacles_;
  double obstacles_generated_until_ = 0;
  RngStream obstacle_rng_{0};
  std::deque<std::vector<std::uint8_t>> frames_;
  bool warned_clip_ = false;
};

}  // namespace mib
