#include "mib/corridor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace mib {

namespace {
// Obstacle field layout: one block roughly every kSpacing units of corridor,
// starting past the spawn area, with jittered center and lateral position.
constexpr double kFirstObstacleX = 4.0;
constexpr double kSpacing = 3.0;
constexpr double kJitter = 0.8;
constexpr double kObstacleHalfDepth = 0.25;
constexpr double kObstacleHalfWidth = 0.45;
constexpr double kMaxCenterY = 0.55;

// Egocentric view: the window [x-0.5, x+5.5] x [y-1.5, y+1.5] maps onto the
// 84x84 frame with the far end at row 0 and the agent fixed near the bottom.
constexpr double kViewBehind = 0.5;
constexpr double kViewAhead = 5.5;
constexpr double kViewHalfSpan = 1.5;
}  // namespace

CorridorPointMass::CorridorPointMass(const EnvOptions& opts, bool with_obstacles)
    : opts_(opts), with_obstacles_(with_obstacles) {
  MIB_CHECK(opts.action_repeat >= 1 && opts.episode_length >= opts.action_repeat,
            "CorridorPointMass: invalid episode/action-repeat combination");
  MIB_CHECK(opts.episode_length % opts.action_repeat == 0,
            "CorridorPointMass: episode_length must be a multiple of action_repeat");
}

EnvSpec CorridorPointMass::spec() const {
  EnvSpec s;
  s.proprio_dim = 6;  // position(2), velocity(2), last action(2)
  s.action_dim = 2;
  s.action_repeat = opts_.action_repeat;
  s.frame_stack = opts_.frame_stack;
  s.episode_length = opts_.episode_length;
  return s;
}

MultimodalObservation CorridorPointMass::reset(RngStream& rng) {
  x_ = 0;
  y_ = rng.uniform(-0.6, 0.6);
  vx_ = vy_ = 0;
  last_ax_ = last_ay_ = 0;
  steps_taken_ = 0;
  in_collision_ = false;
  obstacles_.clear();
  obstacles_generated_until_ = kFirstObstacleX;
  obstacle_rng_ = RngStream(rng.raw());
  ensure_obstacles_until(x_ + kViewAhead + 1.0);
  frames_.clear();
  std::vector<std::uint8_t> frame;
  render_frame(frame);
  for (int i = 0; i < opts_.frame_stack; ++i) frames_.push_back(frame);
  return make_observation();
}

void CorridorPointMass::ensure_obstacles_until(double x_max) {
  if (!with_obstacles_) return;
  while (obstacles_generated_until_ < x_max) {
    Obstacle o;
    o.cx = obstacles_generated_until_ + obstacle_rng_.uniform(-kJitter, kJitter);
    o.cy = obstacle_rng_.uniform(-kMaxCenterY, kMaxCenterY);
    o.half_depth = kObstacleHalfDepth;
    o.half_width = kObstacleHalfWidth;
    obstacles_.push_back(o);
    obstacles_generated_until_ += kSpacing;
  }
}

void CorridorPointMass::physics_step(double ax, double ay, double& reward) {
  vx_ += kDt * (kForceGain * ax - kDrag * vx_);
  vy_ += kDt * (kForceGain * ay - kDrag * vy_);
  x_ += kDt * vx_;
  y_ += kDt * vy_;

  // corridor walls
  const double y_lim = kHalfWidth - kAgentRadius;
  if (y_ > y_lim) {
    y_ = y_lim;
    vy_ = 0;
  } else if (y_ < -y_lim) {
    y_ = -y_lim;
    vy_ = 0;
  }

  // obstacle contact: push out through the nearest face, kill the normal
  // velocity component, charge the penalty
  ensure_obstacles_until(x_ + kViewAhead + 1.0);
  in_collision_ = false;
  for (const Obstacle& o : obstacles_) {
    const double dx = x_ - o.cx;
    const double dy = y_ - o.cy;
    const double px = o.half_depth + kAgentRadius - std::abs(dx);
    const double py = o.half_width + kAgentRadius - std::abs(dy);
    if (px > 0 && py > 0) {
      in_collision_ = true;
      if (px < py) {
        x_ = o.cx + (dx >= 0 ? 1 : -1) * (o.half_depth + kAgentRadius);
        if ((dx >= 0) != (vx_ >= 0)) vx_ = 0;
      } else {
        y_ = o.cy + (dy >= 0 ? 1 : -1) * (o.half_width + kAgentRadius);
        if ((dy >= 0) != (vy_ >= 0)) vy_ = 0;
      }
    }
  }

  reward += kForwardRewardWeight * vx_ * kDt;
  if (in_collision_) reward -= kCollisionPenalty;
}

StepResult CorridorPointMass::step(const VecF& action) {
  MIB_CHECK(action.size() == 2, "CorridorPointMass: action must have dimension 2");
  MIB_CHECK(all_finite(action), "CorridorPointMass: non-finite action");
  double ax = action(0), ay = action(1);
  if (ax < -1 || ax > 1 || ay < -1 || ay > 1) {
    if (!warned_clip_) {
      std::fprintf(stderr, "[corridor-pointmass] warning: clipping out-of-bounds action\n");
      warned_clip_ = true;
    }
    ax = std::clamp(ax, -1.0, 1.0);
    ay = std::clamp(ay, -1.0, 1.0);
  }

  double reward = 0;
  for (int i = 0; i < opts_.action_repeat; ++i) {
    physics_step(ax, ay, reward);
    ++steps_taken_;
  }
  last_ax_ = ax;
  last_ay_ = ay;

  push_frame();
  StepResult r;
  r.obs = make_observation();
  r.reward = static_cast<float>(reward);
  r.truncated = steps_taken_ >= opts_.episode_length;
  r.done = r.truncated;  // no failure state; episodes end on the time limit
  return r;
}

void CorridorPointMass::push_frame() {
  std::vector<std::uint8_t> frame;
  render_frame(frame);
  frames_.push_back(std::move(frame));
  while (static_cast<int>(frames_.size()) > opts_.frame_stack) frames_.pop_front();
}

MultimodalObservation CorridorPointMass::make_observation() const {
  MultimodalObservation obs;
  obs.channels = 3 * opts_.frame_stack;
  obs.height = kImageSize;
  obs.width = kImageSize;
  obs.image.resize(static_cast<std::size_t>(obs.channels) * kImageSize * kImageSize);
  // oldest frame first
  for (int f = 0; f < opts_.frame_stack; ++f)
    std::copy(frames_[f].begin(), frames_[f].end(),
              obs.image.begin() + static_cast<std::size_t>(f) * 3 * kImageSize * kImageSize);
  obs.proprio.resize(6);
  obs.proprio << static_cast<float>(x_ / 50.0), static_cast<float>(y_),
      static_cast<float>(vx_ / kForceGain), static_cast<float>(vy_ / kForceGain),
      static_cast<float>(last_ax_), static_cast<float>(last_ay_);
  return obs;
}

void CorridorPointMass::render_frame(std::vector<std::uint8_t>& frame) const {
  const int n = kImageSize;
  frame.assign(3 * n * n, kBackgroundValue);
  auto put = [&](int row, int col, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    frame[0 * n * n + row * n + col] = r;
    frame[1 * n * n + row * n + col] = g;
    frame[2 * n * n + row * n + col] = b;
  };
  // world->pixel mapping
  const double x_far = x_ + kViewAhead;
  const double px_per_x = n / (kViewAhead + kViewBehind);
  const double px_per_y = n / (2 * kViewHalfSpan);
  auto row_of = [&](double wx) { return static_cast<int>(std::floor((x_far - wx) * px_per_x)); };
  auto col_of = [&](double wy) {
    return static_cast<int>(std::floor((wy - (y_ - kViewHalfSpan)) * px_per_y));
  };

  // wall bands: everything outside the corridor
  for (int col = 0; col < n; ++col) {
    const double wy = (y_ - kViewHalfSpan) + (col + 0.5) / px_per_y;
    if (wy < -kHalfWidth || wy > kHalfWidth) {
      for (int row = 0; row < n; ++row) put(row, col, 110, 110, 160);
    }
  }

  // obstacles within the window
  for (const Obstacle& o : obstacles_) {
    if (o.cx + o.half_depth < x_ - kViewBehind || o.cx - o.half_depth > x_far) continue;
    int r0 = std::max(0, row_of(o.cx + o.half_depth));
    int r1 = std::min(n - 1, row_of(o.cx - o.half_depth));
    int c0 = std::max(0, col_of(o.cy - o.half_width));
    int c1 = std::min(n - 1, col_of(o.cy + o.half_width));
    for (int row = r0; row <= r1; ++row)
      for (int col = c0; col <= c1; ++col) put(row, col, 230, 80, 60);
  }

  // agent marker
  const int ar = std::clamp(row_of(x_), 1, n - 2);
  const int ac = std::clamp(col_of(y_), 1, n - 2);
  for (int dr = -1; dr <= 1; ++dr)
    for (int dc = -1; dc <= 1; ++dc) put(ar + dr, ac + dc, 80, 220, 90);
}

}  // namespace mib
