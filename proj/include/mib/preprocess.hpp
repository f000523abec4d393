#pragma once

#include <string>

#include "mib/core.hpp"
#include "mib/rng.hpp"

namespace mib {

inline constexpr int kShiftPad = 4;  // random shift range [-4, 4]

// Observation after scaling: image as floats in [0,1], proprio unchanged.
struct FloatObs {
  VecF image;
  VecF proprio;
  int channels = 0, height = 0, width = 0;
};

// Divides each pixel by 255; proprio passes through.
FloatObs preprocess(const MultimodalObservation& obs);

// Pads `kShiftPad` pixels per side by edge replication, then crops the 84x84
// (H x W) window at offset (dy, dx) in [-4, 4]^2; (0, 0) is the identity.
// The same offset applies to every channel.
void shift_image(const float* src, float* dst, int channels, int height, int width, int dy,
                 int dx);

// Applies a uniformly drawn shift offset in place.
void random_shift(VecF& image, int channels, int height, int width, RngStream& rng);

// Welford running mean/std per dimension.
class RunningStd {
 public:
  void update(const VecF& x);
  VecF stddev() const;
  long count() const { return n_; }
  const VecD& mean_acc() const { return mean_; }
  const VecD& m2_acc() const { return m2_; }
  void restore(const VecD& mean, const VecD& m2, long n);

 private:
  VecD mean_, m2_;
  long n_ = 0;
};

struct PerturbationConfig {
  float proprio_noise_std = 0.f;  // fraction of per-dimension running std
  enum class Background { kNone, kMovingPattern };
  Background background = Background::kNone;
  std::uint8_t background_value = 0;  // env background pixel for masking

  bool identity() const { return proprio_noise_std == 0.f && background == Background::kNone; }
};

PerturbationConfig::Background parse_background(const std::string& s);

// Evaluation-time observation corruption: Gaussian noise on proprioception
// scaled per-dimension by the running std, and/or a drifting sinusoidal
// pattern alpha-blended over background pixels of each stacked frame.
// `t` is the evaluation step index driving the pattern motion. The identity
// configuration returns the observation unchanged and consumes no rng.
FloatObs apply_perturbation(const FloatObs& obs, const PerturbationConfig& cfg,
                            const RunningStd& running, RngStream& rng, long t);

}  // namespace mib
