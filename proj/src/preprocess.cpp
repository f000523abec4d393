#include "mib/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace mib {

FloatObs preprocess(const MultimodalObservation& obs) {
  MIB_CHECK(obs.shape_valid(), "preprocess: invalid observation shape");
  FloatObs out;
  out.channels = obs.channels;
  out.height = obs.height;
  out.width = obs.width;
  out.image.resize(static_cast<Eigen::Index>(obs.image.size()));
  for (std::size_t i = 0; i < obs.image.size(); ++i)
    out.image(static_cast<Eigen::Index>(i)) = obs.image[i] / 255.f;
  out.proprio = obs.proprio;
  return out;
}

void shift_image(const float* src, float* dst, int channels, int height, int width, int dy,
                 int dx) {
  MIB_CHECK(dy >= -kShiftPad && dy <= kShiftPad && dx >= -kShiftPad && dx <= kShiftPad,
            "shift_image: offset out of range");
  for (int c = 0; c < channels; ++c) {
    const float* sc = src + static_cast<std::size_t>(c) * height * width;
    float* dc = dst + static_cast<std::size_t>(c) * height * width;
    for (int h = 0; h < height; ++h) {
      const int sh = std::clamp(h + dy, 0, height - 1);  // edge replication
      const float* srow = sc + static_cast<std::size_t>(sh) * width;
      float* drow = dc + static_cast<std::size_t>(h) * width;
      for (int w = 0; w < width; ++w) {
        const int sw = std::clamp(w + dx, 0, width - 1);
        drow[w] = srow[sw];
      }
    }
  }
}

void random_shift(VecF& image, int channels, int height, int width, RngStream& rng) {
  const int dy = static_cast<int>(rng.uniform_int(2 * kShiftPad + 1)) - kShiftPad;
  const int dx = static_cast<int>(rng.uniform_int(2 * kShiftPad + 1)) - kShiftPad;
  if (dy == 0 && dx == 0) return;
  thread_local VecF shifted;
  shifted.resize(image.size());
  shift_image(image.data(), shifted.data(), channels, height, width, dy, dx);
  image.swap(shifted);
}

void RunningStd::update(const VecF& x) {
  if (n_ == 0) {
    mean_ = VecD::Zero(x.size());
    m2_ = VecD::Zero(x.size());
  }
  MIB_CHECK(x.size() == mean_.size(), "RunningStd: dimension changed");
  ++n_;
  VecD xd = x.cast<double>();
  VecD delta = xd - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_ += delta.cwiseProduct(xd - mean_);
}

VecF RunningStd::stddev() const {
  if (n_ < 2) return VecF::Zero(mean_.size());
  return (m2_ / static_cast<double>(n_ - 1)).cwiseSqrt().cast<float>();
}

void RunningStd::restore(const VecD& mean, const VecD& m2, long n) {
  mean_ = mean;
  m2_ = m2;
  n_ = n;
}

PerturbationConfig::Background parse_background(const std::string& s) {
  if (s == "none" || s.empty()) return PerturbationConfig::Background::kNone;
  if (s == "moving_pattern") return PerturbationConfig::Background::kMovingPattern;
  throw std::invalid_argument("unknown background mode '" + s + "'");
}

FloatObs apply_perturbation(const FloatObs& obs, const PerturbationConfig& cfg,
                            const RunningStd& running, RngStream& rng, long t) {
  if (cfg.identity()) return obs;
  FloatObs out = obs;
  if (cfg.proprio_noise_std > 0.f) {
    VecF scale = running.stddev() * cfg.proprio_noise_std;
    for (Eigen::Index i = 0; i < out.proprio.size(); ++i)
      out.proprio(i) += scale(i) * static_cast<float>(rng.normal());
  }
  if (cfg.background == PerturbationConfig::Background::kMovingPattern) {
    const float bg = cfg.background_value / 255.f;
    const int frames = obs.channels / 3;
    const int hw = obs.height * obs.width;
    constexpr float kBlend = 0.6f;
    constexpr double kFx = 0.12, kFy = 0.07, kSpeed = 0.9;
    for (int f = 0; f < frames; ++f) {
      // each stacked frame sees the pattern at its own time index
      const double tf = static_cast<double>(t) - (frames - 1 - f);
      for (int h = 0; h < obs.height; ++h) {
        for (int w = 0; w < obs.width; ++w) {
          const int base = h * obs.width + w;
          // background test on the clean frame: all three channels at bg
          bool is_bg = true;
          for (int ch = 0; ch < 3 && is_bg; ++ch)
            is_bg = obs.image((f * 3 + ch) * hw + base) == bg;
          if (!is_bg) continue;
          for (int ch = 0; ch < 3; ++ch) {
            const double phase = 2.0 * M_PI * (kFx * w + kFy * h - kSpeed * tf + 0.33 * ch);
            const float pat = 0.5f + 0.5f * static_cast<float>(std::sin(phase));
            float& px = out.image((f * 3 + ch) * hw + base);
            px = (1.f - kBlend) * px + kBlend * pat;
          }
        }
      }
    }
  }
  return out;
}

}  // namespace mib
