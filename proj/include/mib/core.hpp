#pragma once

#include <cstdint>
#include <vector>

#include "mib/common.hpp"
#include "mib/rng.hpp"

namespace mib {

inline constexpr long kDefaultReplayCapacity = 100000;

// Paired sensor observation: stacked egocentric frames (channels-first,
// raw bytes) plus the proprioceptive vector.
struct MultimodalObservation {
  std::vector<std::uint8_t> image;  // index (c, h, w) -> c*H*W + h*W + w
  int channels = 0;
  int height = 0;
  int width = 0;
  VecF proprio;

  bool same_shape(const MultimodalObservation& o) const {
    return channels == o.channels && height == o.height && width == o.width &&
           proprio.size() == o.proprio.size();
  }
  bool shape_valid() const {
    return channels > 0 && channels % 3 == 0 && height > 0 && width > 0 &&
           image.size() == static_cast<std::size_t>(channels) * height * width &&
           proprio.size() > 0;
  }
};

struct Transition {
  MultimodalObservation obs;
  VecF action;  // in [-1, 1]^Da
  float reward = 0.f;
  MultimodalObservation next_obs;
  bool done = false;
};

using ImageBatch = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

// Minibatch of transitions, one sample per column. Images stay raw u8;
// scaling to [0,1] floats is the preprocessing step's job.
struct Batch {
  ImageBatch obs_image, next_image;
  MatF obs_proprio, next_proprio;
  MatF action;
  VecF reward;
  VecF done;  // 1 for terminal transitions
  int channels = 0, height = 0, width = 0;

  Eigen::Index size() const { return action.cols(); }
};

// Uniform-sampling ring buffer. Storage grows on demand up to capacity and
// then overwrites the oldest entry. Single-writer, single-reader.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(long capacity = kDefaultReplayCapacity) : capacity_(capacity) {
    MIB_CHECK(capacity > 0, "ReplayBuffer: capacity must be positive");
  }

  void push(const Transition& t) {
    validate(t);
    if (static_cast<long>(storage_.size()) < capacity_) {
      storage_.push_back(t);
    } else {
      storage_[cursor_] = t;
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }

  Batch sample(long batch_size, RngStream& rng) const {
    MIB_CHECK(!storage_.empty(), "ReplayBuffer: cannot sample from an empty buffer");
    MIB_CHECK(batch_size >= 1, "ReplayBuffer: batch_size must be >= 1");
    const Transition& probe = storage_.front();
    const int pix = probe.obs.channels * probe.obs.height * probe.obs.width;
    Batch b;
    b.channels = probe.obs.channels;
    b.height = probe.obs.height;
    b.width = probe.obs.width;
    b.obs_image.resize(pix, batch_size);
    b.next_image.resize(pix, batch_size);
    b.obs_proprio.resize(probe.obs.proprio.size(), batch_size);
    b.next_proprio.resize(probe.obs.proprio.size(), batch_size);
    b.action.resize(probe.action.size(), batch_size);
    b.reward.resize(batch_size);
    b.done.resize(batch_size);
    for (long i = 0; i < batch_size; ++i) {
      const Transition& t = storage_[rng.uniform_int(storage_.size())];
      std::copy(t.obs.image.begin(), t.obs.image.end(), b.obs_image.col(i).data());
      std::copy(t.next_obs.image.begin(), t.next_obs.image.end(), b.next_image.col(i).data());
      b.obs_proprio.col(i) = t.obs.proprio;
      b.next_proprio.col(i) = t.next_obs.proprio;
      b.action.col(i) = t.action;
      b.reward(i) = t.reward;
      b.done(i) = t.done ? 1.f : 0.f;
    }
    return b;
  }

  long size() const { return static_cast<long>(storage_.size()); }
  long capacity() const { return capacity_; }
  long write_cursor() const { return cursor_; }
  void set_write_cursor(long c) { cursor_ = c % capacity_; }
  const Transition& at(long i) const { return storage_.at(i); }

 private:
  void validate(const Transition& t) const {
    MIB_CHECK(t.obs.shape_valid() && t.next_obs.shape_valid(),
              "ReplayBuffer: observation shape invalid");
    MIB_CHECK(t.obs.same_shape(t.next_obs), "ReplayBuffer: obs/next_obs shape mismatch");
    MIB_CHECK(all_finite(t.obs.proprio) && all_finite(t.next_obs.proprio),
              "ReplayBuffer: non-finite proprioception");
    MIB_CHECK(std::isfinite(t.reward), "ReplayBuffer: non-finite reward");
    MIB_CHECK(all_finite(t.action), "ReplayBuffer: non-finite action");
    MIB_CHECK((t.action.array() >= -1.f).all() && (t.action.array() <= 1.f).all(),
              "ReplayBuffer: action out of [-1,1] bounds");
    if (!storage_.empty())
      MIB_CHECK(t.obs.same_shape(storage_.front().obs),
                "ReplayBuffer: transition shape differs from stored entries");
  }

  long capacity_;
  std::vector<Transition> storage_;
  long cursor_ = 0;
};

}  // namespace mib
