#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mib/actor_critic.hpp"
#include "mib/nets.hpp"

namespace mib {

// Every learnable parameter set: both observation encoders, fusion,
// stochastic encoder, contrastive heads, the bilinear transform, the SAC
// actor/critics/temperature, and the EMA target copies. Target tensors are
// only ever written by ema_update.
template <class T>
struct NetworkBundle {
  NetConfig cfg;

  ImageEncoder<T> image_enc, image_enc_tgt;
  ProprioEncoder<T> proprio_enc, proprio_enc_tgt;
  FusionModel<T> fusion, fusion_tgt;
  StochasticEncoder<T> stoch_enc, stoch_enc_tgt;
  PredictionHead<T> pred_head;
  ProjectionHead<T> proj_head, proj_head_tgt;
  Param<T> omega;
  Actor<T> actor;
  Critic<T> critic1, critic2, critic1_tgt, critic2_tgt;
  Param<T> log_temp;

  NetworkBundle(const NetConfig& c, RngStream& rng)
      : cfg(c),
        image_enc(c, rng, "image_encoder"),
        image_enc_tgt(c, rng, "image_encoder_target"),
        proprio_enc(c, rng, "proprio_encoder"),
        proprio_enc_tgt(c, rng, "proprio_encoder_target"),
        fusion(c, rng, "fusion"),
        fusion_tgt(c, rng, "fusion_target"),
        stoch_enc(c, rng, "stochastic_encoder"),
        stoch_enc_tgt(c, rng, "stochastic_encoder_target"),
        pred_head(c, rng, "prediction_head"),
        proj_head(c, rng, "projection_head"),
        proj_head_tgt(c, rng, "projection_head_target"),
        actor(c, rng, "actor"),
        critic1(c, rng, "critic1"),
        critic2(c, rng, "critic2"),
        critic1_tgt(c, rng, "critic1_target"),
        critic2_tgt(c, rng, "critic2_target") {
    MIB_CHECK(c.proprio_dim > 0 && c.action_dim > 0, "NetConfig: proprio/action dims required");
    omega.set_shape("omega", c.latent_dim, c.latent_dim);
    rng.fill_uniform(omega.value, -0.05, 0.05);
    log_temp.set_shape("log_temperature", 1, 1);
    log_temp.value(0, 0) = T(std::log(c.init_temperature));
    sync_targets();
  }

  NetworkBundle(const NetworkBundle&) = delete;
  NetworkBundle& operator=(const NetworkBundle&) = delete;

  T temperature() const { return std::exp(log_temp.value(0, 0)); }

  // --- parameter groupings -------------------------------------------------

  std::vector<Param<T>*> encoder_online_params() {
    return collect_params<T>([&](const ParamFn<T>& f) {
      image_enc.visit(f);
      proprio_enc.visit(f);
      fusion.visit(f);
      stoch_enc.visit(f);
      proj_head.visit(f);
    });
  }
  std::vector<Param<T>*> encoder_target_params() {
    return collect_params<T>([&](const ParamFn<T>& f) {
      image_enc_tgt.visit(f);
      proprio_enc_tgt.visit(f);
      fusion_tgt.visit(f);
      stoch_enc_tgt.visit(f);
      proj_head_tgt.visit(f);
    });
  }
  std::vector<Param<T>*> critic_online_params() {
    return collect_params<T>([&](const ParamFn<T>& f) {
      critic1.visit(f);
      critic2.visit(f);
    });
  }
  std::vector<Param<T>*> critic_target_params() {
    return collect_params<T>([&](const ParamFn<T>& f) {
      critic1_tgt.visit(f);
      critic2_tgt.visit(f);
    });
  }

  // Parameters optimized by the representation loss.
  std::vector<Param<T>*> mib_params() {
    auto out = collect_params<T>([&](const ParamFn<T>& f) {
      image_enc.visit(f);
      proprio_enc.visit(f);
      fusion.visit(f);
      stoch_enc.visit(f);
      proj_head.visit(f);
      pred_head.visit(f);
    });
    out.push_back(&omega);
    return out;
  }

  // Parameters touched by the critic update: both Q-networks plus the online
  // path that produces j (value gradients flow into the encoders).
  std::vector<Param<T>*> critic_path_params() {
    return collect_params<T>([&](const ParamFn<T>& f) {
      critic1.visit(f);
      critic2.visit(f);
      image_enc.visit(f);
      proprio_enc.visit(f);
      fusion.visit(f);
    });
  }

  std::vector<Param<T>*> actor_params() {
    return collect_params<T>([&](const ParamFn<T>& f) { actor.visit(f); });
  }

  std::vector<Param<T>*> temperature_params() { return {&log_temp}; }

  // Encoder-related params whose gradient routing the tests pin down.
  std::vector<Param<T>*> representation_params() {
    return collect_params<T>([&](const ParamFn<T>& f) {
      image_enc.visit(f);
      proprio_enc.visit(f);
      fusion.visit(f);
      stoch_enc.visit(f);
    });
  }

  // All tensors, online and target, in a stable order (checkpointing).
  std::vector<Param<T>*> all_params() {
    auto out = collect_params<T>([&](const ParamFn<T>& f) {
      image_enc.visit(f);
      proprio_enc.visit(f);
      fusion.visit(f);
      stoch_enc.visit(f);
      pred_head.visit(f);
      proj_head.visit(f);
      image_enc_tgt.visit(f);
      proprio_enc_tgt.visit(f);
      fusion_tgt.visit(f);
      stoch_enc_tgt.visit(f);
      proj_head_tgt.visit(f);
      actor.visit(f);
      critic1.visit(f);
      critic2.visit(f);
      critic1_tgt.visit(f);
      critic2_tgt.visit(f);
    });
    out.push_back(&omega);
    out.push_back(&log_temp);
    return out;
  }

  void sync_targets() {
    copy_params(encoder_online_params(), encoder_target_params());
    copy_params(critic_online_params(), critic_target_params());
  }
};

}  // namespace mib
