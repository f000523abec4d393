#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "mib/layers.hpp"
#include "mib/nets.hpp"

namespace mib {

inline constexpr double kLogTwoPi = 1.8378770664093453;

// Tanh-squashed diagonal Gaussian policy on the joint representation.
// The trunk emits [mean; raw log-std]; the log-std is hard-clamped.
template <class T>
struct Actor {
  Mlp<T> trunk;
  T log_std_min, log_std_max;
  Eigen::Index action_dim;

  // caches for the reparameterized-sample backward pass
  Mat<T> eps_c, act_c, std_c, raw_c;

  Actor(const NetConfig& cfg, RngStream& rng, const std::string& name)
      : trunk({cfg.latent_dim, cfg.actor_hidden, cfg.actor_hidden, 2 * cfg.action_dim}, rng, name),
        log_std_min(T(cfg.log_std_min)),
        log_std_max(T(cfg.log_std_max)),
        action_dim(cfg.action_dim) {}

  // Distribution parameters: (mean, clamped log-std), each [Da, B].
  std::pair<Mat<T>, Mat<T>> dist_params(const Mat<T>& j) const {
    Mat<T> out = trunk.forward(j);
    Mat<T> mu = out.topRows(action_dim);
    Mat<T> ls = out.bottomRows(action_dim)
                    .cwiseMax(log_std_min)
                    .cwiseMin(log_std_max);
    return {mu, ls};
  }

  Mat<T> mean_action(const Mat<T>& j) const {
    return dist_params(j).first.array().tanh().matrix();
  }

  // Reparameterized sample a = tanh(mu + std * eps) with per-sample log-prob.
  // train=true caches the draw for backward().
  std::pair<Mat<T>, Vec<T>> sample(const Mat<T>& j, RngStream& rng, bool train) {
    Mat<T> out = trunk.forward(j, train);
    Mat<T> mu = out.topRows(action_dim);
    Mat<T> raw = out.bottomRows(action_dim);
    Mat<T> ls = raw.cwiseMax(log_std_min).cwiseMin(log_std_max);
    Mat<T> sd = ls.array().exp().matrix();
    Mat<T> eps(action_dim, j.cols());
    rng.fill_normal(eps);
    Mat<T> u = mu + sd.cwiseProduct(eps);
    Mat<T> a = u.array().tanh().matrix();
    Vec<T> logp(j.cols());
    for (Eigen::Index b = 0; b < j.cols(); ++b) {
      T lp = 0;
      for (Eigen::Index d = 0; d < action_dim; ++d) {
        lp += T(-0.5) * eps(d, b) * eps(d, b) - ls(d, b) - T(0.5) * T(kLogTwoPi);
        // log(1 - tanh(u)^2) = 2 * (log 2 - u - softplus(-2u))
        lp -= T(2) * (T(M_LN2) - u(d, b) - stable_softplus(T(-2) * u(d, b)));
      }
      logp(b) = lp;
    }
    if (train) {
      eps_c = std::move(eps);
      act_c = a;
      std_c = std::move(sd);
      raw_c = std::move(raw);
    }
    return {a, logp};
  }

  // Backward through the cached sample. da is dL/d(action), dlogp is
  // dL/d(log-prob) per sample. Returns dL/dj.
  Mat<T> backward(const Mat<T>& da, const Vec<T>& dlogp, bool param_grads = true) {
    const Eigen::Index B = act_c.cols();
    Mat<T> dmu(action_dim, B), dlraw(action_dim, B);
    for (Eigen::Index b = 0; b < B; ++b) {
      for (Eigen::Index d = 0; d < action_dim; ++d) {
        const T a = act_c(d, b);
        const T e = eps_c(d, b);
        const T sd = std_c(d, b);
        const T dadu = T(1) - a * a;
        const T du = da(d, b) * dadu + dlogp(b) * T(2) * a;  // dL/du
        dmu(d, b) = du;
        T dls = du * e * sd - dlogp(b);  // dL/d(clamped log-std)
        const T raw = raw_c(d, b);
        if (raw <= log_std_min || raw >= log_std_max) dls = T(0);
        dlraw(d, b) = dls;
      }
    }
    return trunk.backward(vconcat(dmu, dlraw), param_grads);
  }

  void visit(const ParamFn<T>& f) { trunk.visit(f); }
};

// Single Q-network on [j; a].
template <class T>
struct Critic {
  Mlp<T> net;
  Eigen::Index j_dim;

  Critic(const NetConfig& cfg, RngStream& rng, const std::string& name)
      : net({cfg.latent_dim + cfg.action_dim, cfg.critic_hidden, cfg.critic_hidden, 1}, rng, name),
        j_dim(cfg.latent_dim) {}

  Mat<T> forward(const Mat<T>& j, const Mat<T>& a, bool train) {
    return net.forward(vconcat(j, a), train);
  }
  Mat<T> forward(const Mat<T>& j, const Mat<T>& a) const { return net.forward(vconcat(j, a)); }

  // Returns (dj, da); param_grads=false computes input gradients only,
  // which is what the actor update needs.
  std::pair<Mat<T>, Mat<T>> backward(const Mat<T>& dq, bool param_grads = true) {
    Mat<T> d = net.backward(dq, param_grads);
    return {d.topRows(j_dim), d.bottomRows(d.rows() - j_dim)};
  }
  void visit(const ParamFn<T>& f) { net.visit(f); }
};

}  // namespace mib
