#pragma once

#include <cmath>
#include <functional>
#include <utility>

#include "mib/bundle.hpp"
#include "mib/mib_loss.hpp"

namespace mib {

enum class ActMode { kStochastic, kDeterministic };

// Encodes a single preprocessed observation to j via the online encoders and
// fusion model (no bottleneck sampling on the policy path) and queries the
// policy. Deterministic mode returns tanh(mean) and ignores the rng.
template <class T>
Vec<T> act(NetworkBundle<T>& b, const Mat<T>& image, const Mat<T>& proprio, ActMode mode,
           RngStream& rng, Ablation ablation = Ablation::kFull) {
  const Eigen::Index B = proprio.cols();
  Mat<T> c_img =
      uses_image(ablation) ? b.image_enc.forward(image) : Mat<T>::Zero(b.cfg.latent_dim, B);
  Mat<T> c_prop = uses_proprio(ablation) ? b.proprio_enc.forward(proprio)
                                         : Mat<T>::Zero(b.cfg.latent_dim, B);
  Mat<T> j = b.fusion.forward(c_img, c_prop);
  if (mode == ActMode::kDeterministic) return b.actor.mean_action(j).col(0);
  auto [mu, ls] = b.actor.dist_params(j);
  Mat<T> eps(mu.rows(), mu.cols());
  rng.fill_normal(eps);
  return (mu + ls.array().exp().matrix().cwiseProduct(eps)).array().tanh().matrix().col(0);
}

// One soft Bellman regression step. The target
//   y = r + gamma * (1 - done) * (min_i Qbar_i(j', a') - temp * log pi(a'|j'))
// uses the target encoders/fusion for j' and the target critics; the online
// pass backpropagates the TD error into both critics and on through the
// fusion model and observation encoders. Returns the mean of the two
// per-critic MSE losses.
template <class T>
T critic_update(NetworkBundle<T>& b, const PreparedBatch<T>& pb, T discount, RngStream& rng,
                Adam<T>& opt, Ablation mode = Ablation::kFull,
                TargetNextCache<T>* tgt_cache = nullptr, Vec<T>* target_out = nullptr) {
  const Eigen::Index B = pb.size();
  const Eigen::Index L = b.cfg.latent_dim;

  // target value (no gradients anywhere in this block)
  TargetNextCache<T> local;
  TargetNextCache<T>& tc = tgt_cache ? *tgt_cache : local;
  tc.fill(b, pb, mode);
  Mat<T> j_next = b.fusion_tgt.forward(tc.c_img, tc.c_prop);
  auto [a_next, logp_next] = b.actor.sample(j_next, rng, /*train=*/false);
  Mat<T> q1n = b.critic1_tgt.forward(j_next, a_next);
  Mat<T> q2n = b.critic2_tgt.forward(j_next, a_next);
  const T temp = b.temperature();
  Vec<T> y(B);
  for (Eigen::Index i = 0; i < B; ++i) {
    const T qmin = std::min(q1n(0, i), q2n(0, i));
    y(i) = pb.reward(i) + discount * pb.not_done(i) * (qmin - temp * logp_next(i));
  }
  MIB_RUNTIME_CHECK(all_finite(y), "critic_update: non-finite Bellman target");
  if (target_out) *target_out = y;

  // online pass
  opt.zero_grad();
  Mat<T> c_img = uses_image(mode) ? b.image_enc.forward(pb.obs_image, true) : Mat<T>::Zero(L, B);
  Mat<T> c_prop =
      uses_proprio(mode) ? b.proprio_enc.forward(pb.obs_proprio, true) : Mat<T>::Zero(L, B);
  Mat<T> j = b.fusion.forward(c_img, c_prop, true);
  Mat<T> q1 = b.critic1.forward(j, pb.action, true);
  Mat<T> q2 = b.critic2.forward(j, pb.action, true);
  Mat<T> r1 = q1.row(0).transpose() - y;
  Mat<T> r2 = q2.row(0).transpose() - y;
  const T loss = T(0.5) * (r1.squaredNorm() + r2.squaredNorm()) / T(B);
  MIB_RUNTIME_CHECK(std::isfinite(static_cast<double>(loss)), "critic_update: non-finite loss");

  Mat<T> dq1 = (r1 / T(B)).transpose();
  Mat<T> dq2 = (r2 / T(B)).transpose();
  auto [dj1, da1] = b.critic1.backward(dq1);
  auto [dj2, da2] = b.critic2.backward(dq2);
  (void)da1;
  (void)da2;
  Mat<T> dj = dj1 + dj2;
  auto [dc_img, dc_prop] = b.fusion.backward(dj);
  if (uses_image(mode)) b.image_enc.backward(dc_img);
  if (uses_proprio(mode)) b.proprio_enc.backward(dc_prop);
  opt.step();
  return loss;
}

// Q evaluator used by the actor objective: returns per-sample q values and
// fills dq_da with the gradient of q w.r.t. the action.
template <class T>
using QEval = std::function<Vec<T>(const Mat<T>& j, const Mat<T>& a, Mat<T>& dq_da)>;

// Policy improvement on a fixed representation: maximizes
// E[ q(j, a~) - temp * log pi(a~|j) ] over actor parameters only.
// Returns (actor loss, per-sample log-probs).
template <class T>
std::pair<T, Vec<T>> actor_update_with_q(Actor<T>& actor, T temp, const Mat<T>& j, RngStream& rng,
                                         Adam<T>& opt, const QEval<T>& q_eval) {
  const Eigen::Index B = j.cols();
  opt.zero_grad();
  auto [a, logp] = actor.sample(j, rng, /*train=*/true);
  Mat<T> dq_da(a.rows(), B);
  Vec<T> q = q_eval(j, a, dq_da);
  const T loss = (temp * logp.array() - q.array()).mean();
  MIB_RUNTIME_CHECK(std::isfinite(static_cast<double>(loss)), "actor_update: non-finite loss");
  Mat<T> da = -dq_da / T(B);
  Vec<T> dlogp = Vec<T>::Constant(B, temp / T(B));
  actor.backward(da, dlogp);
  opt.step();
  return {loss, logp};
}

// Standard actor update: j is computed through the online encoders but
// detached, so encoder parameters receive no gradient; the twin critics are
// evaluated with parameter gradients disabled and only their action-input
// gradients reach the actor.
template <class T>
std::pair<T, Vec<T>> actor_update(NetworkBundle<T>& b, const PreparedBatch<T>& pb, RngStream& rng,
                                  Adam<T>& opt, Ablation mode = Ablation::kFull) {
  const Eigen::Index B = pb.size();
  const Eigen::Index L = b.cfg.latent_dim;
  Mat<T> c_img = uses_image(mode) ? b.image_enc.forward(pb.obs_image) : Mat<T>::Zero(L, B);
  Mat<T> c_prop =
      uses_proprio(mode) ? b.proprio_enc.forward(pb.obs_proprio) : Mat<T>::Zero(L, B);
  Mat<T> j = b.fusion.forward(c_img, c_prop);

  QEval<T> twin_min = [&b](const Mat<T>& jj, const Mat<T>& aa, Mat<T>& dq_da) {
    const Eigen::Index n = jj.cols();
    Mat<T> q1 = b.critic1.forward(jj, aa, true);
    Mat<T> q2 = b.critic2.forward(jj, aa, true);
    Mat<T> dq1 = Mat<T>::Zero(1, n), dq2 = Mat<T>::Zero(1, n);
    Vec<T> q(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (q1(0, i) <= q2(0, i)) {
        q(i) = q1(0, i);
        dq1(0, i) = T(1);
      } else {
        q(i) = q2(0, i);
        dq2(0, i) = T(1);
      }
    }
    auto [dj1, da1] = b.critic1.backward(dq1, /*param_grads=*/false);
    auto [dj2, da2] = b.critic2.backward(dq2, /*param_grads=*/false);
    (void)dj1;
    (void)dj2;
    dq_da = da1 + da2;
    return q;
  };
  return actor_update_with_q(b.actor, b.temperature(), j, rng, opt, twin_min);
}

// Dual ascent on the entropy constraint:
//   loss = -log_temp * mean(log pi + target_entropy), target_entropy = -Da.
// Zero gradient exactly when the policy entropy matches the target.
template <class T>
T temperature_update(NetworkBundle<T>& b, const Vec<T>& logp, T target_entropy, Adam<T>& opt) {
  opt.zero_grad();
  const T g = logp.mean() + target_entropy;
  const T loss = -b.log_temp.value(0, 0) * g;
  b.log_temp.grad(0, 0) += -g;
  opt.step();
  return loss;
}

}  // namespace mib
