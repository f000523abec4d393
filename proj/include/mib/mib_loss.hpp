#pragma once

#include <cmath>
#include <utility>

#include "mib/bundle.hpp"
#include "mib/common.hpp"
#include "mib/nets.hpp"
#include "mib/rng.hpp"

namespace mib {

enum class Ablation { kFull, kNonKl, kNonLoss, kNonImg, kNonProp };

inline bool uses_image(Ablation a) { return a != Ablation::kNonImg; }
inline bool uses_proprio(Ablation a) { return a != Ablation::kNonProp; }

// Per-update scalars, all in nats. total is computed as
// alpha * kl_term + infonce_term, exactly.
template <class T>
struct LossBreakdownT {
  T kl_term = 0;
  T infonce_term = 0;
  T total = 0;
  T alpha = 0;
};
using LossBreakdown = LossBreakdownT<float>;

// KL( N(mean, diag stddev^2) || N(0, I) ) per batch column.
template <class T>
Vec<T> kl_per_sample(const GaussianPosterior<T>& post) {
  MIB_CHECK((post.stddev.array() > T(0)).all(), "kl_upper_bound: non-positive stddev");
  const Eigen::Index B = post.mean.cols();
  Vec<T> out(B);
  for (Eigen::Index b = 0; b < B; ++b) {
    out(b) = T(0.5) * (post.mean.col(b).array().square() + post.stddev.col(b).array().square() -
                       T(1) - T(2) * post.stddev.col(b).array().log())
                          .sum();
  }
  return out;
}

// Batch mean of the closed-form KL (the expectation over p(c^p, c^i)).
template <class T>
T kl_upper_bound(const GaussianPosterior<T>& post) {
  return kl_per_sample(post).mean();
}

// S[i,k] = u_i^T omega e_k for column embeddings U and E.
template <class T>
Mat<T> bilinear_scores(const Mat<T>& omega, const Mat<T>& U, const Mat<T>& E) {
  MIB_CHECK(omega.rows() == U.rows() && omega.cols() == E.rows(),
            "bilinear_scores: shape mismatch");
  MIB_CHECK(U.cols() == E.cols(), "bilinear_scores: batch size mismatch");
  return U.transpose() * omega * E;
}

// loss = -(1/B) sum_i [ S[i,i] - logsumexp_k S[i,k] ], with max-subtracted
// logsumexp. Minimizing it maximizes the contrastive bound; the implied MI
// estimate is ln(B) - loss.
template <class T>
T infonce_loss(const Mat<T>& S, Mat<T>* dS = nullptr) {
  const Eigen::Index B = S.rows();
  MIB_CHECK(S.cols() == B, "infonce_loss: score matrix must be square");
  MIB_CHECK(B >= 2, "infonce_loss: need at least one negative (B >= 2)");
  if (dS) dS->setZero(B, B);
  T loss = 0;
  for (Eigen::Index i = 0; i < B; ++i) {
    const T m = S.row(i).maxCoeff();
    Eigen::Array<T, 1, Eigen::Dynamic> ex = (S.row(i).array() - m).exp();
    const T Z = ex.sum();
    loss += m + std::log(Z) - S(i, i);
    if (dS) {
      dS->row(i) = (ex / (Z * T(B))).matrix();
      (*dS)(i, i) -= T(1) / T(B);
    }
  }
  return loss / T(B);
}

// Embeddings of the candidate next-step latents through the *target*
// projection head, and of (z, a) through the online prediction/projection
// heads; then the bilinear score matrix of every pair. Row i's diagonal is
// the positive pair, off-diagonals are the in-batch negatives.
template <class T>
Mat<T> score_matrix(NetworkBundle<T>& b, const Mat<T>& z, const Mat<T>& a, const Mat<T>& z_next) {
  Mat<T> u = b.proj_head.forward(b.pred_head.forward(z, a));
  Mat<T> e = b.proj_head_tgt.forward(z_next);
  return bilinear_scores(b.omega.value, u, e);
}

// Preprocessed minibatch ready for the networks: float images in [0,1]
// (shift-augmented during training), one sample per column.
template <class T>
struct PreparedBatch {
  Mat<T> obs_image, next_image;
  Mat<T> obs_proprio, next_proprio;
  Mat<T> action;
  Vec<T> reward;
  Vec<T> not_done;

  Eigen::Index size() const { return action.cols(); }
};

// Target-network encodings of next_obs, shared between the critic target and
// the contrastive target within one update step (targets only move afterwards).
template <class T>
struct TargetNextCache {
  Mat<T> c_img, c_prop;
  bool filled = false;

  void fill(NetworkBundle<T>& b, const PreparedBatch<T>& pb, Ablation mode) {
    if (filled) return;
    const Eigen::Index B = pb.size();
    c_img = uses_image(mode) ? b.image_enc_tgt.forward(pb.next_image)
                             : Mat<T>::Zero(b.cfg.latent_dim, B);
    c_prop = uses_proprio(mode) ? b.proprio_enc_tgt.forward(pb.next_proprio)
                                : Mat<T>::Zero(b.cfg.latent_dim, B);
    filled = true;
  }
};

// Forward and backward of the combined objective (compression KL weighted by
// alpha plus the contrastive term). Gradients are accumulated into the online
// encoder/fusion/stochastic-encoder/head/omega tensors; the target pathway
// that produces z_{t+1} is evaluated without caches and receives no gradient.
// With a disabled modality its embedding is a zero block and its encoder is
// neither run nor updated.
template <class T>
LossBreakdownT<T> mib_loss(NetworkBundle<T>& b, const PreparedBatch<T>& pb, T alpha,
                           RngStream& rng, Ablation mode = Ablation::kFull,
                           TargetNextCache<T>* tgt_cache = nullptr) {
  const Eigen::Index B = pb.size();
  const Eigen::Index L = b.cfg.latent_dim;
  MIB_CHECK(B >= 2, "mib_loss: batch must contain at least one negative");

  // online pathway on the current observation
  Mat<T> c_img = uses_image(mode) ? b.image_enc.forward(pb.obs_image, true) : Mat<T>::Zero(L, B);
  Mat<T> c_prop =
      uses_proprio(mode) ? b.proprio_enc.forward(pb.obs_proprio, true) : Mat<T>::Zero(L, B);
  GaussianPosterior<T> post = b.stoch_enc.forward(c_img, c_prop, true);
  Mat<T> eps(L, B);
  rng.fill_normal(eps);
  Mat<T> z = sample_posterior(post, eps);

  // target pathway on the next observation (no gradients)
  TargetNextCache<T> local;
  TargetNextCache<T>& tc = tgt_cache ? *tgt_cache : local;
  tc.fill(b, pb, mode);
  GaussianPosterior<T> post_next = b.stoch_enc_tgt.forward(tc.c_img, tc.c_prop);
  Mat<T> eps_next(L, B);
  rng.fill_normal(eps_next);
  Mat<T> z_next = sample_posterior(post_next, eps_next);
  Mat<T> e = b.proj_head_tgt.forward(z_next);

  // score matrix and loss terms
  Mat<T> u0 = b.pred_head.forward(z, pb.action, true);
  Mat<T> u = b.proj_head.forward(u0, true);
  Mat<T> S = bilinear_scores(b.omega.value, u, e);

  LossBreakdownT<T> out;
  out.alpha = alpha;
  out.kl_term = kl_upper_bound(post);
  Mat<T> dS;
  out.infonce_term = infonce_loss(S, &dS);
  out.total = alpha * out.kl_term + out.infonce_term;
  MIB_RUNTIME_CHECK(std::isfinite(static_cast<double>(out.total)),
                    "mib_loss: non-finite loss");

  // backward
  b.omega.grad.noalias() += u * dS * e.transpose();
  Mat<T> du = b.omega.value * e * dS.transpose();
  Mat<T> du0 = b.proj_head.backward(du);
  auto [dz, da_unused] = b.pred_head.backward(du0);
  (void)da_unused;

  Mat<T> dmean = dz;
  Mat<T> dstd = dz.cwiseProduct(eps);
  dmean += (alpha / T(B)) * post.mean;
  dstd += (alpha / T(B)) * (post.stddev - post.stddev.cwiseInverse());

  auto [dc_img, dc_prop] = b.stoch_enc.backward(dmean, dstd);
  if (uses_image(mode)) b.image_enc.backward(dc_img);
  if (uses_proprio(mode)) b.proprio_enc.backward(dc_prop);
  return out;
}

}  // namespace mib
