#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mib/common.hpp"
#include "mib/layers.hpp"
#include "mib/rng.hpp"

namespace mib {

// Shapes of every learnable component. Defaults follow the reference
// architecture; tests shrink them for finite-difference checks.
struct NetConfig {
  int frame_stack = 3;
  int img_h = 84, img_w = 84;
  int conv_layers = 4;
  int conv_channels = 32;
  int kernel = 3;
  int first_stride = 2;  // remaining conv layers use stride 1
  int latent_dim = 50;
  int proprio_dim = 0;
  int action_dim = 0;
  int proprio_hidden = 512;
  int fusion_hidden = 1024;
  int stoch_hidden = 1024;
  int proj_hidden = 1024;
  int actor_hidden = 1024;
  int critic_hidden = 1024;
  double log_std_min = -10.0;
  double log_std_max = 2.0;
  double init_temperature = 0.1;

  int image_channels() const { return 3 * frame_stack; }
  int image_size() const { return image_channels() * img_h * img_w; }
};

// Diagonal Gaussian d(z | c^p, c^i), one column per batch element.
template <class T>
struct GaussianPosterior {
  Mat<T> mean;
  Mat<T> stddev;
};

inline constexpr double kStddevFloor = 1e-4;

// z = mean + stddev * noise (reparameterized draw).
template <class T>
Mat<T> sample_posterior(const GaussianPosterior<T>& post, const Mat<T>& noise) {
  MIB_CHECK(post.mean.rows() == noise.rows() && post.mean.cols() == noise.cols(),
            "sample_posterior: noise shape mismatch");
  return post.mean + post.stddev.cwiseProduct(noise);
}

// Convolutional image encoder: conv stack with ReLU, flatten, linear to the
// latent dimension, layer norm, tanh.
template <class T>
struct ImageEncoder {
  std::vector<Conv2d<T>> convs;
  Linear<T> fc;
  LayerNorm<T> ln;
  std::vector<Mat<T>> prerelu;
  Mat<T> tanh_cache;

  ImageEncoder(const NetConfig& cfg, RngStream& rng, const std::string& name)
      : fc(build_convs(cfg, rng, name), cfg.latent_dim, rng, name + ".fc"),
        ln(cfg.latent_dim, name + ".ln") {}

  int in_size() const { return convs.front().in_size(); }
  int out_dim() const { return static_cast<int>(fc.W.value.rows()); }

  Mat<T> forward(const Mat<T>& img, bool train) {
    MIB_CHECK(img.rows() == in_size(), "encode_image: input shape mismatch");
    MIB_CHECK(all_finite(img), "encode_image: non-finite input");
    if (train) prerelu.assign(convs.size(), Mat<T>());
    Mat<T> h = img;
    for (std::size_t i = 0; i < convs.size(); ++i) {
      h = convs[i].forward(h, train);
      if (train) prerelu[i] = h;
      h = h.cwiseMax(T(0));
    }
    h = fc.forward(h, train);
    h = ln.forward(h, train);
    Mat<T> y = h.array().tanh().matrix();
    if (train) tanh_cache = y;
    return y;
  }

  Mat<T> forward(const Mat<T>& img) const { return const_cast<ImageEncoder*>(this)->eval_fwd(img); }

  // Accumulates parameter gradients; image-input gradients are not needed
  // anywhere, so the first conv layer skips its col2im pass.
  void backward(const Mat<T>& dc, bool param_grads = true) {
    Mat<T> d = dc.cwiseProduct((T(1) - tanh_cache.array().square()).matrix());
    d = ln.backward(d, param_grads);
    d = fc.backward(d, param_grads);
    for (std::size_t n = convs.size(); n-- > 0;) {
      d.array() *= (prerelu[n].array() > T(0)).template cast<T>();
      d = convs[n].backward(d, param_grads, /*input_grads=*/n > 0);
    }
  }

  void visit(const ParamFn<T>& f) {
    for (auto& c : convs) c.visit(f);
    fc.visit(f);
    ln.visit(f);
  }

 private:
  // Builds the conv stack as a constructor helper and returns the flatten size.
  int build_convs(const NetConfig& cfg, RngStream& rng, const std::string& name) {
    int ch = cfg.image_channels(), h = cfg.img_h, w = cfg.img_w;
    for (int i = 0; i < cfg.conv_layers; ++i) {
      const int stride = i == 0 ? cfg.first_stride : 1;
      convs.emplace_back(ch, cfg.conv_channels, cfg.kernel, stride, h, w, rng,
                         name + ".conv" + std::to_string(i));
      h = convs.back().oh;
      w = convs.back().ow;
      ch = cfg.conv_channels;
    }
    return ch * h * w;
  }

  Mat<T> eval_fwd(const Mat<T>& img) {
    MIB_CHECK(img.rows() == in_size(), "encode_image: input shape mismatch");
    MIB_CHECK(all_finite(img), "encode_image: non-finite input");
    Mat<T> h = img;
    for (auto& c : convs) h = c.forward_nocache(h).cwiseMax(T(0));
    h = fc.forward(h);
    Mat<T> y(h.rows(), h.cols());
    {
      // stateless layer-norm pass
      const Eigen::Index d = h.rows();
      for (Eigen::Index j = 0; j < h.cols(); ++j) {
        const T mu = h.col(j).mean();
        const T var = (h.col(j).array() - mu).square().sum() / T(d);
        const T is = T(1) / std::sqrt(var + LayerNorm<T>::kEps);
        y.col(j) = ((h.col(j).array() - mu) * is * ln.g.value.col(0).array() +
                    ln.b.value.col(0).array())
                       .matrix();
      }
    }
    return y.array().tanh().matrix();
  }
};

// Two-layer MLP from the proprioceptive vector to the latent space.
template <class T>
struct ProprioEncoder {
  Mlp<T> net;

  ProprioEncoder(const NetConfig& cfg, RngStream& rng, const std::string& name)
      : net({cfg.proprio_dim, cfg.proprio_hidden, cfg.latent_dim}, rng, name) {}

  Mat<T> forward(const Mat<T>& proprio, bool train) {
    MIB_CHECK(proprio.rows() == net.in_dim(), "encode_proprio: dimension mismatch");
    MIB_CHECK(all_finite(proprio), "encode_proprio: non-finite input");
    return net.forward(proprio, train);
  }
  Mat<T> forward(const Mat<T>& proprio) const {
    MIB_CHECK(proprio.rows() == net.in_dim(), "encode_proprio: dimension mismatch");
    return net.forward(proprio);
  }
  void backward(const Mat<T>& dc, bool param_grads = true) { net.backward(dc, param_grads); }
  void visit(const ParamFn<T>& f) { net.visit(f); }
};

template <class T>
Mat<T> vconcat(const Mat<T>& top, const Mat<T>& bottom) {
  MIB_CHECK(top.cols() == bottom.cols(), "vconcat: batch size mismatch");
  Mat<T> out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

// Joint representation j = f([c_i; c_p]); concatenation order is image first.
template <class T>
struct FusionModel {
  Mlp<T> net;

  FusionModel(const NetConfig& cfg, RngStream& rng, const std::string& name)
      : net({2 * cfg.latent_dim, cfg.fusion_hidden, cfg.latent_dim}, rng, name) {}

  Mat<T> forward(const Mat<T>& c_img, const Mat<T>& c_prop, bool train) {
    return net.forward(vconcat(c_img, c_prop), train);
  }
  Mat<T> forward(const Mat<T>& c_img, const Mat<T>& c_prop) const {
    return net.forward(vconcat(c_img, c_prop));
  }
  // Returns (d c_img, d c_prop).
  std::pair<Mat<T>, Mat<T>> backward(const Mat<T>& dj, bool param_grads = true) {
    Mat<T> d = net.backward(dj, param_grads);
    const Eigen::Index l = d.rows() / 2;
    return {d.topRows(l), d.bottomRows(l)};
  }
  void visit(const ParamFn<T>& f) { net.visit(f); }
};

// Maps [c_i; c_p] to the posterior mean and (softplus + floor) stddev.
template <class T>
struct StochasticEncoder {
  Mlp<T> net;
  Mat<T> raw_std_cache;

  StochasticEncoder(const NetConfig& cfg, RngStream& rng, const std::string& name)
      : net({2 * cfg.latent_dim, cfg.stoch_hidden, 2 * cfg.latent_dim}, rng, name) {}

  GaussianPosterior<T> forward(const Mat<T>& c_img, const Mat<T>& c_prop, bool train) {
    Mat<T> out = net.forward(vconcat(c_img, c_prop), train);
    const Eigen::Index l = out.rows() / 2;
    GaussianPosterior<T> post;
    post.mean = out.topRows(l);
    Mat<T> raw = out.bottomRows(l);
    post.stddev = raw.unaryExpr([](T v) { return stable_softplus(v) + T(kStddevFloor); });
    if (train) raw_std_cache = std::move(raw);
    return post;
  }

  GaussianPosterior<T> forward(const Mat<T>& c_img, const Mat<T>& c_prop) const {
    Mat<T> out = net.forward(vconcat(c_img, c_prop));
    const Eigen::Index l = out.rows() / 2;
    GaussianPosterior<T> post;
    post.mean = out.topRows(l);
    post.stddev =
        out.bottomRows(l).unaryExpr([](T v) { return stable_softplus(v) + T(kStddevFloor); });
    return post;
  }

  // Returns (d c_img, d c_prop) given gradients w.r.t. mean and stddev.
  std::pair<Mat<T>, Mat<T>> backward(const Mat<T>& dmean, const Mat<T>& dstd,
                                     bool param_grads = true) {
    Mat<T> draw = dstd.cwiseProduct(raw_std_cache.unaryExpr([](T v) { return sigmoid(v); }));
    Mat<T> d = net.backward(vconcat(dmean, draw), param_grads);
    const Eigen::Index l = d.rows() / 2;
    return {d.topRows(l), d.bottomRows(l)};
  }
  void visit(const ParamFn<T>& f) { net.visit(f); }
};

// Single linear layer on [z; a].
template <class T>
struct PredictionHead {
  Linear<T> lin;
  Eigen::Index z_dim = 0;

  PredictionHead(const NetConfig& cfg, RngStream& rng, const std::string& name)
      : lin(cfg.latent_dim + cfg.action_dim, cfg.latent_dim, rng, name), z_dim(cfg.latent_dim) {}

  Mat<T> forward(const Mat<T>& z, const Mat<T>& a, bool train) {
    return lin.forward(vconcat(z, a), train);
  }
  Mat<T> forward(const Mat<T>& z, const Mat<T>& a) const { return lin.forward(vconcat(z, a)); }
  // Returns (dz, da).
  std::pair<Mat<T>, Mat<T>> backward(const Mat<T>& dy, bool param_grads = true) {
    Mat<T> d = lin.backward(dy, param_grads);
    return {d.topRows(z_dim), d.bottomRows(d.rows() - z_dim)};
  }
  void visit(const ParamFn<T>& f) { lin.visit(f); }
};

template <class T>
struct ProjectionHead {
  Mlp<T> net;

  ProjectionHead(const NetConfig& cfg, RngStream& rng, const std::string& name)
      : net({cfg.latent_dim, cfg.proj_hidden, cfg.latent_dim}, rng, name) {}

  Mat<T> forward(const Mat<T>& v, bool train) { return net.forward(v, train); }
  Mat<T> forward(const Mat<T>& v) const { return net.forward(v); }
  Mat<T> backward(const Mat<T>& dy, bool param_grads = true) { return net.backward(dy, param_grads); }
  void visit(const ParamFn<T>& f) { net.visit(f); }
};

template <class T>
std::vector<Param<T>*> collect_params(const std::function<void(const ParamFn<T>&)>& visit) {
  std::vector<Param<T>*> out;
  visit([&](Param<T>& p) { out.push_back(&p); });
  return out;
}

// target <- (1 - tau) * target + tau * online, elementwise over every tensor.
template <class T>
void ema_update(const std::vector<Param<T>*>& online, const std::vector<Param<T>*>& target,
                double tau) {
  MIB_CHECK(tau >= 0.0 && tau <= 1.0, "ema_update: tau out of [0,1]");
  MIB_CHECK(online.size() == target.size(), "ema_update: parameter set size mismatch");
  for (std::size_t i = 0; i < online.size(); ++i) {
    MIB_CHECK(online[i]->value.rows() == target[i]->value.rows() &&
                  online[i]->value.cols() == target[i]->value.cols(),
              "ema_update: shape mismatch on " + target[i]->name);
    target[i]->value = T(1 - tau) * target[i]->value + T(tau) * online[i]->value;
  }
}

template <class T>
void copy_params(const std::vector<Param<T>*>& src, const std::vector<Param<T>*>& dst) {
  MIB_CHECK(src.size() == dst.size(), "copy_params: size mismatch");
  for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value;
}

}  // namespace mib
