#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mib/common.hpp"
#include "mib/rng.hpp"

namespace mib {

// A named tensor with an accumulated gradient. Activations flow through the
// layers as [features, batch] column-major matrices, one sample per column.
template <class T>
struct Param {
  std::string name;
  Mat<T> value;
  Mat<T> grad;

  void set_shape(const std::string& n, Eigen::Index rows, Eigen::Index cols) {
    name = n;
    value.setZero(rows, cols);
    grad.setZero(rows, cols);
  }
  void zero_grad() { grad.setZero(); }
};

template <class T>
using ParamFn = std::function<void(Param<T>&)>;

template <class T>
inline void kaiming_uniform(Param<T>& p, int fan_in, RngStream& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  rng.fill_uniform(p.value, -bound, bound);
}

template <class T>
inline T stable_softplus(T x) {
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <class T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

// y = W x + b
template <class T>
struct Linear {
  Param<T> W;  // [out, in]
  Param<T> b;  // [out, 1]
  Mat<T> x_cache;

  Linear(int in, int out, RngStream& rng, const std::string& name) {
    W.set_shape(name + ".weight", out, in);
    b.set_shape(name + ".bias", out, 1);
    kaiming_uniform(W, in, rng);
    kaiming_uniform(b, in, rng);
  }

  Mat<T> forward(const Mat<T>& x, bool train) {
    MIB_CHECK(x.rows() == W.value.cols(), "Linear " + W.name + ": input dim mismatch");
    if (train) x_cache = x;
    Mat<T> y = W.value * x;
    y.colwise() += b.value.col(0);
    return y;
  }

  Mat<T> forward(const Mat<T>& x) const {
    MIB_CHECK(x.rows() == W.value.cols(), "Linear " + W.name + ": input dim mismatch");
    Mat<T> y = W.value * x;
    y.colwise() += b.value.col(0);
    return y;
  }

  // Accumulates parameter gradients (unless disabled) and returns dL/dx.
  Mat<T> backward(const Mat<T>& dy, bool param_grads = true) {
    if (param_grads) {
      W.grad.noalias() += dy * x_cache.transpose();
      b.grad.col(0) += dy.rowwise().sum();
    }
    return W.value.transpose() * dy;
  }

  void visit(const ParamFn<T>& f) {
    f(W);
    f(b);
  }
};

// Fully connected stack with ReLU between layers and a linear final layer.
template <class T>
struct Mlp {
  std::vector<Linear<T>> layers;
  std::vector<Mat<T>> prerelu;

  Mlp(const std::vector<int>& dims, RngStream& rng, const std::string& name) {
    for (std::size_t i = 0; i + 1 < dims.size(); ++i)
      layers.emplace_back(dims[i], dims[i + 1], rng, name + ".fc" + std::to_string(i));
  }

  int in_dim() const { return static_cast<int>(layers.front().W.value.cols()); }
  int out_dim() const { return static_cast<int>(layers.back().W.value.rows()); }

  Mat<T> forward(const Mat<T>& x, bool train) {
    if (train) prerelu.assign(layers.size() > 0 ? layers.size() - 1 : 0, Mat<T>());
    Mat<T> h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      h = layers[i].forward(h, train);
      if (i + 1 < layers.size()) {
        if (train) prerelu[i] = h;
        h = h.cwiseMax(T(0));
      }
    }
    return h;
  }

  Mat<T> forward(const Mat<T>& x) const {
    Mat<T> h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      h = layers[i].forward(h);
      if (i + 1 < layers.size()) h = h.cwiseMax(T(0));
    }
    return h;
  }

  Mat<T> backward(const Mat<T>& dy, bool param_grads = true) {
    Mat<T> d = dy;
    for (std::size_t n = layers.size(); n-- > 0;) {
      d = layers[n].backward(d, param_grads);
      if (n > 0)
        d.array() *= (prerelu[n - 1].array() > T(0)).template cast<T>();
    }
    return d;
  }

  void visit(const ParamFn<T>& f) {
    for (auto& l : layers) l.visit(f);
  }
};

// Valid (unpadded) 2D convolution over channels-first images. A sample is a
// flattened C*H*W column; batches are matrices of such columns. Lowering uses
// an im2col buffer shaped [B*P, K] so both GEMM operands stay column-major.
template <class T>
struct Conv2d {
  int cin, cout, k, stride, ih, iw, oh, ow;
  Param<T> W;  // [cout, cin*k*k]
  Param<T> b;  // [cout, 1]
  // lowered-input cache for backward, plus reusable scratch buffers
  Mat<T> cols_cache, cols_eval_, yt_scratch_, dcols_scratch_;

  Conv2d(int cin_, int cout_, int k_, int stride_, int ih_, int iw_, RngStream& rng,
         const std::string& name)
      : cin(cin_), cout(cout_), k(k_), stride(stride_), ih(ih_), iw(iw_) {
    MIB_CHECK(ih >= k && iw >= k, "Conv2d " + name + ": input smaller than kernel");
    oh = (ih - k) / stride + 1;
    ow = (iw - k) / stride + 1;
    W.set_shape(name + ".weight", cout, cin * k * k);
    b.set_shape(name + ".bias", cout, 1);
    kaiming_uniform(W, cin * k * k, rng);
    kaiming_uniform(b, cin * k * k, rng);
  }

  int in_size() const { return cin * ih * iw; }
  int out_size() const { return cout * oh * ow; }

  void im2col(const Mat<T>& x, Mat<T>& cols) const {
    const Eigen::Index B = x.cols();
    const int P = oh * ow;
    for (int c = 0; c < cin; ++c) {
      for (int ki = 0; ki < k; ++ki) {
        for (int kj = 0; kj < k; ++kj) {
          const int r = (c * k + ki) * k + kj;
          T* dst_col = cols.col(r).data();
          for (Eigen::Index s = 0; s < B; ++s) {
            const T* xs = x.col(s).data() + c * ih * iw;
            T* dst = dst_col + s * P;
            for (int oi = 0; oi < oh; ++oi) {
              const T* src = xs + (oi * stride + ki) * iw + kj;
              T* d = dst + oi * ow;
              if (stride == 1) {
                std::copy(src, src + ow, d);
              } else {
                for (int oj = 0; oj < ow; ++oj) d[oj] = src[oj * stride];
              }
            }
          }
        }
      }
    }
  }

  Mat<T> forward(const Mat<T>& x, bool train) {
    MIB_CHECK(x.rows() == in_size(), "Conv2d " + W.name + ": input size mismatch");
    const Eigen::Index B = x.cols();
    const int P = oh * ow;
    Mat<T>& cols = train ? cols_cache : cols_eval_;
    cols.resize(B * P, cin * k * k);
    im2col(x, cols);
    yt_scratch_.resize(B * P, cout);
    yt_scratch_.noalias() = cols * W.value.transpose();
    yt_scratch_.rowwise() += b.value.col(0).transpose();
    Mat<T> y(cout * P, B);
    for (Eigen::Index s = 0; s < B; ++s)
      for (int co = 0; co < cout; ++co)
        y.col(s).segment(co * P, P) = yt_scratch_.col(co).segment(s * P, P);
    return y;
  }

  Mat<T> forward(const Mat<T>& x) const { return const_cast<Conv2d*>(this)->forward(x, false); }

  Mat<T> forward_nocache(const Mat<T>& x) { return forward(x, false); }

  Mat<T> backward(const Mat<T>& dy, bool param_grads = true, bool input_grads = true) {
    const Eigen::Index B = dy.cols();
    const int P = oh * ow;
    yt_scratch_.resize(B * P, cout);
    for (Eigen::Index s = 0; s < B; ++s)
      for (int co = 0; co < cout; ++co)
        yt_scratch_.col(co).segment(s * P, P) = dy.col(s).segment(co * P, P);
    if (param_grads) {
      W.grad.noalias() += yt_scratch_.transpose() * cols_cache;
      b.grad.col(0) += yt_scratch_.colwise().sum().transpose();
    }
    Mat<T> dx;
    if (input_grads) {
      dcols_scratch_.resize(B * P, cin * k * k);
      dcols_scratch_.noalias() = yt_scratch_ * W.value;
      dx = Mat<T>::Zero(in_size(), B);
      for (int c = 0; c < cin; ++c) {
        for (int ki = 0; ki < k; ++ki) {
          for (int kj = 0; kj < k; ++kj) {
            const int r = (c * k + ki) * k + kj;
            const T* src_col = dcols_scratch_.col(r).data();
            for (Eigen::Index s = 0; s < B; ++s) {
              T* xs = dx.col(s).data() + c * ih * iw;
              const T* src = src_col + s * P;
              for (int oi = 0; oi < oh; ++oi) {
                T* d = xs + (oi * stride + ki) * iw + kj;
                const T* sr = src + oi * ow;
                if (stride == 1) {
                  for (int oj = 0; oj < ow; ++oj) d[oj] += sr[oj];
                } else {
                  for (int oj = 0; oj < ow; ++oj) d[oj * stride] += sr[oj];
                }
              }
            }
          }
        }
      }
    }
    return dx;
  }

  void visit(const ParamFn<T>& f) {
    f(W);
    f(b);
  }
};

// Layer normalization over the feature dimension, with affine gain/bias.
template <class T>
struct LayerNorm {
  Param<T> g, b;
  Mat<T> xhat;
  Vec<T> inv_std;
  static constexpr T kEps = T(1e-5);

  LayerNorm(int d, const std::string& name) {
    g.set_shape(name + ".gain", d, 1);
    b.set_shape(name + ".bias", d, 1);
    g.value.setOnes();
  }

  Mat<T> forward(const Mat<T>& x, bool train) {
    const Eigen::Index d = x.rows(), B = x.cols();
    Mat<T> xh(d, B);
    Vec<T> is(B);
    for (Eigen::Index j = 0; j < B; ++j) {
      const T mu = x.col(j).mean();
      const T var = (x.col(j).array() - mu).square().sum() / T(d);
      is(j) = T(1) / std::sqrt(var + kEps);
      xh.col(j) = (x.col(j).array() - mu).matrix() * is(j);
    }
    Mat<T> y = xh.array().colwise() * g.value.col(0).array();
    y.colwise() += b.value.col(0);
    if (train) {
      xhat = std::move(xh);
      inv_std = std::move(is);
      return y;
    }
    return y;
  }

  Mat<T> backward(const Mat<T>& dy, bool param_grads = true) {
    const Eigen::Index d = dy.rows(), B = dy.cols();
    if (param_grads) {
      g.grad.col(0) += (dy.array() * xhat.array()).rowwise().sum().matrix();
      b.grad.col(0) += dy.rowwise().sum();
    }
    Mat<T> dx(d, B);
    for (Eigen::Index j = 0; j < B; ++j) {
      Vec<T> dxh = dy.col(j).cwiseProduct(g.value.col(0));
      const T m1 = dxh.mean();
      const T m2 = dxh.cwiseProduct(xhat.col(j)).mean();
      dx.col(j) = inv_std(j) * (dxh.array() - m1 - xhat.col(j).array() * m2).matrix();
    }
    return dx;
  }

  void visit(const ParamFn<T>& f) {
    f(g);
    f(b);
  }
};

// Adam over a fixed set of parameter tensors. Parameter addresses must stay
// stable for the optimizer's lifetime.
template <class T>
class Adam {
 public:
  Adam(std::vector<Param<T>*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    for (auto* p : params_) {
      m_.push_back(Mat<T>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Mat<T>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  void step() {
    ++t_;
    const T c1 = T(1) - std::pow(T(b1_), T(t_));
    const T c2 = T(1) - std::pow(T(b2_), T(t_));
    const T alpha = T(lr_) * std::sqrt(c2) / c1;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Param<T>& p = *params_[i];
      m_[i] = T(b1_) * m_[i] + T(1 - b1_) * p.grad;
      v_[i] = T(b2_) * v_[i] + (T(1 - b2_) * p.grad.array().square()).matrix();
      p.value.array() -= alpha * m_[i].array() / (v_[i].array().sqrt() + T(eps_));
    }
  }

  long step_count() const { return t_; }
  const std::vector<Param<T>*>& params() const { return params_; }
  std::vector<Mat<T>>& m() { return m_; }
  std::vector<Mat<T>>& v() { return v_; }
  void set_step_count(long t) { t_ = t; }

 private:
  std::vector<Param<T>*> params_;
  std::vector<Mat<T>> m_, v_;
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
};

}  // namespace mib
