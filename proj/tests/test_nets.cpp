#include <doctest.h>

#include <cmath>

#include "mib/bundle.hpp"
#include "mib/layers.hpp"
#include "mib/mib_loss.hpp"
#include "mib/nets.hpp"
#include "test_util.hpp"

using namespace mib;
using namespace mib::test;

TEST_SUITE_BEGIN("nets");

namespace {
NetConfig default_config() {
  NetConfig c;
  c.proprio_dim = 24;
  c.action_dim = 6;
  return c;
}
}  // namespace

TEST_CASE("encode_image maps [9,84,84] to a 50-vector") {
  NetConfig c = default_config();
  RngStream rng(1);
  ImageEncoder<float> enc(c, rng, "img");
  MatF img(c.image_size(), 1);
  RngStream r2(2);
  r2.fill_uniform(img, 0.0, 1.0);
  MatF out = enc.forward(img);
  CHECK(out.rows() == 50);
  CHECK(out.cols() == 1);
  SUBCASE("deterministic") { CHECK(enc.forward(img) == out); }
  SUBCASE("all-zero image gives finite output") {
    MatF zero = MatF::Zero(c.image_size(), 1);
    CHECK(all_finite(enc.forward(zero)));
  }
  SUBCASE("shape mismatch and non-finite input are rejected") {
    CHECK_THROWS(enc.forward(MatF::Zero(10, 1)));
    img(0, 0) = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS(enc.forward(img));
  }
}

TEST_CASE("encode_proprio: 2-layer MLP to 50 dims") {
  NetConfig c = default_config();
  RngStream rng(3);
  ProprioEncoder<float> enc(c, rng, "prop");
  MatF x(24, 1);
  RngStream r2(4);
  r2.fill_normal(x);
  MatF out = enc.forward(x);
  CHECK(out.rows() == 50);
  CHECK(enc.forward(x) == out);
  // nonlinearity: doubling the input must not double the output
  MatF out2 = enc.forward(MatF(2 * x));
  CHECK((out2 - 2 * out).norm() > 1e-4);
  CHECK_THROWS(enc.forward(MatF::Zero(7, 1)));
}

TEST_CASE("fuse concatenates image-then-proprio and is order sensitive") {
  NetConfig c = default_config();
  RngStream rng(5);
  FusionModel<float> fusion(c, rng, "fusion");
  MatF ci(50, 1), cp(50, 1);
  RngStream r2(6);
  r2.fill_normal(ci);
  r2.fill_normal(cp);
  MatF j = fusion.forward(ci, cp);
  CHECK(j.rows() == 50);
  CHECK(fusion.forward(ci, cp) == j);
  CHECK((fusion.forward(cp, ci) - j).norm() > 1e-4);
}

TEST_CASE("stochastic_encode emits a valid diagonal Gaussian") {
  NetConfig c = default_config();
  RngStream rng(7);
  StochasticEncoder<float> enc(c, rng, "stoch");
  MatF ci(50, 3), cp(50, 3);
  RngStream r2(8);
  r2.fill_normal(ci);
  r2.fill_normal(cp);
  GaussianPosterior<float> post = enc.forward(ci, cp);
  CHECK(post.mean.rows() == 50);
  CHECK(post.stddev.rows() == 50);
  CHECK((post.stddev.array() > 0.f).all());
}

TEST_CASE("stddev activation: softplus plus floor") {
  // scalar oracle: softplus(-100) + 1e-4
  const double oracle = std::log1p(std::exp(-100.0)) + 1e-4;
  const double got = stable_softplus(-100.0) + kStddevFloor;
  CHECK(got == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(got == doctest::Approx(1e-4).epsilon(1e-6));
  // large inputs: softplus(x) ~ x
  CHECK(stable_softplus(50.0) == doctest::Approx(50.0).epsilon(1e-12));
}

TEST_CASE("sample_posterior") {
  GaussianPosterior<double> post;
  post.mean = MatD::Constant(5, 1, 0.3);
  post.stddev = MatD::Constant(5, 1, 0.7);
  SUBCASE("zero noise returns the mean") {
    CHECK(sample_posterior(post, MatD(MatD::Zero(5, 1))) == post.mean);
  }
  SUBCASE("floored stddev keeps z within 1e-4 * |noise| of the mean") {
    post.stddev.setConstant(kStddevFloor);
    MatD noise = MatD::Constant(5, 1, 3.0);
    MatD z = sample_posterior(post, noise);
    CHECK((z - post.mean).cwiseAbs().maxCoeff() <= 1e-4 * 3.0 + 1e-12);
  }
  SUBCASE("Monte-Carlo moments: mean within 4 sigma / sqrt(N)") {
    const int N = 1000000;
    post.mean = MatD::Zero(2, 1);
    post.stddev = MatD::Ones(2, 1);
    RngStream rng(42);
    VecD acc = VecD::Zero(2);
    MatD noise(2, 1);
    for (int i = 0; i < N; ++i) {
      rng.fill_normal(noise);
      acc += sample_posterior(post, noise).col(0);
    }
    acc /= N;
    CHECK(acc.cwiseAbs().maxCoeff() < 4.0 / std::sqrt(static_cast<double>(N)));
  }
}

TEST_CASE("sample_posterior gradients: identity in mean, diag(noise) in stddev") {
  // z = mean + stddev .* noise, so dz_i/dmean_j = delta_ij and
  // dz_i/dstddev_j = delta_ij * noise_i; verified against central differences.
  RngStream rng(11);
  const int L = 6;
  GaussianPosterior<double> post;
  post.mean.resize(L, 1);
  post.stddev.resize(L, 1);
  rng.fill_normal(post.mean);
  rng.fill_uniform(post.stddev, 0.2, 1.5);
  MatD noise(L, 1);
  rng.fill_normal(noise);
  const double eps = 1e-6;
  for (int i = 0; i < L; ++i) {
    for (int j = 0; j < L; ++j) {
      GaussianPosterior<double> p1 = post, p2 = post;
      p1.mean(j, 0) += eps;
      p2.mean(j, 0) -= eps;
      const double fd_mean =
          (sample_posterior(p1, noise)(i, 0) - sample_posterior(p2, noise)(i, 0)) / (2 * eps);
      CHECK(fd_mean == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-4));
      GaussianPosterior<double> q1 = post, q2 = post;
      q1.stddev(j, 0) += eps;
      q2.stddev(j, 0) -= eps;
      const double fd_std =
          (sample_posterior(q1, noise)(i, 0) - sample_posterior(q2, noise)(i, 0)) / (2 * eps);
      const double expect = i == j ? noise(i, 0) : 0.0;
      CHECK(fd_std == doctest::Approx(expect).epsilon(1e-4).scale(1.0));
    }
  }
}

TEST_CASE("predict_head is a single linear map") {
  NetConfig c = default_config();
  RngStream rng(13);
  PredictionHead<float> head(c, rng, "pred");
  MatF z(50, 2), a(6, 2);
  RngStream r2(14);
  r2.fill_normal(z);
  r2.fill_normal(a);
  SUBCASE("zero weights give zero output") {
    head.lin.W.value.setZero();
    head.lin.b.value.setZero();
    CHECK(head.forward(z, a).norm() == 0.f);
  }
  SUBCASE("linearity with zero bias") {
    head.lin.b.value.setZero();
    MatF y1 = head.forward(z, a);
    MatF y2 = head.forward(MatF(2 * z), MatF(2 * a));
    CHECK((y2 - 2 * y1).cwiseAbs().maxCoeff() < 1e-5);
  }
  SUBCASE("matches an explicit matrix-vector product oracle") {
    MatF y = head.forward(z, a);
    for (int col = 0; col < 2; ++col) {
      VecF xa(56);
      xa << z.col(col), a.col(col);
      for (int r = 0; r < 50; ++r) {
        double acc = head.lin.b.value(r, 0);
        for (int k = 0; k < 56; ++k) acc += static_cast<double>(head.lin.W.value(r, k)) * xa(k);
        CHECK(y(r, col) == doctest::Approx(acc).epsilon(1e-4));
      }
    }
  }
}

TEST_CASE("project_head output and target separation") {
  NetConfig c = mini_config();
  RngStream rng(15);
  NetworkBundle<double> b(c, rng);
  MatD v(c.latent_dim, 2);
  RngStream r2(16);
  r2.fill_normal(v);
  MatD out = b.proj_head.forward(v);
  CHECK(out.rows() == c.latent_dim);
  CHECK(b.proj_head.forward(v) == out);
  // targets start as exact copies
  CHECK(params_equal(b.encoder_online_params(), b.encoder_target_params()));
  // one representation-loss step moves the online head but not the target
  auto online_head = collect_params<double>([&](const ParamFn<double>& f) { b.proj_head.visit(f); });
  auto target_head =
      collect_params<double>([&](const ParamFn<double>& f) { b.proj_head_tgt.visit(f); });
  auto target_before = snapshot(target_head);
  Adam<double> opt(b.mib_params(), 1e-2);
  PreparedBatch<double> pb = random_prepared_batch<double>(c, 4, r2);
  opt.zero_grad();
  RngStream r3(17);
  mib_loss<double>(b, pb, 1e-4, r3);
  opt.step();
  CHECK(!params_equal(online_head, target_head));
  CHECK(matches_snapshot(target_head, target_before));
}

TEST_CASE("ema_update") {
  RngStream rng(18);
  Param<double> online, target;
  online.set_shape("o", 4, 3);
  target.set_shape("t", 4, 3);
  rng.fill_normal(online.value);
  rng.fill_normal(target.value);
  std::vector<Param<double>*> ov{&online}, tv{&target};
  SUBCASE("tau = 1 copies online exactly") {
    ema_update(ov, tv, 1.0);
    CHECK(target.value == online.value);
  }
  SUBCASE("tau = 0 leaves target unchanged") {
    MatD before = target.value;
    ema_update(ov, tv, 0.0);
    CHECK(target.value == before);
  }
  SUBCASE("constant online: gap scales by (1-tau)^n") {
    // target_{k+1} - online = (1 - tau) * (target_k - online)
    const double tau = 0.05;
    const int n = 20;
    MatD gap0 = target.value - online.value;
    for (int i = 0; i < n; ++i) ema_update(ov, tv, tau);
    MatD expected = online.value + std::pow(1 - tau, n) * gap0;
    CHECK((target.value - expected).cwiseAbs().maxCoeff() < 1e-6);
  }
  SUBCASE("shape mismatch rejected") {
    Param<double> bad;
    bad.set_shape("b", 2, 2);
    std::vector<Param<double>*> bv{&bad};
    CHECK_THROWS(ema_update(ov, bv, 0.5));
  }
}

TEST_CASE("finite outputs across random draws") {
  NetConfig c = mini_config();
  RngStream rng(19);
  NetworkBundle<float> b(c, rng);
  RngStream r2(20);
  const int draws = 10000;
  const int batch = 50;  // draws spread over batched evaluations
  for (int rep = 0; rep < draws / batch; ++rep) {
    MatF img(c.image_size(), batch);
    r2.fill_uniform(img, 0.0, 1.0);
    MatF prop(c.proprio_dim, batch);
    r2.fill_normal(prop);
    MatF ci = b.image_enc.forward(img);
    MatF cp = b.proprio_enc.forward(prop);
    MatF j = b.fusion.forward(ci, cp);
    GaussianPosterior<float> post = b.stoch_enc.forward(ci, cp);
    MatF noise(c.latent_dim, batch);
    r2.fill_normal(noise);
    MatF z = sample_posterior(post, noise);
    REQUIRE(all_finite(ci));
    REQUIRE(all_finite(cp));
    REQUIRE(all_finite(j));
    REQUIRE(all_finite(z));
  }
}

TEST_CASE("latent path works for any proprio/action dimension") {
  for (int dp : {1, 5}) {
    for (int da : {1, 4}) {
      NetConfig c = mini_config();
      c.proprio_dim = dp;
      c.action_dim = da;
      RngStream rng(21);
      NetworkBundle<float> b(c, rng);
      MatF img(c.image_size(), 2), prop(dp, 2), a(da, 2);
      RngStream r2(22);
      r2.fill_uniform(img, 0.0, 1.0);
      r2.fill_normal(prop);
      r2.fill_uniform(a, -1.0, 1.0);
      MatF ci = b.image_enc.forward(img);
      MatF cp = b.proprio_enc.forward(prop);
      CHECK(b.fusion.forward(ci, cp).rows() == c.latent_dim);
      GaussianPosterior<float> post = b.stoch_enc.forward(ci, cp);
      MatF noise = MatF::Zero(c.latent_dim, 2);
      CHECK(sample_posterior(post, noise).rows() == c.latent_dim);
      CHECK(b.pred_head.forward(post.mean, a).rows() == c.latent_dim);
    }
  }
}

TEST_CASE("forward passes never mutate target parameters") {
  NetConfig c = mini_config();
  RngStream rng(23);
  NetworkBundle<float> b(c, rng);
  auto tgt_snap = snapshot(b.encoder_target_params());
  auto crit_snap = snapshot(b.critic_target_params());
  RngStream r2(24);
  PreparedBatch<float> pb = random_prepared_batch<float>(c, 4, r2);
  b.image_enc.forward(pb.obs_image, true);
  b.image_enc_tgt.forward(pb.obs_image);
  b.proprio_enc.forward(pb.obs_proprio, true);
  b.stoch_enc.forward(MatF::Zero(c.latent_dim, 4), MatF::Zero(c.latent_dim, 4));
  CHECK(matches_snapshot(b.encoder_target_params(), tgt_snap));
  CHECK(matches_snapshot(b.critic_target_params(), crit_snap));
}

TEST_SUITE_END();
