#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ecodrive/common.hpp"
#include "ecodrive/kernels.hpp"
#include "ecodrive/nn.hpp"

using namespace ecodrive;
using namespace ecodrive::nn;
using kernels::Exec;

namespace {

std::vector<double> randn(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST(Kernels, DenseForwardMatchesNaiveLoop) {
  const int batch = 7, in = 5, out = 3;
  const auto x = randn(batch * in, 1), w = randn(out * in, 2), b = randn(out, 3);
  std::vector<double> y(batch * out);
  kernels::dense_forward(x, w, b, y, batch, in, out, Exec::serial);
  for (int r = 0; r < batch; ++r)
    for (int o = 0; o < out; ++o) {
      double s = b[o];
      for (int i = 0; i < in; ++i) s += x[r * in + i] * w[o * in + i];
      EXPECT_NEAR(y[r * out + o], s, 1e-12);
    }
}

TEST(Kernels, SerialAndParallelAgree) {
  const int batch = 301, in = 37, out = 29;
  const auto x = randn(batch * in, 4), w = randn(out * in, 5), b = randn(out, 6), dy = randn(batch * out, 7);
  std::vector<double> ys(batch * out), yp(batch * out);
  kernels::dense_forward(x, w, b, ys, batch, in, out, Exec::serial);
  kernels::dense_forward(x, w, b, yp, batch, in, out, Exec::parallel);
  EXPECT_EQ(ys, yp);
  std::vector<double> dxs(batch * in), dxp(batch * in);
  kernels::dense_backward_input(dy, w, dxs, batch, in, out, Exec::serial);
  kernels::dense_backward_input(dy, w, dxp, batch, in, out, Exec::parallel);
  EXPECT_EQ(dxs, dxp);
  std::vector<double> dws(out * in), dwp(out * in), dbs(out), dbp(out);
  kernels::dense_backward_params(dy, x, dws, dbs, batch, in, out, Exec::serial);
  kernels::dense_backward_params(dy, x, dwp, dbp, batch, in, out, Exec::parallel);
  for (std::size_t i = 0; i < dws.size(); ++i) EXPECT_NEAR(dws[i], dwp[i], 1e-10);
  for (std::size_t i = 0; i < dbs.size(); ++i) EXPECT_NEAR(dbs[i], dbp[i], 1e-10);
  auto ts = ys, tp = ys;
  kernels::tanh_inplace(ts, Exec::serial);
  kernels::tanh_inplace(tp, Exec::parallel);
  EXPECT_EQ(ts, tp);
}

TEST(Mlp, OrthogonalInitRowsAreOrthonormal) {
  Mlp net({6, 8, 8, 1});
  net.init_orthogonal(3, std::sqrt(2.0), 0.01);
  // Hidden layer 1 is 8 x 8: W W^T = 2 I.
  const auto off = net.weight_offset(1);
  const auto& p = net.params();
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      double s = 0;
      for (int k = 0; k < 8; ++k) s += p[off + i * 8 + k] * p[off + j * 8 + k];
      EXPECT_NEAR(s, i == j ? 2.0 : 0.0, 1e-9);
    }
  for (int k = 0; k < 8; ++k) EXPECT_EQ(p[net.bias_offset(1) + k], 0.0);
}

TEST(Mlp, BackwardMatchesFiniteDifferences) {
  Mlp net({4, 6, 5, 2});
  net.init_orthogonal(9, 1.0, 1.0);
  const int batch = 3;
  const auto x = randn(batch * 4, 10), target = randn(batch * 2, 11);
  auto loss = [&](const Mlp& m) {
    const auto y = m.predict(x, batch, Exec::serial);
    double l = 0;
    for (std::size_t i = 0; i < y.size(); ++i) l += 0.5 * (y[i] - target[i]) * (y[i] - target[i]);
    return l;
  };
  Workspace ws;
  net.forward(x, batch, ws, Exec::serial);
  const auto& y = ws.acts.back();
  std::vector<double> gout(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) gout[i] = y[i] - target[i];
  std::vector<double> grad(net.param_count(), 0.0);
  net.backward(ws, gout, grad, Exec::serial);
  const double h = 1e-6;
  for (std::size_t i = 0; i < net.param_count(); ++i) {
    Mlp a = net, b = net;
    a.params()[i] += h;
    b.params()[i] -= h;
    EXPECT_NEAR(grad[i], (loss(a) - loss(b)) / (2 * h), 1e-6) << "param " << i;
  }
}

TEST(Adam, FirstStepMovesBySignTimesLr) {
  Adam opt(3, AdamConfig{0.1});
  std::vector<double> p{1.0, 1.0, 1.0}, g{2.0, -0.5, 0.0};
  opt.step(p, g);
  EXPECT_NEAR(p[0], 0.9, 1e-6);
  EXPECT_NEAR(p[1], 1.1, 1e-6);
  EXPECT_DOUBLE_EQ(p[2], 1.0);
}

TEST(Adam, ZeroLearningRateLeavesParameters) {
  Adam opt(2, AdamConfig{0.0});
  std::vector<double> p{0.3, -0.7}, g{1.0, 1.0};
  opt.step(p, g);
  EXPECT_EQ(p, (std::vector<double>{0.3, -0.7}));
}

TEST(Grad, ClipNorm) {
  std::vector<double> g{3.0, 4.0};
  EXPECT_DOUBLE_EQ(clip_grad_norm(g, 1.0), 5.0);
  EXPECT_NEAR(g[0], 0.6, 1e-12);
  EXPECT_NEAR(g[1], 0.8, 1e-12);
}

TEST(Gaussian, ClosedForms) {
  EXPECT_NEAR(gaussian_log_prob(0.0, 0.0, 0.0), -0.5 * std::log(2 * std::numbers::pi), 1e-12);
  EXPECT_NEAR(gaussian_log_prob(1.0, 0.0, std::log(2.0)), -0.125 - std::log(2.0) - 0.5 * std::log(2 * std::numbers::pi),
              1e-12);
  EXPECT_NEAR(gaussian_entropy(0.0), 0.5 * std::log(2 * std::numbers::pi * std::numbers::e), 1e-12);
  EXPECT_NEAR(gaussian_kl(0.3, -0.2, 0.3, -0.2), 0.0, 1e-15);
  // KL(N(0,1) || N(1,2^2)) = ln 2 + (1 + 1) / 8 - 1/2
  EXPECT_NEAR(gaussian_kl(0.0, 0.0, 1.0, std::log(2.0)), std::log(2.0) + 0.25 - 0.5, 1e-12);
}
