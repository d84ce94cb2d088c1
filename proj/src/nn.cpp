#include "ecodrive/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "ecodrive/common.hpp"

namespace ecodrive::nn {

Mlp::Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw ConfigError("network needs at least an input and an output layer");
  for (int s : sizes_)
    if (s <= 0) throw ConfigError("layer sizes must be positive");
  std::size_t off = 0;
  for (int l = 0; l + 1 < static_cast<int>(sizes_.size()); ++l) {
    offsets_.push_back(off);
    off += static_cast<std::size_t>(sizes_[l] * sizes_[l + 1] + sizes_[l + 1]);
  }
  params_.assign(off, 0.0);
}

std::size_t Mlp::bias_offset(int layer) const {
  const auto l = static_cast<std::size_t>(layer);
  return offsets_.at(l) + static_cast<std::size_t>(sizes_[l] * sizes_[l + 1]);
}

void Mlp::init_orthogonal(std::uint64_t seed, double hidden_gain, double output_gain) {
  Rng rng = make_rng(seed, stream::policy);
  std::normal_distribution<double> normal;
  for (int l = 0; l < layer_count(); ++l) {
    const int in = sizes_[static_cast<std::size_t>(l)];
    const int out = sizes_[static_cast<std::size_t>(l) + 1];
    const int rows = std::max(in, out), cols = std::min(in, out);
    Eigen::MatrixXd g(rows, cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) g(i, j) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
    for (int j = 0; j < cols; ++j)
      if (r(j, j) < 0) q.col(j) *= -1.0;
    const double gain = l + 1 == layer_count() ? output_gain : hidden_gain;
    double* w = params_.data() + weight_offset(l);
    for (int o = 0; o < out; ++o)
      for (int i = 0; i < in; ++i) w[o * in + i] = gain * (out >= in ? q(o, i) : q(i, o));
    std::fill_n(params_.data() + bias_offset(l), out, 0.0);
  }
}

void Mlp::forward(std::span<const double> x, int batch, Workspace& ws, Exec exec) const {
  if (x.size() != static_cast<std::size_t>(batch * inputs())) throw UsageError("network input has the wrong size");
  ws.batch = batch;
  ws.acts.resize(sizes_.size());
  ws.acts[0].assign(x.begin(), x.end());
  for (int l = 0; l < layer_count(); ++l) {
    const auto ul = static_cast<std::size_t>(l);
    const int in = sizes_[ul], out = sizes_[ul + 1];
    auto& y = ws.acts[ul + 1];
    y.resize(static_cast<std::size_t>(batch * out));
    kernels::dense_forward(ws.acts[ul], std::span<const double>(params_).subspan(weight_offset(l), static_cast<std::size_t>(in * out)),
                           std::span<const double>(params_).subspan(bias_offset(l), static_cast<std::size_t>(out)), y, batch,
                           in, out, exec);
    if (l + 1 < layer_count()) kernels::tanh_inplace(y, exec);
  }
}

void Mlp::backward(Workspace& ws, std::span<const double> grad_out, std::span<double> grad, Exec exec) const {
  const int batch = ws.batch;
  if (grad.size() != params_.size()) throw UsageError("gradient buffer has the wrong size");
  if (grad_out.size() != static_cast<std::size_t>(batch * outputs())) throw UsageError("output gradient has the wrong size");
  ws.grad_a.assign(grad_out.begin(), grad_out.end());
  for (int l = layer_count() - 1; l >= 0; --l) {
    const auto ul = static_cast<std::size_t>(l);
    const int in = sizes_[ul], out = sizes_[ul + 1];
    kernels::dense_backward_params(ws.grad_a, ws.acts[ul], grad.subspan(weight_offset(l), static_cast<std::size_t>(in * out)),
                                   grad.subspan(bias_offset(l), static_cast<std::size_t>(out)), batch, in, out, exec);
    if (l == 0) break;
    ws.grad_b.resize(static_cast<std::size_t>(batch * in));
    kernels::dense_backward_input(ws.grad_a, std::span<const double>(params_).subspan(weight_offset(l), static_cast<std::size_t>(in * out)),
                                  ws.grad_b, batch, in, out, exec);
    const auto& a = ws.acts[ul];
    for (std::size_t k = 0; k < ws.grad_b.size(); ++k) ws.grad_b[k] *= 1.0 - a[k] * a[k];
    std::swap(ws.grad_a, ws.grad_b);
  }
}

std::vector<double> Mlp::predict(std::span<const double> x, int batch, Exec exec) const {
  Workspace ws;
  forward(x, batch, ws, exec);
  return std::move(ws.acts.back());
}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw UsageError("optimizer state size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
    const double mh = m_[i] / c1, vh = v_[i] / c2;
    params[i] -= cfg_.lr * (mh / (std::sqrt(vh) + cfg_.eps) + cfg_.weight_decay * params[i]);
  }
}

double clip_grad_norm(std::span<double> grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (double& g : grad) g *= s;
  }
  return norm;
}

double gaussian_log_prob(double a, double mean, double log_std) {
  const double z = (a - mean) * std::exp(-log_std);
  return -0.5 * z * z - log_std - 0.5 * std::log(2.0 * std::numbers::pi);
}

double gaussian_entropy(double log_std) { return log_std + 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e); }

double gaussian_kl(double mean_old, double log_std_old, double mean_new, double log_std_new) {
  const double var_old = std::exp(2.0 * log_std_old), var_new = std::exp(2.0 * log_std_new);
  const double d = mean_old - mean_new;
  return log_std_new - log_std_old + (var_old + d * d) / (2.0 * var_new) - 0.5;
}

}  // namespace ecodrive::nn
