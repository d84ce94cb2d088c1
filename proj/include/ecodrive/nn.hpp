#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ecodrive/kernels.hpp"

namespace ecodrive::nn {

using kernels::Exec;

/// Activations kept from a forward pass, needed by backward.
struct Workspace {
  int batch = 0;
  std::vector<std::vector<double>> acts;  ///< acts[0] is the input, acts.back() the output
  std::vector<double> grad_a, grad_b;     ///< scratch
};

/// Fully connected network with tanh hidden layers and a linear output layer.
/// Parameters live in one flat vector: per layer W (out x in, row-major) then b.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<int> sizes);

  const std::vector<int>& sizes() const { return sizes_; }
  int inputs() const { return sizes_.front(); }
  int outputs() const { return sizes_.back(); }
  int layer_count() const { return static_cast<int>(sizes_.size()) - 1; }
  std::size_t param_count() const { return params_.size(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::size_t weight_offset(int layer) const { return offsets_.at(static_cast<std::size_t>(layer)); }
  std::size_t bias_offset(int layer) const;

  /// Orthogonal weights scaled by `hidden_gain` (hidden layers) or `output_gain`; zero biases.
  void init_orthogonal(std::uint64_t seed, double hidden_gain, double output_gain);

  void forward(std::span<const double> x, int batch, Workspace& ws, Exec exec = Exec::parallel) const;
  /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
  void backward(Workspace& ws, std::span<const double> grad_out, std::span<double> grad,
                Exec exec = Exec::parallel) const;
  std::vector<double> predict(std::span<const double> x, int batch, Exec exec = Exec::parallel) const;

  bool operator==(const Mlp&) const = default;

 private:
  std::vector<int> sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  ///< decoupled, applied as p -= lr * wd * p
};

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, AdamConfig cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}
  void step(std::span<double> params, std::span<const double> grad);
  AdamConfig& config() { return cfg_; }
  long steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

/// Clips the gradient to a maximum L2 norm; returns the norm before clipping.
double clip_grad_norm(std::span<double> grad, double max_norm);

// Diagonal Gaussian helpers (one action dimension).
double gaussian_log_prob(double a, double mean, double log_std);
double gaussian_entropy(double log_std);
/// KL(old || new) between 1-D Gaussians.
double gaussian_kl(double mean_old, double log_std_old, double mean_new, double log_std_new);

}  // namespace ecodrive::nn
