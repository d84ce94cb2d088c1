#include "ecodrive/kernels.hpp"

#include <cmath>
#include <cstddef>

namespace ecodrive::kernels {

namespace {

// Each output element is accumulated in the same order in both paths, so results are bit-identical.

inline void forward_row(const double* x, const double* w, const double* b, double* y, int in, int out) {
  for (int o = 0; o < out; ++o) {
    const double* wr = w + static_cast<std::ptrdiff_t>(o) * in;
    double acc = b[o];
    for (int i = 0; i < in; ++i) acc += x[i] * wr[i];
    y[o] = acc;
  }
}

inline void backward_input_row(const double* dy, const double* w, double* dx, int in, int out) {
  for (int i = 0; i < in; ++i) dx[i] = 0.0;
  for (int o = 0; o < out; ++o) {
    const double g = dy[o];
    const double* wr = w + static_cast<std::ptrdiff_t>(o) * in;
    for (int i = 0; i < in; ++i) dx[i] += g * wr[i];
  }
}

inline void backward_params_row(const double* dy, const double* x, double* dw, double* db, int o, int batch, int in,
                                int out) {
  double* wr = dw + static_cast<std::ptrdiff_t>(o) * in;
  double bsum = 0.0;
  for (int n = 0; n < batch; ++n) {
    const double g = dy[static_cast<std::ptrdiff_t>(n) * out + o];
    if (g == 0.0) continue;
    bsum += g;
    const double* xr = x + static_cast<std::ptrdiff_t>(n) * in;
    for (int i = 0; i < in; ++i) wr[i] += g * xr[i];
  }
  db[o] += bsum;
}

}  // namespace

void dense_forward(std::span<const double> x, std::span<const double> w, std::span<const double> b, std::span<double> y,
                   int batch, int in, int out, Exec exec) {
  if (exec == Exec::serial) {
    for (int n = 0; n < batch; ++n)
      forward_row(x.data() + static_cast<std::ptrdiff_t>(n) * in, w.data(), b.data(),
                  y.data() + static_cast<std::ptrdiff_t>(n) * out, in, out);
    return;
  }
#pragma omp parallel for schedule(static) if (batch * in * out > 20000)
  for (int n = 0; n < batch; ++n)
    forward_row(x.data() + static_cast<std::ptrdiff_t>(n) * in, w.data(), b.data(),
                y.data() + static_cast<std::ptrdiff_t>(n) * out, in, out);
}

void dense_backward_input(std::span<const double> dy, std::span<const double> w, std::span<double> dx, int batch, int in,
                          int out, Exec exec) {
  if (exec == Exec::serial) {
    for (int n = 0; n < batch; ++n)
      backward_input_row(dy.data() + static_cast<std::ptrdiff_t>(n) * out, w.data(),
                         dx.data() + static_cast<std::ptrdiff_t>(n) * in, in, out);
    return;
  }
#pragma omp parallel for schedule(static) if (batch * in * out > 20000)
  for (int n = 0; n < batch; ++n)
    backward_input_row(dy.data() + static_cast<std::ptrdiff_t>(n) * out, w.data(),
                       dx.data() + static_cast<std::ptrdiff_t>(n) * in, in, out);
}

void dense_backward_params(std::span<const double> dy, std::span<const double> x, std::span<double> dw,
                           std::span<double> db, int batch, int in, int out, Exec exec) {
  if (exec == Exec::serial) {
    for (int o = 0; o < out; ++o) backward_params_row(dy.data(), x.data(), dw.data(), db.data(), o, batch, in, out);
    return;
  }
#pragma omp parallel for schedule(static) if (batch * in * out > 20000)
  for (int o = 0; o < out; ++o) backward_params_row(dy.data(), x.data(), dw.data(), db.data(), o, batch, in, out);
}

void tanh_inplace(std::span<double> y, Exec exec) {
  const auto n = static_cast<std::ptrdiff_t>(y.size());
  if (exec == Exec::serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = std::tanh(y[static_cast<std::size_t>(i)]);
    return;
  }
#pragma omp parallel for schedule(static) if (n > 20000)
  for (std::ptrdiff_t i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = std::tanh(y[static_cast<std::size_t>(i)]);
}

}  // namespace ecodrive::kernels
