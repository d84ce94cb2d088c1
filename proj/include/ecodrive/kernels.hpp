#pragma once

#include <span>

namespace ecodrive::kernels {

enum class Exec { serial, parallel };

// Row-major layouts throughout: X is batch x in, W is out x in, Y is batch x out.

/// Y = X W^T + b
void dense_forward(std::span<const double> x, std::span<const double> w, std::span<const double> b, std::span<double> y,
                   int batch, int in, int out, Exec exec = Exec::parallel);

/// dX = dY W
void dense_backward_input(std::span<const double> dy, std::span<const double> w, std::span<double> dx, int batch, int in,
                          int out, Exec exec = Exec::parallel);

/// dW += dY^T X, db += column sums of dY
void dense_backward_params(std::span<const double> dy, std::span<const double> x, std::span<double> dw,
                           std::span<double> db, int batch, int in, int out, Exec exec = Exec::parallel);

/// In place tanh.
void tanh_inplace(std::span<double> y, Exec exec = Exec::parallel);

}  // namespace ecodrive::kernels
