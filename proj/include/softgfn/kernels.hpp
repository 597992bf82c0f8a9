#pragma once

#include <span>

#include "softgfn/matrix.hpp"

// Dense-layer kernels. Weights are stored transposed, Wt[in][out], so that the
// forward pass and the weight gradient are row-wise axpy updates.
//
// `serial` is the plain reference used by the tests; `parallel` is the
// OpenMP version (thread-parallel over independent rows, simd inner loops)
// used in training. Both produce the same values up to summation order.

namespace softgfn::kernels {

enum class Backend { serial, parallel };

namespace serial {
/// Y = X * Wt + bias
void dense_forward(ConstMatrixView X, ConstMatrixView Wt, std::span<const double> bias, MatrixView Y);
/// dWt += X^T * dY, dbias += column sums of dY
void dense_backward_params(ConstMatrixView X, ConstMatrixView dY, MatrixView dWt, std::span<double> dbias);
/// dX = dY * Wt^T
void dense_backward_input(ConstMatrixView dY, ConstMatrixView Wt, MatrixView dX);
}  // namespace serial

namespace parallel {
void dense_forward(ConstMatrixView X, ConstMatrixView Wt, std::span<const double> bias, MatrixView Y);
void dense_backward_params(ConstMatrixView X, ConstMatrixView dY, MatrixView dWt, std::span<double> dbias);
void dense_backward_input(ConstMatrixView dY, ConstMatrixView Wt, MatrixView dX);
}  // namespace parallel

void dense_forward(Backend b, ConstMatrixView X, ConstMatrixView Wt, std::span<const double> bias, MatrixView Y);
void dense_backward_params(Backend b, ConstMatrixView X, ConstMatrixView dY, MatrixView dWt, std::span<double> dbias);
void dense_backward_input(Backend b, ConstMatrixView dY, ConstMatrixView Wt, MatrixView dX);

}  // namespace softgfn::kernels
