#include "softgfn/kernels.hpp"

#include <algorithm>
#include <cstddef>

namespace softgfn::kernels {

namespace {

void check_forward(ConstMatrixView X, ConstMatrixView Wt, std::span<const double> bias, MatrixView Y) {
  if (X.cols != Wt.rows || Y.rows != X.rows || Y.cols != Wt.cols || bias.size() != Wt.cols)
    throw std::invalid_argument("dense_forward: shape mismatch");
}

void check_params(ConstMatrixView X, ConstMatrixView dY, MatrixView dWt, std::span<double> dbias) {
  if (X.rows != dY.rows || dWt.rows != X.cols || dWt.cols != dY.cols || dbias.size() != dY.cols)
    throw std::invalid_argument("dense_backward_params: shape mismatch");
}

void check_input(ConstMatrixView dY, ConstMatrixView Wt, MatrixView dX) {
  if (dY.cols != Wt.cols || dX.rows != dY.rows || dX.cols != Wt.rows)
    throw std::invalid_argument("dense_backward_input: shape mismatch");
}

// Below this many multiply-adds the thread fork costs more than it saves.
constexpr std::size_t kParallelWork = std::size_t{1} << 16;
constexpr std::size_t kBlock = 4;
constexpr std::size_t kTile = 16;

}  // namespace

// ------------------------------------------------------------------ serial

void serial::dense_forward(ConstMatrixView X, ConstMatrixView Wt, std::span<const double> bias, MatrixView Y) {
  check_forward(X, Wt, bias, Y);
  for (std::size_t b = 0; b < X.rows; ++b)
    for (std::size_t o = 0; o < Wt.cols; ++o) {
      double acc = bias[o];
      for (std::size_t i = 0; i < X.cols; ++i) acc += X(b, i) * Wt(i, o);
      Y(b, o) = acc;
    }
}

void serial::dense_backward_params(ConstMatrixView X, ConstMatrixView dY, MatrixView dWt, std::span<double> dbias) {
  check_params(X, dY, dWt, dbias);
  for (std::size_t i = 0; i < X.cols; ++i)
    for (std::size_t o = 0; o < dY.cols; ++o) {
      double acc = 0.0;
      for (std::size_t b = 0; b < X.rows; ++b) acc += X(b, i) * dY(b, o);
      dWt(i, o) += acc;
    }
  for (std::size_t o = 0; o < dY.cols; ++o) {
    double acc = 0.0;
    for (std::size_t b = 0; b < dY.rows; ++b) acc += dY(b, o);
    dbias[o] += acc;
  }
}

void serial::dense_backward_input(ConstMatrixView dY, ConstMatrixView Wt, MatrixView dX) {
  check_input(dY, Wt, dX);
  for (std::size_t b = 0; b < dY.rows; ++b)
    for (std::size_t i = 0; i < Wt.rows; ++i) {
      double acc = 0.0;
      for (std::size_t o = 0; o < Wt.cols; ++o) acc += dY(b, o) * Wt(i, o);
      dX(b, i) = acc;
    }
}

// ------------------------------------------------------------------ parallel

void parallel::dense_forward(ConstMatrixView X, ConstMatrixView Wt, std::span<const double> bias, MatrixView Y) {
  check_forward(X, Wt, bias, Y);
  const std::size_t B = X.rows, in = X.cols, out = Wt.cols;
  const std::ptrdiff_t blocks = static_cast<std::ptrdiff_t>((B + kBlock - 1) / kBlock);
  const std::size_t out_tiled = out - out % kTile;
  // Register tiles of kBlock rows x kTile outputs; zero inputs (one-hot
  // encodings) are skipped.
#pragma omp parallel for schedule(static) if (B * in * out > kParallelWork)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t b0 = static_cast<std::size_t>(blk) * kBlock;
    const std::size_t nb = std::min(kBlock, B - b0);
    if (nb == kBlock) {
      for (std::size_t o0 = 0; o0 < out_tiled; o0 += kTile) {
        double acc[kBlock][kTile];
        for (std::size_t r = 0; r < kBlock; ++r)
#pragma omp simd
          for (std::size_t j = 0; j < kTile; ++j) acc[r][j] = bias[o0 + j];
        for (std::size_t i = 0; i < in; ++i) {
          const double x0 = X(b0, i), x1 = X(b0 + 1, i), x2 = X(b0 + 2, i), x3 = X(b0 + 3, i);
          if (x0 == 0.0 && x1 == 0.0 && x2 == 0.0 && x3 == 0.0) continue;
          const double* w = &Wt(i, o0);
#pragma omp simd
          for (std::size_t j = 0; j < kTile; ++j) {
            acc[0][j] += x0 * w[j];
            acc[1][j] += x1 * w[j];
            acc[2][j] += x2 * w[j];
            acc[3][j] += x3 * w[j];
          }
        }
        for (std::size_t r = 0; r < kBlock; ++r)
#pragma omp simd
          for (std::size_t j = 0; j < kTile; ++j) Y(b0 + r, o0 + j) = acc[r][j];
      }
    }
    const std::size_t o_begin = nb == kBlock ? out_tiled : 0;
    if (o_begin == out) continue;
    for (std::size_t r = 0; r < nb; ++r) {
      double* y = &Y(b0 + r, 0);
      for (std::size_t o = o_begin; o < out; ++o) y[o] = bias[o];
      for (std::size_t i = 0; i < in; ++i) {
        const double x = X(b0 + r, i);
        if (x == 0.0) continue;
        const double* w = &Wt(i, 0);
#pragma omp simd
        for (std::size_t o = o_begin; o < out; ++o) y[o] += x * w[o];
      }
    }
  }
}

void parallel::dense_backward_params(ConstMatrixView X, ConstMatrixView dY, MatrixView dWt,
                                     std::span<double> dbias) {
  check_params(X, dY, dWt, dbias);
  const std::size_t B = X.rows, in = X.cols, out = dY.cols;
  const std::ptrdiff_t blocks = static_cast<std::ptrdiff_t>((in + kBlock - 1) / kBlock);
  const std::size_t out_tiled = out - out % kTile;
  // Threads own disjoint rows of dWt, so accumulation order is fixed.
#pragma omp parallel for schedule(static) if (B * in * out > kParallelWork)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t i0 = static_cast<std::size_t>(blk) * kBlock;
    const std::size_t ni = std::min(kBlock, in - i0);
    if (ni == kBlock) {
      for (std::size_t o0 = 0; o0 < out_tiled; o0 += kTile) {
        double acc[kBlock][kTile] = {};
        for (std::size_t b = 0; b < B; ++b) {
          const double x0 = X(b, i0), x1 = X(b, i0 + 1), x2 = X(b, i0 + 2), x3 = X(b, i0 + 3);
          if (x0 == 0.0 && x1 == 0.0 && x2 == 0.0 && x3 == 0.0) continue;
          const double* d = &dY(b, o0);
#pragma omp simd
          for (std::size_t j = 0; j < kTile; ++j) {
            acc[0][j] += x0 * d[j];
            acc[1][j] += x1 * d[j];
            acc[2][j] += x2 * d[j];
            acc[3][j] += x3 * d[j];
          }
        }
        for (std::size_t r = 0; r < kBlock; ++r)
#pragma omp simd
          for (std::size_t j = 0; j < kTile; ++j) dWt(i0 + r, o0 + j) += acc[r][j];
      }
    }
    const std::size_t o_begin = ni == kBlock ? out_tiled : 0;
    if (o_begin == out) continue;
    for (std::size_t r = 0; r < ni; ++r) {
      double* g = &dWt(i0 + r, 0);
      for (std::size_t b = 0; b < B; ++b) {
        const double x = X(b, i0 + r);
        if (x == 0.0) continue;
        const double* d = &dY(b, 0);
#pragma omp simd
        for (std::size_t o = o_begin; o < out; ++o) g[o] += x * d[o];
      }
    }
  }
  double* db = dbias.data();
  for (std::size_t b = 0; b < B; ++b) {
    const double* d = &dY(b, 0);
#pragma omp simd
    for (std::size_t o = 0; o < out; ++o) db[o] += d[o];
  }
}

void parallel::dense_backward_input(ConstMatrixView dY, ConstMatrixView Wt, MatrixView dX) {
  check_input(dY, Wt, dX);
  const std::size_t B = dY.rows, in = Wt.rows, out = Wt.cols;
  const std::ptrdiff_t blocks = static_cast<std::ptrdiff_t>((B + kBlock - 1) / kBlock);
#pragma omp parallel for schedule(static) if (B * in * out > kParallelWork)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t b0 = static_cast<std::size_t>(blk) * kBlock;
    const std::size_t nb = std::min(kBlock, B - b0);
    if (nb == kBlock) {
      const double* d0 = &dY(b0, 0);
      const double* d1 = &dY(b0 + 1, 0);
      const double* d2 = &dY(b0 + 2, 0);
      const double* d3 = &dY(b0 + 3, 0);
      for (std::size_t i = 0; i < in; ++i) {
        const double* w = &Wt(i, 0);
        double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
#pragma omp simd reduction(+ : a0, a1, a2, a3)
        for (std::size_t o = 0; o < out; ++o) {
          a0 += d0[o] * w[o];
          a1 += d1[o] * w[o];
          a2 += d2[o] * w[o];
          a3 += d3[o] * w[o];
        }
        dX(b0, i) = a0;
        dX(b0 + 1, i) = a1;
        dX(b0 + 2, i) = a2;
        dX(b0 + 3, i) = a3;
      }
    } else {
      for (std::size_t r = 0; r < nb; ++r) {
        const double* d = &dY(b0 + r, 0);
        for (std::size_t i = 0; i < in; ++i) {
          const double* w = &Wt(i, 0);
          double acc = 0.0;
#pragma omp simd reduction(+ : acc)
          for (std::size_t o = 0; o < out; ++o) acc += d[o] * w[o];
          dX(b0 + r, i) = acc;
        }
      }
    }
  }
}

// ------------------------------------------------------------------ dispatch

void dense_forward(Backend be, ConstMatrixView X, ConstMatrixView Wt, std::span<const double> bias, MatrixView Y) {
  be == Backend::serial ? serial::dense_forward(X, Wt, bias, Y) : parallel::dense_forward(X, Wt, bias, Y);
}

void dense_backward_params(Backend be, ConstMatrixView X, ConstMatrixView dY, MatrixView dWt,
                           std::span<double> dbias) {
  be == Backend::serial ? serial::dense_backward_params(X, dY, dWt, dbias)
                        : parallel::dense_backward_params(X, dY, dWt, dbias);
}

void dense_backward_input(Backend be, ConstMatrixView dY, ConstMatrixView Wt, MatrixView dX) {
  be == Backend::serial ? serial::dense_backward_input(dY, Wt, dX) : parallel::dense_backward_input(dY, Wt, dX);
}

}  // namespace softgfn::kernels
