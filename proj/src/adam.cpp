#include "softgfn/adam.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "softgfn/dag.hpp"

namespace softgfn {

Adam::Adam(std::size_t num_params, AdamConfig cfg) : cfg_(cfg), m_(num_params, 0.0), v_(num_params, 0.0) {
  if (!(cfg_.lr > 0.0)) throw std::invalid_argument("Adam: learning rate must be positive");
}

void Adam::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) throw std::invalid_argument("Adam: shape mismatch");
  for (double g : grads)
    if (!std::isfinite(g)) throw TrainingError("Adam: non-finite gradient");
  ++t_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = cfg_.lr, eps = cfg_.eps;
  double* m = m_.data();
  double* v = v_.data();
  double* p = params.data();
  const double* g = grads.data();
  const std::size_t n = m_.size();
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
  }
}

void polyak_update(std::span<double> target, std::span<const double> online, double tau) {
  if (target.size() != online.size()) throw std::invalid_argument("polyak_update: shape mismatch");
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("polyak_update: tau must be in (0, 1]");
  if (tau == 1.0) {
    std::copy(online.begin(), online.end(), target.begin());
    return;
  }
  for (std::size_t i = 0; i < target.size(); ++i) target[i] = (1.0 - tau) * target[i] + tau * online[i];
}

}  // namespace softgfn
