#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace softgfn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction over one parameter group.
class Adam {
 public:
  Adam(std::size_t num_params, AdamConfig cfg);

  /// Throws TrainingError if any gradient is non-finite (params are left untouched).
  void step(std::span<double> params, std::span<const double> grads);

  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }
  std::uint64_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t t_ = 0;
};

/// target := (1 - tau) * target + tau * online; a hard copy when tau == 1.
void polyak_update(std::span<double> target, std::span<const double> online, double tau);

}  // namespace softgfn
