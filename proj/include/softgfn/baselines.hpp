#pragma once

#include <span>
#include <vector>

#include "softgfn/adam.hpp"
#include "softgfn/mlp.hpp"
#include "softgfn/rng.hpp"
#include "softgfn/rollout.hpp"
#include "softgfn/soft_mdp.hpp"

namespace softgfn {

/// log Z + sum log P_F - log R(x) - sum log P_B along a complete trajectory.
/// log_pf[t] is log P_F(s_{t+1} | s_t). Throws std::domain_error if a step has
/// zero forward probability.
double tb_residual(const SoftMdp& mdp, const Trajectory& tau, std::span<const double> log_pf, double log_z);

/// log F(s) + log P_F(s'|s) - log F(s') - log P_B(s|s'), with log F(s') replaced
/// by log R(s') when s' is terminal (log_f_next is then ignored).
double db_residual(const SoftMdp& mdp, const State& s, const State& s_next, double log_f, double log_pf,
                   double log_f_next);

enum class BaselineKind { tb, db };

struct BaselineConfig {
  BaselineKind kind = BaselineKind::tb;
  std::size_t per_update = 16;
  double lr = 1e-3;
  double logz_lr = 0.1;
  double epsilon = 0.0;

  void validate() const;
};

struct BaselineStats {
  double loss = 0.0;
  double log_z = 0.0;
};

/// On-policy TB / DB trainer with a fixed uniform backward policy. The network
/// outputs forward-policy logits per action; for DB an extra leading unit is
/// the state log-flow.
class GfnAgent {
 public:
  GfnAgent(const SoftMdp& mdp, BaselineConfig cfg, MlpSpec hidden, std::uint64_t seed,
           kernels::Backend backend = kernels::Backend::parallel);

  const BaselineConfig& config() const { return cfg_; }
  std::vector<Trajectory> iterate(BaselineStats* stats = nullptr);
  /// Mean loss over the given trajectories plus one gradient step.
  BaselineStats train_on(std::span<const Trajectory> trajectories);
  /// Loss of one trajectory under the current parameters (no update).
  double trajectory_loss(const Trajectory& tau) const;

  double log_z() const { return log_z_; }
  void set_log_z(double v) { log_z_ = v; }
  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }
  ScoreFn scores() const;

 private:
  std::size_t logit_offset() const { return cfg_.kind == BaselineKind::db ? 1 : 0; }

  SoftMdp mdp_;
  BaselineConfig cfg_;
  Mlp net_;
  double log_z_ = 0.0;
  Adam adam_;
  Adam adam_z_;
  CounterRng rollout_rng_;
};

}  // namespace softgfn
