#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "softgfn/adam.hpp"
#include "softgfn/oracle.hpp"
#include "softgfn/qmodel.hpp"
#include "softgfn/replay.hpp"
#include "softgfn/rng.hpp"
#include "softgfn/rollout.hpp"
#include "softgfn/soft_mdp.hpp"

namespace softgfn {

struct MunchausenConfig {
  double alpha = 0.15;
  double l0 = -100.0;

  /// Entropy coefficient compensating the Munchausen penalty.
  double lambda() const { return 1.0 / (1.0 - alpha); }
  void validate() const;
};

enum class RegressionLoss { huber, mse };

struct SoftDqnConfig {
  std::size_t per_update = 16;  // trajectories sampled per iteration
  double epsilon = 0.0;
  std::size_t batch = 256;
  std::size_t target_period = 1;  // iterations between target updates
  double tau = 0.25;              // 1 = hard copy
  double lr = 1e-3;
  double terminal_loss_weight = 1.0;  // weight of transitions whose s' is terminal
  RegressionLoss loss = RegressionLoss::huber;
  /// Without replay each iteration regresses on exactly the transitions it just sampled.
  bool use_replay = true;
  PerConfig replay{};
  std::optional<MunchausenConfig> munchausen;
  /// Entropy coefficient when munchausen is off.
  double plain_lambda = 1.0;

  double lambda() const { return munchausen ? munchausen->lambda() : plain_lambda; }
  void validate() const;
};

/// Huber loss of the difference d = q - y (unit threshold) and its derivative in q.
double huber(double q, double y);
double huber_grad(double q, double y);

/// Splits trajectories into (s, a, s') transitions. Sink transitions are not
/// produced: the value of a terminal s' is fixed to log R(s') instead.
std::vector<Transition> to_transitions(const Environment& env, std::span<const Trajectory> trajectories);

/// y_k = r_k + (1 - d_k) V(s'_k) [+ alpha * max(lambda log pi(a_k | s_k), l0)], where
/// r_k = d_k log R_k + (1 - d_k) log P_B(s_k | s'_k) and V(s') = log R(s') for
/// terminal s', logsumexp_lambda Q_target(s', .) otherwise. Throws TrainingError
/// on a non-finite target.
std::vector<double> td_targets(const SoftMdp& mdp, std::span<const Transition* const> batch, const QModel& target,
                               double lambda, const std::optional<MunchausenConfig>& munchausen);

/// Exact tabular sweep: every DAG edge's Q is replaced by its TD target
/// computed against a frozen copy of the table. Returns max |Q_new - Q_old|.
double tabular_sweep(const SoftMdp& mdp, const DagView& dag, TabularQModel& q, double lambda,
                     const std::optional<MunchausenConfig>& munchausen = std::nullopt);

ScoreFn q_scores(const Environment& env, const QModel& q);

struct StepStats {
  double loss = 0.0;
  double mean_target = 0.0;
  double max_abs_td = 0.0;
};

/// Soft DQN / Munchausen DQN learner of a single run.
class SoftDqnAgent {
 public:
  SoftDqnAgent(const SoftMdp& mdp, SoftDqnConfig cfg, std::unique_ptr<QModel> online, std::uint64_t seed);

  const SoftDqnConfig& config() const { return cfg_; }
  double lambda() const { return cfg_.lambda(); }

  /// One iteration: sample trajectories, store them, one gradient step when
  /// enough transitions are available, target update on schedule. Returns
  /// the sampled trajectories.
  std::vector<Trajectory> iterate(StepStats* stats = nullptr);

  std::vector<Trajectory> sample(std::size_t count, double epsilon);
  /// Gradient step on a given batch with importance weights.
  StepStats train_on(std::span<const Transition* const> batch, std::span<const double> weights,
                     std::vector<double>* per_item_loss = nullptr);
  void update_target();

  QModel& online() { return *online_; }
  const QModel& online() const { return *online_; }
  const QModel& target() const { return *target_; }
  const PerBuffer& buffer() const { return buffer_; }
  std::uint64_t iterations() const { return iterations_; }
  ScoreFn scores() const { return q_scores(*mdp_.env, *online_); }

 private:
  SoftMdp mdp_;
  SoftDqnConfig cfg_;
  std::unique_ptr<QModel> online_;
  std::unique_ptr<QModel> target_;
  Adam adam_;
  PerBuffer buffer_;
  CounterRng rollout_rng_;
  CounterRng replay_rng_;
  std::uint64_t iterations_ = 0;
  Matrix q_, grad_q_;
  std::vector<std::uint8_t> masks_;
};

}  // namespace softgfn
