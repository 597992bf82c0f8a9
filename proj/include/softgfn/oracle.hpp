#pragma once

#include <span>
#include <string>
#include <vector>

#include "softgfn/dag.hpp"
#include "softgfn/rng.hpp"
#include "softgfn/soft_mdp.hpp"

namespace softgfn {

/// lambda * log(sum_i exp(x_i / lambda)), max-shifted. -inf for an empty input.
double logsumexp(std::span<const double> xs, double lambda = 1.0);

/// Optimal soft values. V has one entry per DAG state plus the sink (last);
/// Q has one entry per DAG edge, aligned with DagView edge indices.
struct ValueTable {
  double lambda = 1.0;
  std::vector<double> V;
  std::vector<double> Q;
};

/// Markovian flow determined by terminal rewards and a fixed backward policy.
struct FlowTable {
  std::vector<double> state;  // F(s)
  std::vector<double> edge;   // F(s -> s'), per DAG edge
};

/// Forward policy stored per DAG edge; each non-terminal state's outgoing
/// edges form a probability row.
struct TabularPolicy {
  std::vector<double> probs;

  /// Row-wise softmax_lambda of per-edge logits.
  static TabularPolicy from_logits(const DagView& dag, std::span<const double> logits, double lambda = 1.0);
  static TabularPolicy uniform(const DagView& dag);
  /// Random policy with logits ~ scale * N(0, 1).
  static TabularPolicy random(const DagView& dag, CounterRng& rng, double scale = 1.5);
};

ValueTable solve_soft_bellman(const SoftMdp& mdp, const DagView& dag);
FlowTable compute_flows(const DagView& dag, const BackwardPolicy& pb);
TabularPolicy extract_policy(const DagView& dag, const ValueTable& vt, double lambda);

/// Regularized value of pi at every state (sink last), by reverse-topological sweep.
std::vector<double> policy_values(const SoftMdp& mdp, const DagView& dag, const TabularPolicy& pi);
/// V^pi(s0).
double policy_eval_exact(const SoftMdp& mdp, const DagView& dag, const TabularPolicy& pi);

/// Probability that a trajectory sampled from pi visits each state.
std::vector<double> state_occupancy(const DagView& dag, const TabularPolicy& pi);
/// d^pi(x), aligned with dag.terminals().
std::vector<double> terminal_distribution(const DagView& dag, const TabularPolicy& pi);

/// log P_B(tau) of the reward-weighted backward trajectory distribution.
double log_backward_trajectory_prob(const DagView& dag, const BackwardPolicy& pb, const IdTrajectory& tau,
                                    double log_z);
double log_forward_trajectory_prob(const DagView& dag, const TabularPolicy& pi, const IdTrajectory& tau);

struct ValueKlCheck {
  double lhs = 0.0;  // V^pi(s0)
  double rhs = 0.0;  // log Z - KL(q^pi || P_B)
  double kl = 0.0;
};

/// Value = log Z - KL identity, with the KL term computed by enumerating every trajectory.
ValueKlCheck check_prop_value_kl(const SoftMdp& mdp, const DagView& dag, const TabularPolicy& pi,
                                 std::uint64_t trajectory_cap = kDefaultTrajectoryCap);

struct PolicyGradIdentity {
  std::vector<double> value_grad;    // d V^pi(s0) / d logits, via the adjoint of the value recursion
  std::vector<double> half_tb_grad;  // 0.5 * E_tau[d L_TB / d logits], via trajectory enumeration
  double gap = 0.0;                  // max-norm of value_grad + half_tb_grad
};

/// Compares -grad V with the on-policy expected TB gradient for tabular softmax
/// logits (lambda = 1). `log_z` is the free TB normaliser.
PolicyGradIdentity check_tb_policygrad_identity(const SoftMdp& mdp, const DagView& dag,
                                                std::span<const double> logits, double log_z,
                                                std::uint64_t trajectory_cap = kDefaultTrajectoryCap);

/// Gradient of V^pi(s0) w.r.t. per-edge softmax logits (lambda = 1).
std::vector<double> value_gradient(const SoftMdp& mdp, const DagView& dag, std::span<const double> logits);

}  // namespace softgfn
