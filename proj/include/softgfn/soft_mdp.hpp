#pragma once

#include "softgfn/dag.hpp"

namespace softgfn {

/// Fixed backward policy. Only the uniform kind ships; P_B(s | s') = 1/|parents(s')|.
struct BackwardPolicy {
  enum class Kind { uniform };
  Kind kind = Kind::uniform;

  /// log P_B(s | s_next) without checking that the edge exists.
  double log_prob_unchecked(const Environment& env, const State& s_next) const;
  double log_prob_unchecked(const DagView& dag, StateId s_next) const;
  double prob_unchecked(const DagView& dag, StateId s_next) const;
};

/// Probability of choosing parent s of s_next under the uniform backward policy.
double uniform_pb(const Environment& env, const State& s, const State& s_next);
double uniform_pb(const Environment& env, StateId s, StateId s_next);

/// Entropy-regularized MDP over a GFlowNet DAG: an absorbing sink s_f is
/// appended, every terminal x gets a single action x -> s_f, gamma = 1, and
/// r(s, s') = log P_B(s | s') on DAG edges, log R(x) on x -> s_f, 0 on s_f -> s_f.
struct SoftMdp {
  const Environment* env = nullptr;
  BackwardPolicy pb;
  double lambda = 1.0;

  SoftMdp(const Environment& e, double lam = 1.0, BackwardPolicy p = {}) : env(&e), pb(p), lambda(lam) {}
};

/// Reward of the extended-graph edge (s, s_next). Throws std::domain_error on a non-edge.
double mdp_reward(const SoftMdp& mdp, const State& s, const State& s_next);
double mdp_reward(const SoftMdp& mdp, const DagView& dag, StateId s, StateId s_next);

}  // namespace softgfn
