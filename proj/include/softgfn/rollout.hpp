#pragma once

#include <functional>
#include <span>
#include <vector>

#include "softgfn/dag.hpp"
#include "softgfn/matrix.hpp"
#include "softgfn/oracle.hpp"
#include "softgfn/rng.hpp"

namespace softgfn {

/// Fills one row of per-action scores per state; invalid actions are ignored.
/// The policy is softmax(scores / lambda) over valid actions.
using ScoreFn = std::function<void(std::span<const State>, std::span<const std::uint8_t>, Matrix&)>;

/// Samples `count` complete trajectories in lockstep (one batched score call
/// per step). With probability epsilon an action is drawn uniformly from the
/// valid ones instead. Trajectories stop at the first terminal state.
std::vector<Trajectory> rollout(const Environment& env, std::size_t count, double lambda, double epsilon,
                                const ScoreFn& scores, CounterRng& rng);

/// Exact per-edge forward probabilities of softmax(scores / lambda) on an enumerated DAG.
TabularPolicy policy_rows(const DagView& dag, double lambda, const ScoreFn& scores, std::size_t batch = 4096);

}  // namespace softgfn
