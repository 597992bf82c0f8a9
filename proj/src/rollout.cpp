#include "softgfn/rollout.hpp"

#include <cmath>

#include "softgfn/qmodel.hpp"

namespace softgfn {

std::vector<Trajectory> rollout(const Environment& env, std::size_t count, double lambda, double epsilon,
                                const ScoreFn& scores, CounterRng& rng) {
  const std::size_t A = env.max_actions();
  std::vector<Trajectory> out(count);
  std::vector<std::size_t> active(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i].states.push_back(env.initial_state());
    active[i] = i;
  }
  std::vector<State> batch;
  std::vector<std::uint8_t> masks;
  std::vector<double> weights(A), logp(A);
  Matrix q;
  while (!active.empty()) {
    batch.clear();
    for (auto i : active) batch.push_back(out[i].states.back());
    masks = action_masks(env, batch);
    scores(batch, masks, q);
    std::vector<std::size_t> still;
    for (std::size_t b = 0; b < active.size(); ++b) {
      const auto m = std::span<const std::uint8_t>(masks).subspan(b * A, A);
      std::size_t a;
      if (epsilon > 0.0 && rng.uniform() < epsilon) {
        for (std::size_t k = 0; k < A; ++k) weights[k] = m[k] ? 1.0 : 0.0;
        a = rng.categorical(weights);
      } else {
        masked_log_softmax(q.row(b), m, lambda, logp);
        for (std::size_t k = 0; k < A; ++k) weights[k] = m[k] ? std::exp(logp[k]) : 0.0;
        a = rng.categorical(weights);
      }
      auto& tr = out[active[b]];
      const ActionId act{static_cast<std::uint32_t>(a)};
      tr.states.push_back(env.step(batch[b], act));
      tr.actions.push_back(act);
      if (!tr.states.back().terminal()) still.push_back(active[b]);
    }
    active = std::move(still);
  }
  return out;
}

TabularPolicy policy_rows(const DagView& dag, double lambda, const ScoreFn& scores, std::size_t batch) {
  const Environment& env = dag.env();
  const std::size_t A = env.max_actions();
  TabularPolicy pi;
  pi.probs.assign(dag.num_edges(), 0.0);
  std::vector<StateId> ids;
  std::vector<State> states;
  std::vector<double> logp(A);
  Matrix q;
  auto flush = [&] {
    if (ids.empty()) return;
    const auto masks = action_masks(env, states);
    scores(states, masks, q);
    for (std::size_t b = 0; b < ids.size(); ++b) {
      masked_log_softmax(q.row(b), std::span<const std::uint8_t>(masks).subspan(b * A, A), lambda, logp);
      for (auto e = dag.edge_begin(ids[b]); e < dag.edge_end(ids[b]); ++e)
        pi.probs[e] = std::exp(logp[dag.edge_action(e).value]);
    }
    ids.clear();
    states.clear();
  };
  for (std::size_t i = 0; i < dag.num_states(); ++i) {
    const StateId s{i};
    if (dag.edge_begin(s) == dag.edge_end(s)) continue;
    ids.push_back(s);
    states.push_back(env.state_at(s));
    if (ids.size() == batch) flush();
  }
  flush();
  return pi;
}

}  // namespace softgfn
