#include "softgfn/soft_mdp.hpp"

#include <algorithm>
#include <cmath>

namespace softgfn {

double BackwardPolicy::log_prob_unchecked(const Environment& env, const State& s_next) const {
  return -std::log(static_cast<double>(env.num_parents(s_next)));
}

double BackwardPolicy::log_prob_unchecked(const DagView& dag, StateId s_next) const {
  return -std::log(static_cast<double>(dag.num_parents(s_next)));
}

double BackwardPolicy::prob_unchecked(const DagView& dag, StateId s_next) const {
  return 1.0 / static_cast<double>(dag.num_parents(s_next));
}

namespace {

bool is_edge(const Environment& env, const State& s, const State& s_next) {
  if (s.terminal() || s.sink() || s_next.sink()) return false;
  const auto ps = env.parents(s_next);
  return std::any_of(ps.begin(), ps.end(), [&](const Parent& p) { return p.state == s; });
}

}  // namespace

double uniform_pb(const Environment& env, const State& s, const State& s_next) {
  if (!is_edge(env, s, s_next))
    throw std::domain_error("uniform_pb: " + env.to_string(s) + " is not a parent of " + env.to_string(s_next));
  return 1.0 / static_cast<double>(env.num_parents(s_next));
}

double uniform_pb(const Environment& env, StateId s, StateId s_next) {
  return uniform_pb(env, env.state_at(s), env.state_at(s_next));
}

double mdp_reward(const SoftMdp& mdp, const State& s, const State& s_next) {
  const Environment& env = *mdp.env;
  if (s.sink()) {
    if (!s_next.sink()) throw std::domain_error("mdp_reward: sink only loops to itself");
    return 0.0;
  }
  if (s.terminal()) {
    if (!s_next.sink()) throw std::domain_error("mdp_reward: terminal state only leads to the sink");
    return std::log(env.reward(s));
  }
  if (!is_edge(env, s, s_next))
    throw std::domain_error("mdp_reward: (" + env.to_string(s) + ", " +
                            (s_next.sink() ? std::string("sink") : env.to_string(s_next)) + ") is not an edge");
  return mdp.pb.log_prob_unchecked(env, s_next);
}

double mdp_reward(const SoftMdp& mdp, const DagView& dag, StateId s, StateId s_next) {
  const StateId sink = dag.sink();
  if (s == sink) {
    if (s_next != sink) throw std::domain_error("mdp_reward: sink only loops to itself");
    return 0.0;
  }
  if (s.value > sink.value || s_next.value > sink.value) throw std::domain_error("mdp_reward: invalid StateId");
  if (dag.is_terminal(s)) {
    if (s_next != sink) throw std::domain_error("mdp_reward: terminal state only leads to the sink");
    return std::log(dag.reward(s));
  }
  if (s_next == sink || dag.find_edge(s, s_next) == DagView::npos)
    throw std::domain_error("mdp_reward: not an edge");
  return mdp.pb.log_prob_unchecked(dag, s_next);
}

}  // namespace softgfn
