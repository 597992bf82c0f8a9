#include "softgfn/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ranges>

namespace softgfn {

double logsumexp(std::span<const double> xs, double lambda) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double x : xs) acc += std::exp((x - m) / lambda);
  return m + lambda * std::log(acc);
}

TabularPolicy TabularPolicy::from_logits(const DagView& dag, std::span<const double> logits, double lambda) {
  if (logits.size() != dag.num_edges()) throw std::invalid_argument("from_logits: one logit per edge expected");
  TabularPolicy pi;
  pi.probs.assign(dag.num_edges(), 0.0);
  for (std::size_t i = 0; i < dag.num_states(); ++i) {
    const StateId s{i};
    const auto b = dag.edge_begin(s), e = dag.edge_end(s);
    if (b == e) continue;
    const double lse = logsumexp(logits.subspan(b, e - b), lambda);
    for (auto k = b; k < e; ++k) pi.probs[k] = std::exp((logits[k] - lse) / lambda);
  }
  return pi;
}

TabularPolicy TabularPolicy::uniform(const DagView& dag) {
  std::vector<double> zeros(dag.num_edges(), 0.0);
  return from_logits(dag, zeros);
}

TabularPolicy TabularPolicy::random(const DagView& dag, CounterRng& rng, double scale) {
  std::vector<double> logits(dag.num_edges());
  for (auto& l : logits) l = scale * rng.normal();
  return from_logits(dag, logits);
}

ValueTable solve_soft_bellman(const SoftMdp& mdp, const DagView& dag) {
  ValueTable vt;
  vt.lambda = mdp.lambda;
  vt.V.assign(dag.num_states() + 1, 0.0);
  vt.Q.assign(dag.num_edges(), 0.0);
  for (StateId s : std::views::reverse(dag.topo())) {
    if (dag.is_terminal(s)) {
      // single action x -> s_f: Q = log R(x) + V(s_f), V(s_f) = 0
      vt.V[s.value] = mdp_reward(mdp, dag, s, dag.sink()) + vt.V[dag.sink().value];
      continue;
    }
    const auto b = dag.edge_begin(s), e = dag.edge_end(s);
    for (auto k = b; k < e; ++k) {
      const StateId t = dag.edge_target(k);
      vt.Q[k] = mdp.pb.log_prob_unchecked(dag, t) + vt.V[t.value];
    }
    vt.V[s.value] = logsumexp(std::span<const double>(vt.Q).subspan(b, e - b), mdp.lambda);
  }
  return vt;
}

FlowTable compute_flows(const DagView& dag, const BackwardPolicy& pb) {
  FlowTable ft;
  ft.state.assign(dag.num_states(), 0.0);
  ft.edge.assign(dag.num_edges(), 0.0);
  for (StateId s : std::views::reverse(dag.topo())) {
    if (dag.is_terminal(s)) {
      ft.state[s.value] = dag.reward(s);
      continue;
    }
    double total = 0.0;
    for (auto k = dag.edge_begin(s); k < dag.edge_end(s); ++k) {
      const StateId t = dag.edge_target(k);
      ft.edge[k] = pb.prob_unchecked(dag, t) * ft.state[t.value];
      total += ft.edge[k];
    }
    ft.state[s.value] = total;
  }
  return ft;
}

TabularPolicy extract_policy(const DagView& dag, const ValueTable& vt, double lambda) {
  TabularPolicy pi;
  pi.probs.assign(dag.num_edges(), 0.0);
  for (std::size_t k = 0; k < dag.num_edges(); ++k)
    pi.probs[k] = std::exp((vt.Q[k] - vt.V[dag.edge_source(k).value]) / lambda);
  return pi;
}

std::vector<double> policy_values(const SoftMdp& mdp, const DagView& dag, const TabularPolicy& pi) {
  std::vector<double> V(dag.num_states() + 1, 0.0);
  for (StateId s : std::views::reverse(dag.topo())) {
    if (dag.is_terminal(s)) {
      V[s.value] = mdp_reward(mdp, dag, s, dag.sink());
      continue;
    }
    double v = 0.0;
    for (auto k = dag.edge_begin(s); k < dag.edge_end(s); ++k) {
      const double p = pi.probs[k];
      if (p <= 0.0) continue;  // 0 log 0 = 0
      const StateId t = dag.edge_target(k);
      v += p * (mdp.pb.log_prob_unchecked(dag, t) + V[t.value] - mdp.lambda * std::log(p));
    }
    V[s.value] = v;
  }
  return V;
}

double policy_eval_exact(const SoftMdp& mdp, const DagView& dag, const TabularPolicy& pi) {
  return policy_values(mdp, dag, pi)[dag.initial().value];
}

std::vector<double> state_occupancy(const DagView& dag, const TabularPolicy& pi) {
  std::vector<double> mu(dag.num_states(), 0.0);
  mu[dag.initial().value] = 1.0;
  for (StateId s : dag.topo()) {
    const double m = mu[s.value];
    if (m == 0.0) continue;
    for (auto k = dag.edge_begin(s); k < dag.edge_end(s); ++k) mu[dag.edge_target(k).value] += m * pi.probs[k];
  }
  return mu;
}

std::vector<double> terminal_distribution(const DagView& dag, const TabularPolicy& pi) {
  const auto mu = state_occupancy(dag, pi);
  std::vector<double> d;
  d.reserve(dag.terminals().size());
  for (StateId x : dag.terminals()) d.push_back(mu[x.value]);
  return d;
}

namespace {

double total_reward(const DagView& dag) {
  double z = 0.0;
  for (StateId x : dag.terminals()) z += dag.reward(x);
  return z;
}

std::size_t edge_of(const DagView& dag, StateId s, StateId t) {
  const auto e = dag.find_edge(s, t);
  if (e == DagView::npos) throw std::domain_error("trajectory step is not an edge");
  return e;
}

}  // namespace

double log_backward_trajectory_prob(const DagView& dag, const BackwardPolicy& pb, const IdTrajectory& tau,
                                    double log_z) {
  double lp = std::log(dag.reward(tau.terminal())) - log_z;
  for (std::size_t t = 1; t < tau.states.size(); ++t) lp += pb.log_prob_unchecked(dag, tau.states[t]);
  return lp;
}

double log_forward_trajectory_prob(const DagView& dag, const TabularPolicy& pi, const IdTrajectory& tau) {
  double lp = 0.0;
  for (std::size_t t = 1; t < tau.states.size(); ++t)
    lp += std::log(pi.probs[edge_of(dag, tau.states[t - 1], tau.states[t])]);
  return lp;
}

ValueKlCheck check_prop_value_kl(const SoftMdp& mdp, const DagView& dag, const TabularPolicy& pi,
                                 std::uint64_t trajectory_cap) {
  if (mdp.lambda != 1.0) throw std::invalid_argument("value/KL identity holds for lambda = 1 only");
  ValueKlCheck out;
  out.lhs = policy_eval_exact(mdp, dag, pi);
  const double log_z = std::log(total_reward(dag));
  double kl = 0.0;
  for_each_trajectory(dag, trajectory_cap, [&](const IdTrajectory& tau) {
    const double lq = log_forward_trajectory_prob(dag, pi, tau);
    if (!std::isfinite(lq)) return;  // q = 0 contributes nothing
    kl += std::exp(lq) * (lq - log_backward_trajectory_prob(dag, mdp.pb, tau, log_z));
  });
  out.kl = kl;
  out.rhs = log_z - kl;
  return out;
}

std::vector<double> value_gradient(const SoftMdp& mdp, const DagView& dag, std::span<const double> logits) {
  if (mdp.lambda != 1.0) throw std::invalid_argument("value_gradient: lambda = 1 only");
  const auto pi = TabularPolicy::from_logits(dag, logits);
  const auto V = policy_values(mdp, dag, pi);
  const auto mu = state_occupancy(dag, pi);
  std::vector<double> g(dag.num_edges(), 0.0);
  for (std::size_t k = 0; k < dag.num_edges(); ++k) {
    const StateId s = dag.edge_source(k), t = dag.edge_target(k);
    const double p = pi.probs[k];
    if (p <= 0.0) continue;
    const double q_soft = mdp.pb.log_prob_unchecked(dag, t) + V[t.value] - std::log(p);
    g[k] = mu[s.value] * p * (q_soft - V[s.value]);
  }
  return g;
}

PolicyGradIdentity check_tb_policygrad_identity(const SoftMdp& mdp, const DagView& dag,
                                                std::span<const double> logits, double log_z,
                                                std::uint64_t trajectory_cap) {
  PolicyGradIdentity out;
  out.value_grad = value_gradient(mdp, dag, logits);
  const auto pi = TabularPolicy::from_logits(dag, logits);
  out.half_tb_grad.assign(dag.num_edges(), 0.0);
  std::vector<std::size_t> path_edges;
  for_each_trajectory(dag, trajectory_cap, [&](const IdTrajectory& tau) {
    path_edges.clear();
    double log_pf = 0.0;
    for (std::size_t t = 1; t < tau.states.size(); ++t) {
      const auto e = edge_of(dag, tau.states[t - 1], tau.states[t]);
      path_edges.push_back(e);
      log_pf += std::log(pi.probs[e]);
    }
    const double q = std::exp(log_pf);
    if (q == 0.0) return;
    double log_pb = 0.0;
    for (std::size_t t = 1; t < tau.states.size(); ++t) log_pb += mdp.pb.log_prob_unchecked(dag, tau.states[t]);
    const double residual = log_z + log_pf - std::log(dag.reward(tau.terminal())) - log_pb;
    // 0.5 * d(residual^2) = residual * sum_t d log pi(e_t | s_t)
    for (std::size_t t = 0; t < path_edges.size(); ++t) {
      const StateId s = tau.states[t];
      for (auto k = dag.edge_begin(s); k < dag.edge_end(s); ++k) {
        const double indicator = k == path_edges[t] ? 1.0 : 0.0;
        out.half_tb_grad[k] += q * residual * (indicator - pi.probs[k]);
      }
    }
  });
  for (std::size_t k = 0; k < dag.num_edges(); ++k)
    out.gap = std::max(out.gap, std::abs(out.value_grad[k] + out.half_tb_grad[k]));
  return out;
}

}  // namespace softgfn
