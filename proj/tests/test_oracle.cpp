#include <cmath>
#include <limits>
#include <map>

#include "doctest.h"
#include "softgfn/envs.hpp"
#include "softgfn/oracle.hpp"

using namespace softgfn;

namespace {

// F(s) = sum_c F(c) / |parents(c)| with F(x) = R(x), by memoized recursion on
// the environment itself (no DagView, no oracle code).
double flow_of(const Environment& env, const State& s, std::map<std::uint64_t, double>& memo) {
  const auto id = env.index(s).value;
  if (auto it = memo.find(id); it != memo.end()) return it->second;
  double f = 0.0;
  if (s.terminal()) {
    f = env.reward(s);
  } else {
    for (const auto& c : env.children(s)) f += flow_of(env, c.state, memo) / static_cast<double>(env.num_parents(c.state));
  }
  memo[id] = f;
  return f;
}

double max_theorem1_error(const Environment& env) {
  const auto dag = DagView::build(env);
  const SoftMdp mdp(env);
  const auto vt = solve_soft_bellman(mdp, dag);
  std::map<std::uint64_t, double> memo;
  double err = 0.0;
  for (std::size_t i = 0; i < dag.num_states(); ++i) {
    const State s = env.state_at(StateId{i});
    err = std::max(err, std::abs(vt.V[i] - std::log(flow_of(env, s, memo))));
  }
  for (std::size_t e = 0; e < dag.num_edges(); ++e) {
    const State t = env.state_at(dag.edge_target(e));
    const double edge_flow = flow_of(env, t, memo) / static_cast<double>(env.num_parents(t));
    err = std::max(err, std::abs(vt.Q[e] - std::log(edge_flow)));
  }
  return err;
}

struct Enumerated {
  double log_z = 0.0;
  double kl = 0.0;
};

// KL(q^pi || P_B) by brute-force enumeration.
Enumerated enumerate_kl(const DagView& dag, const TabularPolicy& pi) {
  double z = 0.0;
  for (StateId x : dag.terminals()) z += dag.reward(x);
  Enumerated out{std::log(z), 0.0};
  for (const auto& tau : enumerate_trajectories(dag)) {
    double log_q = 0.0, log_pb = std::log(dag.reward(tau.terminal())) - out.log_z;
    for (std::size_t t = 0; t < tau.length(); ++t) {
      const auto e = dag.find_edge(tau.states[t], tau.states[t + 1]);
      log_q += std::log(pi.probs[e]);
      log_pb -= std::log(static_cast<double>(dag.num_parents(tau.states[t + 1])));
    }
    out.kl += std::exp(log_q) * (log_q - log_pb);
  }
  return out;
}

}  // namespace

TEST_CASE("logsumexp") {
  const double xs[] = {1.0, 2.0, 3.0};
  CHECK(logsumexp(xs) == doctest::Approx(std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0))).epsilon(1e-14));
  CHECK(logsumexp(xs, 2.0) ==
        doctest::Approx(2.0 * std::log(std::exp(0.5) + std::exp(1.0) + std::exp(1.5))).epsilon(1e-14));
  const double big[] = {1000.0, 1000.0};
  CHECK(logsumexp(big) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-14));
  CHECK(logsumexp(std::span<const double>{}) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("soft Bellman on the hand fixtures") {
  const auto diamond = ExplicitDag::diamond();
  const auto dag = DagView::build(diamond);
  const auto vt = solve_soft_bellman(SoftMdp(diamond), dag);
  // V(x) = log 1, V(a) = V(b) = log 1/2, V(s0) = log(1/2 + 1/2)
  CHECK(vt.V[3] == doctest::Approx(0.0));
  CHECK(vt.V[1] == doctest::Approx(-std::log(2.0)).epsilon(1e-14));
  CHECK(vt.V[2] == doctest::Approx(-std::log(2.0)).epsilon(1e-14));
  CHECK(std::abs(vt.V[0]) <= 1e-15);
  CHECK(vt.Q[dag.find_edge(StateId{0}, StateId{1})] == doctest::Approx(-std::log(2.0)).epsilon(1e-14));
  CHECK(vt.V[dag.sink().value] == 0.0);

  const auto chain = ExplicitDag::chain(2.0);
  const auto cdag = DagView::build(chain);
  CHECK(solve_soft_bellman(SoftMdp(chain), cdag).V[0] == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("optimal values are log flows") {
  for (auto cfg : {HypergridConfig::standard(8, 2), HypergridConfig::hard(8, 2), HypergridConfig::standard(4, 4),
                   HypergridConfig::hard(4, 4)}) {
    CAPTURE(cfg.H);
    CAPTURE(cfg.D);
    CHECK(max_theorem1_error(HypergridEnv(cfg)) <= 1e-9);
  }
  BitSeqEnv bits(BitSeqConfig{6, 2, {"000000", "101010"}, 2.0});
  CHECK(max_theorem1_error(bits) <= 1e-9);

  // the library's own flow computation agrees as well
  HypergridEnv env(HypergridConfig::standard(5, 2));
  const auto dag = DagView::build(env);
  const auto flows = compute_flows(dag, BackwardPolicy{});
  std::map<std::uint64_t, double> memo;
  for (std::size_t i = 0; i < dag.num_states(); ++i)
    CHECK(flows.state[i] == doctest::Approx(flow_of(env, env.state_at(StateId{i}), memo)).epsilon(1e-12));
}

TEST_CASE("optimal policy samples proportionally to reward") {
  for (auto cfg : {HypergridConfig::standard(8, 2), HypergridConfig::hard(4, 3)}) {
    HypergridEnv env(cfg);
    const auto dag = DagView::build(env);
    const auto pi = extract_policy(dag, solve_soft_bellman(SoftMdp(env), dag), 1.0);
    const auto d = terminal_distribution(dag, pi);
    const auto part = exact_partition(env);
    REQUIRE(d.size() == part.target.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK(dag.terminals()[i] == part.target[i].first);
      CHECK(std::abs(d[i] - part.target[i].second) <= 1e-10);
      sum += d[i];
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    for (std::size_t s = 0; s < dag.num_states(); ++s) {
      if (dag.is_terminal(StateId{s})) continue;
      double row = 0.0;
      for (auto e = dag.edge_begin(StateId{s}); e < dag.edge_end(StateId{s}); ++e) row += pi.probs[e];
      CHECK(std::abs(row - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("value equals log Z minus KL for random policies") {
  HypergridEnv grid(HypergridConfig::standard(4, 2));
  const auto diamond = ExplicitDag::diamond();
  const auto chain = ExplicitDag::chain();
  CounterRng rng(11, "policies");
  for (const Environment* env : {static_cast<const Environment*>(&grid), static_cast<const Environment*>(&diamond),
                                 static_cast<const Environment*>(&chain)}) {
    const auto dag = DagView::build(*env);
    const SoftMdp mdp(*env);
    for (int i = 0; i < 30; ++i) {
      const auto pi = TabularPolicy::random(dag, rng);
      const auto brute = enumerate_kl(dag, pi);
      const double v = policy_eval_exact(mdp, dag, pi);
      CHECK(std::abs(v - (brute.log_z - brute.kl)) <= 1e-8);
      const auto lib = check_prop_value_kl(mdp, dag, pi);
      CHECK(std::abs(lib.kl - brute.kl) <= 1e-10);
      CHECK(std::abs(lib.lhs - lib.rhs) <= 1e-8);

      // marginalizing onto terminals can only shrink the divergence
      const auto d = terminal_distribution(dag, pi);
      double kl_terminal = 0.0;
      for (std::size_t k = 0; k < d.size(); ++k)
        if (d[k] > 0) kl_terminal += d[k] * (std::log(d[k]) - (std::log(dag.reward(dag.terminals()[k])) - brute.log_z));
      CHECK(kl_terminal <= brute.kl + 1e-12);
    }
  }
}

TEST_CASE("optimal policy has the largest value") {
  HypergridEnv env(HypergridConfig::standard(4, 2));
  const auto dag = DagView::build(env);
  const SoftMdp mdp(env);
  const auto vt = solve_soft_bellman(mdp, dag);
  const auto pi_star = extract_policy(dag, vt, 1.0);
  CHECK(policy_eval_exact(mdp, dag, pi_star) == doctest::Approx(vt.V[0]).epsilon(1e-12));
  CounterRng rng(5, "policies");
  for (int i = 0; i < 20; ++i) CHECK(policy_eval_exact(mdp, dag, TabularPolicy::random(dag, rng)) < vt.V[0]);
}

TEST_CASE("occupancy of the initial state is one") {
  HypergridEnv env(HypergridConfig::standard(3, 3));
  const auto dag = DagView::build(env);
  CounterRng rng(1, "p");
  const auto pi = TabularPolicy::random(dag, rng);
  const auto occ = state_occupancy(dag, pi);
  CHECK(occ[dag.initial().value] == doctest::Approx(1.0));
  double terminal_mass = 0.0;
  for (StateId x : dag.terminals()) terminal_mass += occ[x.value];
  CHECK(terminal_mass == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("TB gradient equals minus twice the value gradient") {
  HypergridEnv env(HypergridConfig::standard(3, 2));
  const auto dag = DagView::build(env);
  const SoftMdp mdp(env);
  CounterRng rng(3, "logits");
  const auto all = enumerate_trajectories(dag);
  const double log_z = std::log(exact_partition(env).Z);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> logits(dag.num_edges());
    for (auto& l : logits) l = 1.5 * rng.normal();
    const double z_param = log_z + rng.normal();
    const auto res = check_tb_policygrad_identity(mdp, dag, logits, z_param);
    CHECK(res.gap <= 1e-6);

    // value gradient by central differences of the exact policy value
    const double h = 1e-6;
    for (std::size_t e = 0; e < logits.size(); ++e) {
      auto lp = logits, lm = logits;
      lp[e] += h;
      lm[e] -= h;
      const double fd = (policy_eval_exact(mdp, dag, TabularPolicy::from_logits(dag, lp)) -
                         policy_eval_exact(mdp, dag, TabularPolicy::from_logits(dag, lm))) /
                        (2 * h);
      CHECK(std::abs(fd - res.value_grad[e]) <= 1e-6);
    }

    // 0.5 E_tau[d/dlogits (logZ + log q(tau) - log R - log PB)^2], by enumeration
    const auto pi = TabularPolicy::from_logits(dag, logits);
    std::vector<double> half(dag.num_edges(), 0.0);
    for (const auto& tau : all) {
      double log_q = 0.0, res_tb = z_param - std::log(dag.reward(tau.terminal()));
      std::vector<std::size_t> edges;
      for (std::size_t t = 0; t < tau.length(); ++t) {
        const auto e = dag.find_edge(tau.states[t], tau.states[t + 1]);
        edges.push_back(e);
        log_q += std::log(pi.probs[e]);
        res_tb += std::log(pi.probs[e]) + std::log(static_cast<double>(dag.num_parents(tau.states[t + 1])));
      }
      const double q = std::exp(log_q);
      for (std::size_t t = 0; t < edges.size(); ++t) {
        const StateId s = tau.states[t];
        for (auto e = dag.edge_begin(s); e < dag.edge_end(s); ++e)
          half[e] += q * res_tb * ((e == edges[t] ? 1.0 : 0.0) - pi.probs[e]);
      }
    }
    for (std::size_t e = 0; e < half.size(); ++e) {
      CHECK(std::abs(half[e] - res.half_tb_grad[e]) <= 1e-9);
      CHECK(std::abs(res.value_grad[e] + half[e]) <= 1e-6);
    }
  }
}

TEST_CASE("trajectory probabilities") {
  const auto diamond = ExplicitDag::diamond();
  const auto dag = DagView::build(diamond);
  IdTrajectory tau{{StateId{0}, StateId{1}, StateId{3}}, {ActionId{0}, ActionId{0}}};
  // P_B(tau) = R/Z * P_B(a|x) * P_B(s0|a) = 1 * 1/2 * 1
  CHECK(log_backward_trajectory_prob(dag, BackwardPolicy{}, tau, 0.0) == doctest::Approx(std::log(0.5)));
  const auto pi = TabularPolicy::uniform(dag);
  CHECK(log_forward_trajectory_prob(dag, pi, tau) == doctest::Approx(std::log(0.5)));
}

TEST_CASE("mdp rewards") {
  const auto diamond = ExplicitDag::diamond(3.0);
  const auto dag = DagView::build(diamond);
  const SoftMdp mdp(diamond);
  CHECK(mdp_reward(mdp, dag, StateId{1}, StateId{3}) == doctest::Approx(std::log(0.5)));
  CHECK(mdp_reward(mdp, dag, StateId{0}, StateId{1}) == 0.0);
  CHECK(mdp_reward(mdp, dag, StateId{3}, dag.sink()) == doctest::Approx(std::log(3.0)));
  CHECK(mdp_reward(mdp, dag, dag.sink(), dag.sink()) == 0.0);
  CHECK_THROWS_AS(mdp_reward(mdp, dag, StateId{0}, StateId{3}), std::domain_error);
  CHECK(uniform_pb(diamond, StateId{1}, StateId{3}) == 0.5);
  CHECK_THROWS_AS(uniform_pb(diamond, StateId{0}, StateId{3}), std::domain_error);
}
