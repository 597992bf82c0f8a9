#include <cmath>
#include <cstring>
#include <map>

#include "doctest.h"
#include "softgfn/baselines.hpp"
#include "softgfn/envs.hpp"
#include "softgfn/oracle.hpp"
#include "softgfn/soft_dqn.hpp"

using namespace softgfn;

namespace {

// log edge flows of the uniform-P_B flow, by memoized recursion on the environment
double flow_of(const Environment& env, const State& s, std::map<std::uint64_t, double>& memo) {
  const auto id = env.index(s).value;
  if (auto it = memo.find(id); it != memo.end()) return it->second;
  double f = 0.0;
  if (s.terminal()) {
    f = env.reward(s);
  } else {
    for (const auto& c : env.children(s)) f += flow_of(env, c.state, memo) / static_cast<double>(env.num_parents(c.state));
  }
  return memo[id] = f;
}

std::vector<Transition> all_edges(const DagView& dag) {
  std::vector<Transition> out;
  for (std::size_t e = 0; e < dag.num_edges(); ++e)
    out.push_back({dag.env().state_at(dag.edge_source(e)), dag.edge_action(e), dag.env().state_at(dag.edge_target(e)),
                   0.0, false});
  return out;
}

std::vector<const Transition*> pointers(const std::vector<Transition>& ts) {
  std::vector<const Transition*> p;
  for (auto& t : ts) p.push_back(&t);
  return p;
}

TabularQModel optimal_table(const Environment& env, const DagView& dag) {
  TabularQModel q(env);
  const auto vt = solve_soft_bellman(SoftMdp(env), dag);
  for (std::size_t e = 0; e < dag.num_edges(); ++e) q.at(dag.edge_source(e), dag.edge_action(e)) = vt.Q[e];
  return q;
}

SoftDqnConfig small_config() {
  SoftDqnConfig cfg;
  cfg.per_update = 4;
  cfg.batch = 16;
  cfg.replay.capacity = 1000;
  return cfg;
}

}  // namespace

TEST_CASE("Huber loss") {
  CHECK(huber(0.0, 0.5) == 0.125);
  CHECK(huber(0.0, 2.0) == 1.5);
  CHECK(huber(3.0, 0.0) == 2.5);
  CHECK(huber_grad(0.0, 0.5) == -0.5);
  CHECK(huber_grad(0.0, 2.0) == -1.0);
  CHECK(huber_grad(5.0, 2.0) == 1.0);
}

TEST_CASE("hand-computed TD targets on the diamond") {
  const auto env = ExplicitDag::diamond();
  const auto dag = DagView::build(env);
  const SoftMdp mdp(env);
  const auto q_star = optimal_table(env, dag);

  // s0 -> a: log P_B(s0 | a) + V(a) = 0 + log 1/2
  const Transition to_a{env.state_at(StateId{0}), ActionId{0}, env.state_at(StateId{1}), 0.0, false};
  // a -> x: log P_B(a | x) + log R(x) = log 1/2
  const Transition to_x{env.state_at(StateId{1}), ActionId{0}, env.state_at(StateId{3}), 0.0, false};
  // x -> sink
  const Transition done{env.state_at(StateId{3}), ActionId{0}, State::make_sink(), 2.0, true};
  const std::vector<const Transition*> batch{&to_a, &to_x, &done};
  const auto y = td_targets(mdp, batch, q_star, 1.0, std::nullopt);
  CHECK(y[0] == doctest::Approx(-std::log(2.0)).epsilon(1e-14));
  CHECK(y[1] == doctest::Approx(-std::log(2.0)).epsilon(1e-14));
  CHECK(y[2] == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  // zero table: log pi(a | s0) = log 1/2, the bootstrap at a is 0
  const TabularQModel zero(env);
  const MunchausenConfig m{0.15, -100.0};
  const auto ym = td_targets(mdp, batch, zero, m.lambda(), m);
  CHECK(ym[0] == doctest::Approx(0.15 * (1.0 / 0.85) * std::log(0.5)).epsilon(1e-14));
  CHECK(ym[0] == doctest::Approx(-0.12231).epsilon(1e-4));
  // a has one action, so log pi = 0 and the term vanishes
  CHECK(ym[1] == doctest::Approx(std::log(0.5)).epsilon(1e-14));
  // clipping at l0
  const auto yc = td_targets(mdp, batch, zero, m.lambda(), MunchausenConfig{0.15, -0.1});
  CHECK(yc[0] == doctest::Approx(0.15 * -0.1).epsilon(1e-14));

  const auto chain = ExplicitDag::chain(2.0);
  const Transition last{chain.state_at(StateId{0}), ActionId{0}, chain.state_at(StateId{1}), 0.0, false};
  const std::vector<const Transition*> one{&last};
  CHECK(td_targets(SoftMdp(chain), one, TabularQModel(chain), 1.0, std::nullopt)[0] ==
        doctest::Approx(std::log(2.0)));
}

TEST_CASE("trajectories become transitions without the sink step") {
  HypergridEnv env(HypergridConfig::standard(4, 2));
  CounterRng rng(1, "rollout");
  const TabularQModel zero(env);
  const auto trajs = rollout(env, 20, 1.0, 0.0, q_scores(env, zero), rng);
  std::size_t steps = 0;
  for (auto& t : trajs) {
    CHECK(t.terminal().terminal());
    CHECK(t.states.front() == env.initial_state());
    for (std::size_t i = 0; i + 1 < t.states.size(); ++i) CHECK(!t.states[i].terminal());
    steps += t.length();
  }
  const auto trans = to_transitions(env, trajs);
  CHECK(trans.size() == steps);
  for (auto& t : trans) CHECK(!t.done);
}

TEST_CASE("epsilon one samples uniformly over valid actions") {
  HypergridEnv env(HypergridConfig::standard(4, 2));
  TabularQModel q(env);
  // a strongly peaked policy that epsilon must override
  q.at(env.index(env.initial_state()), ActionId{0}) = 50.0;
  CounterRng rng(2, "rollout");
  const int n = 30000;
  const auto trajs = rollout(env, n, 1.0, 1.0, q_scores(env, q), rng);
  std::array<int, 3> counts{};
  for (auto& t : trajs) ++counts[t.actions[0].value];
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - n / 3.0) * (c - n / 3.0) / (n / 3.0);
  CHECK(chi2 < 13.8);  // chi-square, 2 dof, p = 0.001
}

TEST_CASE("policy rows") {
  HypergridEnv env(HypergridConfig::standard(5, 2));
  const auto dag = DagView::build(env);
  MlpQModel zero(env, MlpSpec{0, {8}, 0, Activation::leaky_relu, 0}, false);
  std::fill(zero.params().begin(), zero.params().end(), 0.0);
  const auto uni = policy_rows(dag, 1.0, q_scores(env, zero), 7);
  for (std::size_t e = 0; e < dag.num_edges(); ++e) {
    const StateId s = dag.edge_source(e);
    CHECK(uni.probs[e] == doctest::Approx(1.0 / static_cast<double>(dag.edge_end(s) - dag.edge_begin(s))));
  }

  const auto q_star = optimal_table(env, dag);
  const auto from_q = policy_rows(dag, 1.0, q_scores(env, q_star));
  const auto pi_star = extract_policy(dag, solve_soft_bellman(SoftMdp(env), dag), 1.0);
  for (std::size_t e = 0; e < dag.num_edges(); ++e) CHECK(std::abs(from_q.probs[e] - pi_star.probs[e]) <= 1e-12);
}

TEST_CASE("exact tabular sweeps converge in at most the depth plus five") {
  for (auto cfg : {HypergridConfig::standard(8, 2), HypergridConfig::hard(4, 3)}) {
    HypergridEnv env(cfg);
    const auto dag = DagView::build(env);
    const SoftMdp mdp(env);
    TabularQModel q(env);
    const std::size_t depth = static_cast<std::size_t>(cfg.D * (cfg.H - 1) + 1);
    for (std::size_t k = 0; k < depth + 5; ++k) tabular_sweep(mdp, dag, q, 1.0);
    std::map<std::uint64_t, double> memo;
    double err = 0.0;
    for (std::size_t e = 0; e < dag.num_edges(); ++e) {
      const State t = env.state_at(dag.edge_target(e));
      const double log_edge_flow = std::log(flow_of(env, t, memo) / static_cast<double>(env.num_parents(t)));
      err = std::max(err, std::abs(q.at(dag.edge_source(e), dag.edge_action(e)) - log_edge_flow));
    }
    CHECK(err <= 1e-6);
    CHECK(tabular_sweep(mdp, dag, q, 1.0) <= 1e-12);
  }
}

TEST_CASE("Munchausen sweeps reach the reward-proportional policy") {
  HypergridEnv env(HypergridConfig::standard(4, 2));
  const auto dag = DagView::build(env);
  const SoftMdp mdp(env);
  const MunchausenConfig m{0.15, -100.0};
  TabularQModel q(env);
  for (int k = 0; k < 300; ++k) tabular_sweep(mdp, dag, q, m.lambda(), m);
  const auto pi = policy_rows(dag, m.lambda(), q_scores(env, q));
  const auto d = terminal_distribution(dag, pi);
  const auto target = exact_partition(env);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(std::abs(d[i] - target.target[i].second) <= 1e-8);
}

TEST_CASE("zero Munchausen coefficient reproduces Soft DQN targets bit for bit") {
  HypergridEnv env(HypergridConfig::standard(6, 3));
  const SoftMdp mdp(env);
  CounterRng rng(3, "rollout");
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    MlpQModel target(env, MlpSpec{0, {32, 32}, 0, Activation::leaky_relu, seed}, seed % 2 == 0);
    const auto trans = to_transitions(env, rollout(env, 32, 1.0, 0.3, q_scores(env, target), rng));
    const auto ptrs = pointers(trans);
    const auto a = td_targets(mdp, ptrs, target, 1.0, std::nullopt);
    const auto b = td_targets(mdp, ptrs, target, 1.0, MunchausenConfig{0.0, -100.0});
    REQUIRE(a.size() == b.size());
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("flow-form Q turns the TD residual into the DB residual") {
  HypergridEnv env(HypergridConfig::hard(4, 2));
  const auto dag = DagView::build(env);
  const SoftMdp mdp(env);
  const auto edges = all_edges(dag);
  const auto ptrs = pointers(edges);
  CounterRng rng(4, "param");
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> log_f(dag.num_states()), logits(dag.num_edges());
    for (auto& v : log_f) v = 3.0 * rng.normal();
    for (auto& v : logits) v = 2.0 * rng.normal();
    const auto pi = TabularPolicy::from_logits(dag, logits);
    TabularQModel q(env);
    for (std::size_t e = 0; e < dag.num_edges(); ++e)
      q.at(dag.edge_source(e), dag.edge_action(e)) = log_f[dag.edge_source(e).value] + std::log(pi.probs[e]);
    const auto y = td_targets(mdp, ptrs, q, 1.0, std::nullopt);
    for (std::size_t e = 0; e < dag.num_edges(); ++e) {
      const StateId s = dag.edge_source(e), t = dag.edge_target(e);
      const double td = q.at(s, dag.edge_action(e)) - y[e];
      const double db = db_residual(mdp, edges[e].s, edges[e].s_next, log_f[s.value], std::log(pi.probs[e]), log_f[t.value]);
      worst = std::max(worst, std::abs(td - db));
    }
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("dueling Q is a DB parameterization with the value stream as log flow") {
  HypergridEnv env(HypergridConfig::standard(5, 2));
  const auto dag = DagView::build(env);
  const SoftMdp mdp(env);
  const auto edges = all_edges(dag);
  const auto ptrs = pointers(edges);
  std::vector<State> states;
  for (std::size_t i = 0; i < dag.num_states(); ++i) states.push_back(env.state_at(StateId{i}));
  const auto masks = action_masks(env, states);
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    MlpQModel model(env, MlpSpec{0, {16}, 0, Activation::leaky_relu, seed}, true, 1.0);
    Matrix q;
    model.forward(env, states, masks, q);
    const std::vector<double> v(model.last_values().begin(), model.last_values().end());
    const auto y = td_targets(mdp, ptrs, model, 1.0, std::nullopt);
    for (std::size_t e = 0; e < dag.num_edges(); ++e) {
      const std::size_t s = dag.edge_source(e).value, t = dag.edge_target(e).value;
      const double qa = q(s, dag.edge_action(e).value);
      const double db = db_residual(mdp, edges[e].s, edges[e].s_next, v[s], qa - v[s], v[t]);
      worst = std::max(worst, std::abs((qa - y[e]) - db));
    }
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("training loss at the optimum vanishes") {
  HypergridEnv env(HypergridConfig::standard(6, 2));
  const auto dag = DagView::build(env);
  const SoftMdp mdp(env);
  auto cfg = small_config();
  SoftDqnAgent agent(mdp, cfg, std::make_unique<TabularQModel>(optimal_table(env, dag)), 0);
  const auto edges = all_edges(dag);
  const auto ptrs = pointers(edges);
  const std::vector<double> ones(ptrs.size(), 1.0);
  CHECK(agent.train_on(ptrs, ones).loss <= 1e-12);
}

TEST_CASE("target network schedule") {
  HypergridEnv env(HypergridConfig::standard(4, 2));
  const SoftMdp mdp(env);
  auto cfg = small_config();
  cfg.tau = 1.0;
  cfg.target_period = 5;
  SoftDqnAgent agent(mdp, cfg, std::make_unique<TabularQModel>(env), 0);
  const std::vector<double> initial(agent.target().params().begin(), agent.target().params().end());
  for (int i = 0; i < 4; ++i) agent.iterate();
  CHECK(std::equal(initial.begin(), initial.end(), agent.target().params().begin()));
  CHECK(!std::equal(initial.begin(), initial.end(), agent.online().params().begin()));
  agent.iterate();
  CHECK(std::equal(agent.online().params().begin(), agent.online().params().end(), agent.target().params().begin()));

  cfg.tau = 0.25;
  cfg.target_period = 1;
  SoftDqnAgent soft(mdp, cfg, std::make_unique<TabularQModel>(env), 0);
  for (int i = 0; i < 6; ++i) soft.iterate();
  std::vector<double> before(soft.target().params().begin(), soft.target().params().end());
  soft.iterate();
  for (std::size_t i = 0; i < before.size(); ++i)
    CHECK(soft.target().params()[i] == doctest::Approx(0.75 * before[i] + 0.25 * soft.online().params()[i]));
}

TEST_CASE("agents are deterministic given the seed") {
  HypergridEnv env(HypergridConfig::standard(5, 2));
  const SoftMdp mdp(env);
  auto cfg = small_config();
  cfg.munchausen = MunchausenConfig{};
  auto make = [&](std::uint64_t seed) {
    return SoftDqnAgent(mdp, cfg, std::make_unique<MlpQModel>(env, MlpSpec{0, {16}, 0, Activation::leaky_relu, seed}, true,
                                                              cfg.lambda()),
                        seed);
  };
  auto a = make(1), b = make(1), c = make(2);
  for (int i = 0; i < 15; ++i) {
    a.iterate();
    b.iterate();
    c.iterate();
  }
  CHECK(std::equal(a.online().params().begin(), a.online().params().end(), b.online().params().begin()));
  CHECK(!std::equal(a.online().params().begin(), a.online().params().end(), c.online().params().begin()));

  cfg.use_replay = false;
  cfg.loss = RegressionLoss::mse;
  SoftDqnAgent plain(mdp, cfg, std::make_unique<TabularQModel>(env), 0);
  StepStats st;
  plain.iterate(&st);
  CHECK(st.loss > 0.0);
  CHECK(plain.buffer().size() == 0);
}

TEST_CASE("config validation") {
  SoftDqnConfig cfg;
  cfg.tau = 0.0;
  CHECK_THROWS(cfg.validate());
  CHECK_THROWS(MunchausenConfig{1.0, -100.0}.validate());
  CHECK_THROWS(MunchausenConfig{0.1, 1.0}.validate());
  CHECK(MunchausenConfig{0.15, -100.0}.lambda() == doctest::Approx(1.0 / 0.85));
}
