#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "softgfn/dag.hpp"
#include "softgfn/envs.hpp"

using namespace softgfn;

namespace {

std::uint64_t factorial(int n) { return n <= 1 ? 1 : n * factorial(n - 1); }

// Number of monotone lattice paths from the origin to every cell, summed.
std::uint64_t hypergrid_paths(int H, int D) {
  std::uint64_t total = 0;
  std::vector<int> c(D, 0);
  while (true) {
    int s = 0;
    for (int v : c) s += v;
    std::uint64_t m = factorial(s);
    for (int v : c) m /= factorial(v);
    total += m;
    int i = 0;
    while (i < D && ++c[i] == H) c[i++] = 0;
    if (i == D) break;
  }
  return total;
}

}  // namespace

TEST_CASE("hypergrid reward at hand-evaluated cells") {
  const auto cfg = HypergridConfig::standard(8, 2);
  const int a[] = {0, 0}, b[] = {3, 3}, c[] = {6, 6};
  CHECK(hypergrid_reward(cfg, a) == doctest::Approx(0.501).epsilon(1e-14));
  CHECK(hypergrid_reward(cfg, b) == doctest::Approx(0.001).epsilon(1e-14));
  CHECK(hypergrid_reward(cfg, c) == doctest::Approx(2.501).epsilon(1e-14));
  const int bad[] = {8, 0}, neg[] = {-1, 0};
  CHECK_THROWS_AS(hypergrid_reward(cfg, bad), std::domain_error);
  CHECK_THROWS_AS(hypergrid_reward(cfg, neg), std::domain_error);
}

TEST_CASE("hypergrid config validation") {
  CHECK_THROWS(HypergridConfig{1, 2, 1e-3, 0.5, 2.0}.validate());
  CHECK_THROWS(HypergridConfig{8, 0, 1e-3, 0.5, 2.0}.validate());
  CHECK_THROWS(HypergridConfig{8, 2, 0.6, 0.5, 2.0}.validate());
  CHECK_NOTHROW(HypergridConfig::hard(8, 2).validate());
}

TEST_CASE("hypergrid structure") {
  HypergridEnv env(HypergridConfig::standard(4, 3));
  CHECK(env.state_count() == 2 * 64);
  CHECK(env.encoding_dim() == 12);
  const auto dag = DagView::build(env);
  CHECK(dag.num_states() == 128);
  CHECK(dag.terminals().size() == 64);
  for (std::size_t i = 0; i < dag.num_states(); ++i) {
    const State s = env.state_at(StateId{i});
    CHECK(env.index(s).value == i);
    if (s.terminal()) {
      CHECK(env.children(s).empty());
      CHECK(env.num_parents(s) == 1);
      continue;
    }
    std::size_t below = 0;
    for (int v : s.cells) below += v < 3;
    CHECK(env.children(s).size() == below + 1);
  }
}

TEST_CASE("parents are the inverse of children") {
  const HypergridEnv grid(HypergridConfig::standard(3, 2));
  const BitSeqEnv bits(BitSeqConfig{4, 2, {"0000"}, 1.0});
  const auto diamond = ExplicitDag::diamond();
  for (const Environment* env : {static_cast<const Environment*>(&grid), static_cast<const Environment*>(&bits),
                                 static_cast<const Environment*>(&diamond)}) {
    std::map<std::uint64_t, std::set<std::pair<std::uint64_t, std::uint32_t>>> expected;
    for (std::uint64_t i = 0; i < env->state_count(); ++i)
      for (const auto& c : env->children(env->state_at(StateId{i})))
        expected[env->index(c.state).value].insert({i, c.action.value});
    for (std::uint64_t i = 0; i < env->state_count(); ++i) {
      std::set<std::pair<std::uint64_t, std::uint32_t>> got;
      for (const auto& p : env->parents(env->state_at(StateId{i}))) got.insert({env->index(p.state).value, p.action.value});
      CHECK(got == expected[i]);
      CHECK(env->num_parents(env->state_at(StateId{i})) == got.size());
    }
  }
}

TEST_CASE("encodings are one-hot blocks") {
  HypergridEnv grid(HypergridConfig::standard(3, 2));
  std::vector<double> out(6);
  grid.encode(State{{1, 2}, StateKind::interior}, out);
  CHECK(out == std::vector<double>{0, 1, 0, 0, 0, 1});

  BitSeqEnv bits(BitSeqConfig{2, 1, {"00"}, 1.0});
  std::vector<double> e(bits.encoding_dim());
  bits.encode(bits.initial_state(), e);
  CHECK(e == std::vector<double>{0, 0, 1, 0, 0, 1});
}

TEST_CASE("bit-sequence reward and structure") {
  BitSeqConfig cfg{4, 2, {"0000"}, 1.0};
  CHECK(bitseq_reward(cfg, "0011") == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
  CHECK(bitseq_reward(cfg, "0000") == 1.0);
  cfg.reward_exponent = 2.0;
  CHECK(bitseq_reward(cfg, "0011") == doctest::Approx(std::exp(-4.0)).epsilon(1e-14));
  CHECK(hamming("0110", "1100") == 2);

  BitSeqEnv env(BitSeqConfig{6, 2, {"000000", "111111"}, 2.0});
  const auto dag = DagView::build(env);
  CHECK(dag.num_states() == 125);  // (2^2 + 1)^3
  for (std::size_t i = 0; i < dag.num_states(); ++i) {
    const State s = env.state_at(StateId{i});
    std::size_t filled = 0;
    for (int w : s.cells) filled += w >= 0;
    CHECK(env.num_parents(s) == filled);
    CHECK(s.terminal() == (filled == 3));
  }
  for_each_trajectory(dag, 1'000'000, [](const IdTrajectory& t) { CHECK(t.length() == 3); });
  const State x = env.from_bits("011011");
  CHECK(x.terminal());
  CHECK(env.bits(x) == "011011");
}

TEST_CASE("mode generation is seeded, distinct and round-trips through a file") {
  const auto a = generate_modes(12, 8, 3), b = generate_modes(12, 8, 3), c = generate_modes(12, 8, 4);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(std::set<std::string>(a.begin(), a.end()).size() == 8);
  const auto file = std::filesystem::temp_directory_path() / "softgfn_modes_test.txt";
  write_modes(file, a);
  CHECK(read_modes(file) == a);
  std::filesystem::remove(file);
  CHECK_THROWS(BitSeqConfig{12, 5, {"000000000000"}, 1.0}.validate());
  CHECK_THROWS(BitSeqConfig{12, 3, {}, 1.0}.validate());
}

TEST_CASE("exact partition") {
  const auto p = exact_partition(ExplicitDag::diamond());
  CHECK(p.Z == 1.0);
  REQUIRE(p.target.size() == 1);
  CHECK(p.target[0].second == 1.0);

  const auto q = exact_partition(HypergridEnv(HypergridConfig::standard(2, 1)));
  CHECK(q.Z == doctest::Approx(1.002).epsilon(1e-14));
  CHECK(q.target[0].second == doctest::Approx(0.5).epsilon(1e-14));

  const auto r = exact_partition(HypergridEnv(HypergridConfig::standard(5, 3)));
  double sum = 0.0;
  for (auto& [x, pr] : r.target) sum += pr;
  CHECK(std::abs(sum - 1.0) <= 1e-12);
  CHECK_THROWS_AS(exact_partition(HypergridEnv(HypergridConfig::standard(20, 4)), 1000), CapacityError);
}

TEST_CASE("topological order and trajectory enumeration") {
  HypergridEnv env(HypergridConfig::standard(4, 2));
  const auto dag = DagView::build(env);
  std::vector<std::size_t> pos(dag.num_states());
  for (std::size_t k = 0; k < dag.topo().size(); ++k) pos[dag.topo()[k].value] = k;
  for (std::size_t e = 0; e < dag.num_edges(); ++e)
    CHECK(pos[dag.edge_source(e).value] < pos[dag.edge_target(e).value]);
  CHECK(dag.topo().front() == dag.initial());

  const auto all = enumerate_trajectories(dag);
  CHECK(all.size() == hypergrid_paths(4, 2));
  CHECK(hypergrid_paths(4, 2) == 69);
  for (const auto& t : all) {
    CHECK(t.states.front() == dag.initial());
    CHECK(dag.is_terminal(t.terminal()));
  }
  CHECK_THROWS_AS(enumerate_trajectories(dag, 10), CapacityError);
}

TEST_CASE("checked accessors reject invalid ids") {
  const auto env = ExplicitDag::diamond();
  CHECK(children(env, StateId{0}).size() == 2);
  CHECK(parents(env, StateId{3}).size() == 2);
  CHECK_THROWS_AS(children(env, StateId{9}), std::domain_error);
  CHECK_THROWS_AS(parents(env, StateId{9}), std::domain_error);
}
