#include <cmath>
#include <numeric>

#include "doctest.h"
#include "softgfn/replay.hpp"
#include "softgfn/rng.hpp"

using namespace softgfn;

namespace {

Transition tagged(int tag) { return Transition{State{{tag}}, ActionId{0}, State{{tag + 1}}, 0.0, false}; }

int tag_of(const Transition& t) { return t.s.cells[0]; }

}  // namespace

TEST_CASE("sum tree prefix search") {
  SumTree tree(5);
  const double v[] = {1.0, 0.0, 2.0, 0.5, 1.5};
  for (std::size_t i = 0; i < 5; ++i) tree.set(i, v[i]);
  CHECK(tree.total() == 5.0);
  CHECK(tree.max() == 2.0);
  CHECK(tree.find(0.0) == 0);
  CHECK(tree.find(0.999) == 0);
  CHECK(tree.find(1.0) == 2);
  CHECK(tree.find(2.999) == 2);
  CHECK(tree.find(3.2) == 3);
  CHECK(tree.find(4.9) == 4);
  CHECK(tree.find(5.0) == 4);  // clamped
  tree.set(2, 0.0, 7.0);
  CHECK(tree.total() == 3.0);
  CHECK(tree.max() == 7.0);
}

TEST_CASE("probabilities follow priority to the alpha") {
  PerBuffer buf(PerConfig{.capacity = 8, .alpha = 1.0});
  buf.push(tagged(0), 1.0);
  buf.push(tagged(1), 3.0);
  CHECK(buf.probability(0) == doctest::Approx(0.25));
  CHECK(buf.probability(1) == doctest::Approx(0.75));

  PerBuffer half(PerConfig{.capacity = 8, .alpha = 0.5});
  half.push(tagged(0), 1.0);
  half.push(tagged(1), 4.0);
  CHECK(half.probability(0) == doctest::Approx(1.0 / 3.0));

  PerBuffer flat(PerConfig{.capacity = 8, .alpha = 0.0});
  for (int i = 0; i < 4; ++i) flat.push(tagged(i), 1.0 + 10.0 * i);
  for (std::size_t i = 0; i < 4; ++i) CHECK(flat.probability(i) == doctest::Approx(0.25));
}

TEST_CASE("importance weights") {
  CounterRng rng(1, "replay");
  PerBuffer unit(PerConfig{.capacity = 8, .alpha = 1.0, .beta = 0.0});
  for (int i = 0; i < 4; ++i) unit.push(tagged(i), 1.0 + i);
  for (double w : unit.sample(16, rng).weights) CHECK(w == 1.0);

  PerBuffer full(PerConfig{.capacity = 8, .alpha = 1.0, .beta = 1.0});
  full.push(tagged(0), 1.0);
  full.push(tagged(1), 3.0);
  const auto s = full.sample(8, rng);
  double wmax = 0.0;
  for (std::size_t k = 0; k < s.weights.size(); ++k) {
    const double raw = 1.0 / (2.0 * s.probabilities[k]);
    wmax = std::max(wmax, raw);
  }
  for (std::size_t k = 0; k < s.weights.size(); ++k)
    CHECK(s.weights[k] == doctest::Approx(1.0 / (2.0 * s.probabilities[k]) / wmax));
}

TEST_CASE("new items take the current maximum priority") {
  PerBuffer buf(PerConfig{.capacity = 8, .alpha = 0.5});
  buf.push(tagged(0));
  CHECK(buf.priority(0) == 1.0);
  buf.push(tagged(1), 9.0);
  buf.push(tagged(2));
  CHECK(buf.priority(2) == 9.0);
  CounterRng rng(2, "replay");
  CHECK_THROWS_AS(PerBuffer(PerConfig{}).sample(4, rng), std::logic_error);
}

TEST_CASE("eviction is FIFO and stale updates are skipped") {
  PerBuffer buf(PerConfig{.capacity = 3, .alpha = 1.0});
  CounterRng rng(3, "replay");
  buf.push(tagged(0), 1.0);
  buf.push(tagged(1), 1.0);
  buf.push(tagged(2), 1.0);
  const auto s = buf.sample(3, rng);
  buf.push(tagged(3), 1.0);  // evicts tag 0 in slot 0
  CHECK(buf.size() == 3);
  CHECK(tag_of(buf.at(0)) == 3);
  CHECK(tag_of(buf.at(1)) == 1);

  std::vector<double> values(s.indices.size(), 5.0);
  buf.update_priorities(s.indices, values);
  std::size_t stale = 0;
  for (auto& i : s.indices) stale += i.slot == 0;
  CHECK(buf.stale_updates() == stale);
  CHECK(buf.priority(0) == 1.0);

  std::vector<SampleIndex> one{s.indices[0]};
  const double tiny[] = {0.0};
  if (one[0].slot != 0) {
    buf.update_priorities(one, tiny);
    CHECK(buf.priority(one[0].slot) == 1e-6);
  }
}

TEST_CASE("tree total matches a linear sum after many operations") {
  PerBuffer buf(PerConfig{.capacity = 1000, .alpha = 0.7});
  CounterRng rng(4, "ops");
  for (int op = 0; op < 20000; ++op) {
    if (buf.size() < 10 || rng.uniform() < 0.5) {
      buf.push(tagged(op), 0.01 + 10.0 * rng.uniform());
    } else {
      const auto s = buf.sample(8, rng);
      std::vector<double> v(s.indices.size());
      for (auto& x : v) x = 5.0 * rng.uniform();
      buf.update_priorities(s.indices, v);
    }
  }
  CHECK(std::abs(buf.total_mass() - buf.linear_mass()) <= 1e-9 * buf.linear_mass());
  double p = 0.0;
  for (std::size_t i = 0; i < buf.size(); ++i) p += buf.probability(i);
  CHECK(p == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sampling frequencies are within four sigma of the probabilities") {
  CounterRng rng(5, "freq");
  for (double alpha : {0.5, 1.0}) {
    PerBuffer buf(PerConfig{.capacity = 16, .alpha = alpha});
    std::vector<double> prio(10);
    for (std::size_t i = 0; i < prio.size(); ++i) {
      prio[i] = 0.1 + 3.0 * rng.uniform();
      buf.push(tagged(static_cast<int>(i)), prio[i]);
    }
    double norm = 0.0;
    for (double p : prio) norm += std::pow(p, alpha);
    const int draws = 200000, batch = 100;
    std::vector<int> counts(prio.size(), 0);
    for (int d = 0; d < draws / batch; ++d)
      for (auto* t : buf.sample(batch, rng).items) ++counts[tag_of(*t)];
    for (std::size_t i = 0; i < prio.size(); ++i) {
      const double p = std::pow(prio[i], alpha) / norm;
      const double sigma = std::sqrt(draws * p * (1.0 - p));
      CHECK(std::abs(counts[i] - draws * p) <= 4.0 * sigma);
    }
  }
}
