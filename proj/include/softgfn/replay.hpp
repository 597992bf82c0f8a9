#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "softgfn/dag.hpp"
#include "softgfn/rng.hpp"

namespace softgfn {

/// (s, a, R, s', done): done = 1 iff s is terminal (an edge into the sink);
/// gfn_reward holds R(s) for such transitions and 0 otherwise.
struct Transition {
  State s;
  ActionId a;
  State s_next;
  double gfn_reward = 0.0;
  bool done = false;
};

/// Binary sum tree over a power-of-two number of leaves, paired with a max tree
/// over a separate per-leaf key.
class SumTree {
 public:
  explicit SumTree(std::size_t capacity);

  std::size_t capacity() const { return capacity_; }
  void set(std::size_t leaf, double value) { set(leaf, value, value); }
  /// Sum tree holds `value`, max tree holds `key`.
  void set(std::size_t leaf, double value, double key);
  double get(std::size_t leaf) const { return sum_[leaves_ + leaf]; }
  double total() const { return sum_[1]; }
  double max() const { return max_[1]; }
  /// Smallest leaf whose inclusive prefix sum exceeds `mass` (clamped to a
  /// leaf with positive value).
  std::size_t find(double mass) const;

 private:
  std::size_t capacity_;
  std::size_t leaves_;
  std::vector<double> sum_;
  std::vector<double> max_;
};

struct SampleIndex {
  std::size_t slot = 0;
  std::uint64_t serial = 0;  // insertion counter; detects eviction
};

struct ReplaySample {
  std::vector<SampleIndex> indices;
  std::vector<const Transition*> items;
  std::vector<double> weights;        // importance weights in (0, 1]
  std::vector<double> probabilities;  // P(i) at sampling time
};

struct PerConfig {
  std::size_t capacity = 100'000;
  double alpha = 0.5;   // priority exponent; 0 = uniform
  double beta = 0.0;    // importance-sampling exponent; 0 = no correction
  double min_priority = 1e-6;
};

/// Proportional prioritized replay: P(i) = p_i^alpha / sum_j p_j^alpha,
/// w_i = (N P(i))^-beta / max_batch w. FIFO eviction.
class PerBuffer {
 public:
  explicit PerBuffer(PerConfig cfg);

  const PerConfig& config() const { return cfg_; }
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  /// Stores t with the current maximum priority (1 when empty).
  void push(Transition t);
  /// Stores t with an explicit raw priority.
  void push(Transition t, double priority);

  /// B stratified draws: one uniform point in each of B equal slices of the total mass.
  ReplaySample sample(std::size_t batch, CounterRng& rng) const;
  /// Priority := max(value, min_priority). Evicted indices are skipped and counted.
  void update_priorities(std::span<const SampleIndex> indices, std::span<const double> values);

  double probability(std::size_t slot) const;
  double priority(std::size_t slot) const { return raw_[slot]; }
  double total_mass() const { return tree_.total(); }
  /// Linear-scan sum of leaf masses (for consistency checks).
  double linear_mass() const;
  std::uint64_t stale_updates() const { return stale_; }
  const Transition& at(std::size_t slot) const { return items_[slot]; }

 private:
  void store(Transition t, double priority);

  PerConfig cfg_;
  SumTree tree_;
  std::vector<Transition> items_;
  std::vector<double> raw_;
  std::vector<std::uint64_t> serial_;
  std::size_t next_ = 0;
  std::size_t size_ = 0;
  std::uint64_t inserted_ = 0;
  std::uint64_t stale_ = 0;
};

}  // namespace softgfn
