#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "softgfn/dag.hpp"

namespace softgfn {

struct HypergridConfig {
  int H = 8;
  int D = 2;
  double R0 = 1e-3;
  double R1 = 0.5;
  double R2 = 2.0;

  static HypergridConfig standard(int H, int D) { return {H, D, 1e-3, 0.5, 2.0}; }
  /// Sparser corner modes with a deeper trough.
  static HypergridConfig hard(int H, int D) { return {H, D, 1e-4, 1.0, 3.0}; }
  void validate() const;
};

/// Corner-mode reward of a hypergrid cell.
double hypergrid_reward(const HypergridConfig& cfg, std::span<const int> coords);

/// D-dimensional grid of side H. Interior state (c_1..c_D) has increment
/// actions 0..D-1 (when c_i < H-1) and a terminate action D that leads to its
/// terminal copy. Ids: interior cells first (dim 0 least significant), then
/// the H^D terminal copies in the same order.
class HypergridEnv final : public Environment {
 public:
  explicit HypergridEnv(HypergridConfig cfg);

  const HypergridConfig& config() const { return cfg_; }

  std::string name() const override;
  State initial_state() const override;
  std::size_t max_actions() const override { return static_cast<std::size_t>(cfg_.D) + 1; }
  std::vector<Child> children(const State& s) const override;
  std::vector<Parent> parents(const State& s) const override;
  std::size_t num_parents(const State& s) const override;
  State step(const State& s, ActionId a) const override;
  void valid_actions(const State& s, std::span<std::uint8_t> mask) const override;
  double reward(const State& x) const override;
  std::size_t encoding_dim() const override { return static_cast<std::size_t>(cfg_.D * cfg_.H); }
  void encode(const State& s, std::span<double> out) const override;
  std::uint64_t state_count() const override { return 2 * cells_; }
  StateId index(const State& s) const override;
  State state_at(StateId id) const override;
  std::string to_string(const State& s) const override;

 private:
  void check(const State& s) const;

  HypergridConfig cfg_;
  std::uint64_t cells_ = 0;  // H^D, 0 on overflow
};

struct BitSeqConfig {
  int n = 12;
  int k = 3;
  std::vector<std::string> modes;  // n-character strings over {0,1}
  double reward_exponent = 2.0;

  int positions() const { return n / k; }
  int vocab() const { return 1 << k; }
  void validate() const;
};

/// Seeded mode set of `count` distinct uniform n-bit strings.
std::vector<std::string> generate_modes(int n, int count, std::uint64_t seed);
std::vector<std::string> read_modes(const std::filesystem::path& file);
void write_modes(const std::filesystem::path& file, const std::vector<std::string>& modes);

int hamming(std::string_view a, std::string_view b);
double bitseq_reward(const BitSeqConfig& cfg, std::string_view x);

/// Non-autoregressive bit sequences: n/k word slots, each empty or holding a
/// k-bit word. Action (position, word) -> position * 2^k + word. A state is
/// terminal once every slot is filled.
class BitSeqEnv final : public Environment {
 public:
  explicit BitSeqEnv(BitSeqConfig cfg);

  const BitSeqConfig& config() const { return cfg_; }
  std::string bits(const State& s) const;
  State from_bits(std::string_view x) const;

  std::string name() const override;
  State initial_state() const override;
  std::size_t max_actions() const override;
  std::vector<Child> children(const State& s) const override;
  std::vector<Parent> parents(const State& s) const override;
  std::size_t num_parents(const State& s) const override;
  State step(const State& s, ActionId a) const override;
  void valid_actions(const State& s, std::span<std::uint8_t> mask) const override;
  double reward(const State& x) const override;
  std::size_t encoding_dim() const override;
  void encode(const State& s, std::span<double> out) const override;
  std::uint64_t state_count() const override { return count_; }
  StateId index(const State& s) const override;
  State state_at(StateId id) const override;
  std::string to_string(const State& s) const override;

 private:
  void check(const State& s) const;

  BitSeqConfig cfg_;
  std::uint64_t count_ = 0;
};

/// Small hand-built DAG used as a test fixture. Node 0 is the initial state;
/// actions index a node's child list in insertion order; one-hot encoding.
class ExplicitDag final : public Environment {
 public:
  ExplicitDag(std::string name, std::size_t num_nodes,
              std::vector<std::pair<std::size_t, std::size_t>> edges,
              std::vector<std::pair<std::size_t, double>> terminal_rewards);

  /// s0 -> x
  static ExplicitDag chain(double reward = 2.0);
  /// s0 -> {a, b} -> x; ids s0=0, a=1, b=2, x=3.
  static ExplicitDag diamond(double reward = 1.0);

  std::string name() const override { return name_; }
  State initial_state() const override { return node(0); }
  std::size_t max_actions() const override { return max_out_; }
  std::vector<Child> children(const State& s) const override;
  std::vector<Parent> parents(const State& s) const override;
  State step(const State& s, ActionId a) const override;
  double reward(const State& x) const override;
  std::size_t encoding_dim() const override { return out_.size(); }
  void encode(const State& s, std::span<double> out) const override;
  std::uint64_t state_count() const override { return out_.size(); }
  StateId index(const State& s) const override;
  State state_at(StateId id) const override;
  std::string to_string(const State& s) const override;

 private:
  State node(std::size_t i) const;
  std::size_t id_of(const State& s) const;

  std::string name_;
  std::vector<std::vector<std::size_t>> out_;
  std::vector<std::vector<std::pair<std::size_t, std::uint32_t>>> in_;
  std::vector<double> reward_;  // 0 for non-terminal nodes
  std::size_t max_out_ = 1;
};

struct Partition {
  double Z = 0.0;
  std::vector<std::pair<StateId, double>> target;  // terminal -> R(x)/Z, ascending id
};

/// Exact normalizing constant by summing rewards over every terminal state.
Partition exact_partition(const Environment& env, std::uint64_t cap = kDefaultStateCap);

}  // namespace softgfn
