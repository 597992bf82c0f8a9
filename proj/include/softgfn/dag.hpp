#pragma once

#include <compare>
#include <functional>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace softgfn {

/// Thrown when an enumeration would exceed its configured cap.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown on numerical failure during training (non-finite loss, target or gradient).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kDefaultStateCap = 10'000'000;
inline constexpr std::uint64_t kDefaultTrajectoryCap = 1'000'000;

struct StateId {
  std::uint64_t value = 0;
  friend auto operator<=>(const StateId&, const StateId&) = default;
};

struct ActionId {
  std::uint32_t value = 0;
  friend auto operator<=>(const ActionId&, const ActionId&) = default;
};

enum class StateKind : std::uint8_t { interior, terminal, sink };

/// Value representation of a DAG state. `cells` is environment specific:
/// hypergrid coordinates, bit-sequence words (-1 = empty), or a single node id
/// for explicit graphs.
struct State {
  std::vector<int> cells;
  StateKind kind = StateKind::interior;

  bool terminal() const { return kind == StateKind::terminal; }
  bool sink() const { return kind == StateKind::sink; }
  static State make_sink() { return State{{}, StateKind::sink}; }
  friend bool operator==(const State&, const State&) = default;
};

struct Child {
  ActionId action;
  State state;
};

struct Parent {
  State state;
  ActionId action;  // action taken in `state` that leads to the queried child
};

template <class S>
struct BasicTrajectory {
  std::vector<S> states;
  std::vector<ActionId> actions;

  std::size_t length() const { return actions.size(); }
  const S& terminal() const { return states.back(); }
};

using Trajectory = BasicTrajectory<State>;
using IdTrajectory = BasicTrajectory<StateId>;

/// A GFlowNet state space. Implementations are immutable after
/// construction and safe for concurrent reads.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual State initial_state() const = 0;
  virtual std::size_t max_actions() const = 0;

  /// Outgoing edges in canonical action order; empty for terminal states.
  virtual std::vector<Child> children(const State& s) const = 0;
  virtual std::vector<Parent> parents(const State& s) const = 0;
  virtual std::size_t num_parents(const State& s) const { return parents(s).size(); }
  virtual State step(const State& s, ActionId a) const = 0;
  /// mask[a] = 1 iff action a is available in s. mask.size() == max_actions().
  virtual void valid_actions(const State& s, std::span<std::uint8_t> mask) const;

  /// Strictly positive reward of a terminal state.
  virtual double reward(const State& x) const = 0;

  virtual std::size_t encoding_dim() const = 0;
  virtual void encode(const State& s, std::span<double> out) const = 0;

  /// Number of states when the space is enumerable; 0 if it does not fit in 64 bits.
  virtual std::uint64_t state_count() const = 0;
  virtual StateId index(const State& s) const = 0;
  virtual State state_at(StateId id) const = 0;
  virtual std::string to_string(const State& s) const = 0;

  bool enumerable(std::uint64_t cap = kDefaultStateCap) const {
    const auto n = state_count();
    return n != 0 && n <= cap;
  }
};

/// Dense, enumerated view of an environment: CSR adjacency indexed by StateId.
/// Built once; everything downstream (oracle, tabular models) reads it.
class DagView {
 public:
  static DagView build(const Environment& env, std::uint64_t cap = kDefaultStateCap);

  const Environment& env() const { return *env_; }
  std::size_t num_states() const { return terminal_.size(); }
  StateId initial() const { return initial_; }
  /// Extra absorbing state appended after all DAG states.
  StateId sink() const { return StateId{num_states()}; }

  bool is_terminal(StateId s) const { return terminal_[s.value] != 0; }
  double reward(StateId x) const { return reward_[x.value]; }

  /// Edge index range [begin, end) of s's outgoing edges.
  std::size_t edge_begin(StateId s) const { return child_offset_[s.value]; }
  std::size_t edge_end(StateId s) const { return child_offset_[s.value + 1]; }
  std::size_t num_edges() const { return edge_target_.size(); }
  StateId edge_source(std::size_t e) const { return edge_source_[e]; }
  StateId edge_target(std::size_t e) const { return edge_target_[e]; }
  ActionId edge_action(std::size_t e) const { return edge_action_[e]; }

  std::span<const StateId> parents_of(StateId s) const {
    return {parent_list_.data() + parent_offset_[s.value],
            parent_offset_[s.value + 1] - parent_offset_[s.value]};
  }
  std::size_t num_parents(StateId s) const {
    return parent_offset_[s.value + 1] - parent_offset_[s.value];
  }
  /// Edge index of (s -> t) or npos.
  std::size_t find_edge(StateId s, StateId t) const;

  std::span<const StateId> topo() const { return topo_; }
  std::span<const StateId> terminals() const { return terminals_; }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  const Environment* env_ = nullptr;
  StateId initial_;
  std::vector<std::uint8_t> terminal_;
  std::vector<double> reward_;
  std::vector<std::size_t> child_offset_;
  std::vector<StateId> edge_source_;
  std::vector<StateId> edge_target_;
  std::vector<ActionId> edge_action_;
  std::vector<std::size_t> parent_offset_;
  std::vector<StateId> parent_list_;
  std::vector<StateId> topo_;
  std::vector<StateId> terminals_;
};

struct TopoOrder {
  std::vector<StateId> order;
};

/// Checked accessors over an enumerable environment.
std::vector<std::pair<ActionId, StateId>> children(const Environment& env, StateId s);
std::vector<StateId> parents(const Environment& env, StateId s);
TopoOrder topo_order(const Environment& env, std::uint64_t cap = kDefaultStateCap);

/// Depth-first enumeration of every complete trajectory s0 -> ... -> x.
/// Throws CapacityError once more than `cap` trajectories are produced.
std::vector<IdTrajectory> enumerate_trajectories(const DagView& dag,
                                                 std::uint64_t cap = kDefaultTrajectoryCap);
/// Streaming form of the above; returns the number of trajectories visited.
std::uint64_t for_each_trajectory(const DagView& dag, std::uint64_t cap,
                                  const std::function<void(const IdTrajectory&)>& visit);

}  // namespace softgfn
