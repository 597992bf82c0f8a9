#include "softgfn/dag.hpp"

#include <algorithm>
#include <functional>
#include <queue>

namespace softgfn {

void Environment::valid_actions(const State& s, std::span<std::uint8_t> mask) const {
  std::fill(mask.begin(), mask.end(), std::uint8_t{0});
  for (const auto& c : children(s)) mask[c.action.value] = 1;
}

namespace {

void check_id(const Environment& env, StateId s) {
  const auto n = env.state_count();
  if (n == 0) throw CapacityError(env.name() + ": state space is not enumerable");
  if (s.value >= n) throw std::domain_error("invalid StateId " + std::to_string(s.value));
}

}  // namespace

std::vector<std::pair<ActionId, StateId>> children(const Environment& env, StateId s) {
  check_id(env, s);
  std::vector<std::pair<ActionId, StateId>> out;
  for (auto& c : env.children(env.state_at(s))) out.emplace_back(c.action, env.index(c.state));
  return out;
}

std::vector<StateId> parents(const Environment& env, StateId s) {
  check_id(env, s);
  std::vector<StateId> out;
  for (auto& p : env.parents(env.state_at(s))) out.push_back(env.index(p.state));
  return out;
}

DagView DagView::build(const Environment& env, std::uint64_t cap) {
  const auto n = env.state_count();
  if (n == 0 || n > cap) {
    throw CapacityError(env.name() + ": " + (n == 0 ? std::string("unbounded") : std::to_string(n)) +
                        " states exceeds enumeration cap " + std::to_string(cap));
  }
  DagView dag;
  dag.env_ = &env;
  dag.initial_ = env.index(env.initial_state());
  dag.terminal_.assign(n, 0);
  dag.reward_.assign(n, 0.0);
  dag.child_offset_.assign(n + 1, 0);

  std::vector<std::size_t> in_degree(n, 0);
  for (std::uint64_t i = 0; i < n; ++i) {
    const StateId sid{i};
    const State s = env.state_at(sid);
    if (s.terminal()) {
      dag.terminal_[i] = 1;
      dag.reward_[i] = env.reward(s);
      dag.terminals_.push_back(sid);
    }
    for (auto& c : env.children(s)) {
      const StateId t = env.index(c.state);
      dag.edge_source_.push_back(sid);
      dag.edge_target_.push_back(t);
      dag.edge_action_.push_back(c.action);
      ++in_degree[t.value];
    }
    dag.child_offset_[i + 1] = dag.edge_target_.size();
  }

  dag.parent_offset_.assign(n + 1, 0);
  for (std::uint64_t i = 0; i < n; ++i) dag.parent_offset_[i + 1] = dag.parent_offset_[i] + in_degree[i];
  dag.parent_list_.resize(dag.edge_target_.size());
  std::vector<std::size_t> fill(dag.parent_offset_.begin(), dag.parent_offset_.end() - 1);
  for (std::size_t e = 0; e < dag.edge_target_.size(); ++e) {
    dag.parent_list_[fill[dag.edge_target_[e].value]++] = dag.edge_source_[e];
  }

  // Kahn's algorithm with a min-heap on id: deterministic, s0 first.
  std::priority_queue<std::uint64_t, std::vector<std::uint64_t>, std::greater<>> ready;
  std::vector<std::size_t> remaining = in_degree;
  for (std::uint64_t i = 0; i < n; ++i)
    if (remaining[i] == 0) ready.push(i);
  dag.topo_.reserve(n);
  while (!ready.empty()) {
    const auto i = ready.top();
    ready.pop();
    dag.topo_.push_back(StateId{i});
    for (std::size_t e = dag.child_offset_[i]; e < dag.child_offset_[i + 1]; ++e) {
      const auto t = dag.edge_target_[e].value;
      if (--remaining[t] == 0) ready.push(t);
    }
  }
  if (dag.topo_.size() != n) throw std::domain_error(env.name() + ": graph has a cycle");
  return dag;
}

std::size_t DagView::find_edge(StateId s, StateId t) const {
  for (std::size_t e = edge_begin(s); e < edge_end(s); ++e)
    if (edge_target_[e] == t) return e;
  return npos;
}

TopoOrder topo_order(const Environment& env, std::uint64_t cap) {
  const auto dag = DagView::build(env, cap);
  return TopoOrder{std::vector<StateId>(dag.topo().begin(), dag.topo().end())};
}

std::uint64_t for_each_trajectory(const DagView& dag, std::uint64_t cap,
                                  const std::function<void(const IdTrajectory&)>& visit) {
  std::uint64_t count = 0;
  IdTrajectory current;
  current.states.push_back(dag.initial());
  std::vector<std::size_t> next_edge{dag.edge_begin(dag.initial())};
  while (!next_edge.empty()) {
    const StateId top = current.states.back();
    if (dag.is_terminal(top)) {
      if (++count > cap) throw CapacityError("trajectory enumeration exceeds cap " + std::to_string(cap));
      visit(current);
    }
    if (dag.is_terminal(top) || next_edge.back() == dag.edge_end(top)) {
      next_edge.pop_back();
      current.states.pop_back();
      if (!current.actions.empty()) current.actions.pop_back();
      continue;
    }
    const std::size_t e = next_edge.back()++;
    current.actions.push_back(dag.edge_action(e));
    current.states.push_back(dag.edge_target(e));
    next_edge.push_back(dag.edge_begin(dag.edge_target(e)));
  }
  return count;
}

std::vector<IdTrajectory> enumerate_trajectories(const DagView& dag, std::uint64_t cap) {
  std::vector<IdTrajectory> out;
  for_each_trajectory(dag, cap, [&](const IdTrajectory& t) { out.push_back(t); });
  return out;
}

}  // namespace softgfn
