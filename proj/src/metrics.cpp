#include "softgfn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "softgfn/qmodel.hpp"

namespace softgfn {

SampleWindow::SampleWindow(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("SampleWindow: capacity must be positive");
}

void SampleWindow::push(StateId x) {
  if (ring_.size() == capacity_) {
    auto it = counts_.find(ring_.front());
    if (--it->second == 0) counts_.erase(it);
    ring_.pop_front();
  }
  ring_.push_back(x.value);
  ++counts_[x.value];
}

std::uint64_t SampleWindow::count(StateId x) const {
  auto it = counts_.find(x.value);
  return it == counts_.end() ? 0 : it->second;
}

double SampleWindow::frequency(StateId x) const {
  return ring_.empty() ? 0.0 : static_cast<double>(count(x)) / static_cast<double>(ring_.size());
}

double l1_distance(const SampleWindow& window, const Partition& target) {
  if (window.size() == 0) throw std::invalid_argument("l1_distance: empty window");
  if (target.target.empty()) throw std::invalid_argument("l1_distance: empty target");
  double acc = 0.0;
  for (const auto& [x, p] : target.target) acc += std::abs(p - window.frequency(x));
  return acc / static_cast<double>(target.target.size());
}

double l1_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) throw std::invalid_argument("l1_distance: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
  return acc / static_cast<double>(p.size());
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("total_variation: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
  return 0.5 * acc;
}

std::vector<double> exact_model_distribution(const DagView& dag, const TabularPolicy& pi) {
  return terminal_distribution(dag, pi);
}

std::vector<double> target_distribution(const DagView& dag) {
  std::vector<double> out;
  double z = 0.0;
  for (StateId x : dag.terminals()) z += dag.reward(x);
  for (StateId x : dag.terminals()) out.push_back(dag.reward(x) / z);
  return out;
}

double mc_prob_estimate(const Environment& env, const ScoreFn& scores, double lambda, const State& x, std::size_t N,
                        CounterRng& rng) {
  if (!x.terminal()) throw std::invalid_argument("mc_prob_estimate: x must be terminal");
  if (N == 0) throw std::invalid_argument("mc_prob_estimate: N must be positive");
  const std::size_t A = env.max_actions();
  std::vector<State> states;
  std::vector<ActionId> actions;
  std::vector<std::size_t> owner;
  std::vector<double> log_ratio(N, 0.0);
  const State s0 = env.initial_state();
  for (std::size_t i = 0; i < N; ++i) {
    State cur = x;
    while (!(cur == s0)) {
      auto ps = env.parents(cur);
      if (ps.empty()) throw std::logic_error("mc_prob_estimate: state without parents");
      const std::size_t j = rng.below(ps.size());
      log_ratio[i] += std::log(static_cast<double>(ps.size()));  // -log P_B
      states.push_back(ps[j].state);
      actions.push_back(ps[j].action);
      owner.push_back(i);
      cur = std::move(ps[j].state);
    }
  }
  if (!states.empty()) {
    const auto masks = action_masks(env, states);
    Matrix q;
    scores(states, masks, q);
    std::vector<double> logp(A);
    for (std::size_t r = 0; r < states.size(); ++r) {
      masked_log_softmax(q.row(r), std::span<const std::uint8_t>(masks).subspan(r * A, A), lambda, logp);
      log_ratio[owner[r]] += logp[actions[r].value];
    }
  }
  double acc = 0.0;
  for (double lr : log_ratio) acc += std::exp(lr);
  return acc / static_cast<double>(N);
}

ModeTracker::ModeTracker(std::vector<std::string> modes, int delta)
    : modes_(std::move(modes)), found_(modes_.size(), 0), delta_(delta) {}

void ModeTracker::observe(std::string_view x) {
  if (found_count_ == modes_.size()) return;
  for (std::size_t m = 0; m < modes_.size(); ++m) {
    if (found_[m]) continue;
    if (hamming(modes_[m], x) <= delta_) {
      found_[m] = 1;
      ++found_count_;
    }
  }
}

std::size_t modes_found(std::span<const std::string> history, std::span<const std::string> modes, int delta) {
  ModeTracker t({modes.begin(), modes.end()}, delta);
  for (const auto& x : history) t.observe(x);
  return t.found();
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw std::invalid_argument("spearman: need equal lengths >= 2");
  const auto rx = average_ranks(xs), ry = average_ranks(ys);
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& file) : out_(file) {
  if (!out_) throw std::runtime_error("cannot write " + file.string());
  out_ << "trajectories,l1,tv_exact,loss,modes,seconds,seed\n";
}

void MetricsWriter::write(const MetricsRow& row) {
  if (!rows_.empty() && row.trajectories <= rows_.back().trajectories)
    throw std::logic_error("MetricsWriter: trajectories must be strictly increasing");
  out_ << row.trajectories << ',' << (row.l1 ? format_number(*row.l1) : "") << ','
       << (row.tv_exact ? format_number(*row.tv_exact) : "") << ',' << format_number(row.loss) << ','
       << (row.modes ? std::to_string(*row.modes) : "") << ',' << format_number(row.seconds) << ',' << row.seed
       << '\n';
  out_.flush();
  rows_.push_back(row);
}

}  // namespace softgfn
