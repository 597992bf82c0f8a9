#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "softgfn/envs.hpp"
#include "softgfn/oracle.hpp"
#include "softgfn/rollout.hpp"

namespace softgfn {

inline constexpr std::size_t kDefaultWindow = 200'000;

/// The last W terminal samples, kept as state ids with running counts.
class SampleWindow {
 public:
  explicit SampleWindow(std::size_t capacity = kDefaultWindow);

  void push(StateId x);
  std::size_t size() const { return ring_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t count(StateId x) const;
  double frequency(StateId x) const;

 private:
  std::size_t capacity_;
  std::deque<std::uint64_t> ring_;
  std::unordered_map<std::uint64_t, std::uint64_t> counts_;
};

/// (1/|X|) sum_x |R(x)/Z - empirical(x)| over every terminal of the target.
double l1_distance(const SampleWindow& window, const Partition& target);
/// (1/n) sum_i |p_i - q_i|.
double l1_distance(std::span<const double> p, std::span<const double> q);
/// 0.5 sum_i |p_i - q_i|.
double total_variation(std::span<const double> p, std::span<const double> q);

/// Exact terminal distribution of a policy, aligned with dag.terminals().
std::vector<double> exact_model_distribution(const DagView& dag, const TabularPolicy& pi);
/// R(x)/Z aligned with dag.terminals().
std::vector<double> target_distribution(const DagView& dag);

/// P(x) ~= (1/N) sum_i P_F(tau_i) / P_B(tau_i | x) with tau_i ~ P_B(. | x),
/// P_F = softmax(scores / lambda), P_B uniform.
double mc_prob_estimate(const Environment& env, const ScoreFn& scores, double lambda, const State& x, std::size_t N,
                        CounterRng& rng);

/// Tracks which modes have had a sample within Hamming distance delta.
class ModeTracker {
 public:
  ModeTracker(std::vector<std::string> modes, int delta);

  void observe(std::string_view x);
  std::size_t found() const { return found_count_; }
  std::size_t total() const { return modes_.size(); }

 private:
  std::vector<std::string> modes_;
  std::vector<std::uint8_t> found_;
  std::size_t found_count_ = 0;
  int delta_;
};

std::size_t modes_found(std::span<const std::string> history, std::span<const std::string> modes, int delta);

/// Spearman rank correlation with average ranks for ties; nullopt when either input is constant.
std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys);

struct MetricsRow {
  std::uint64_t trajectories = 0;
  std::optional<double> l1;
  std::optional<double> tv_exact;
  double loss = 0.0;
  std::optional<std::size_t> modes;
  double seconds = 0.0;
  std::uint64_t seed = 0;
};

/// CSV sink with header `trajectories,l1,tv_exact,loss,modes,seconds,seed`.
/// Missing values are written as empty fields.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& file);

  void write(const MetricsRow& row);
  const std::vector<MetricsRow>& rows() const { return rows_; }

 private:
  std::ofstream out_;
  std::vector<MetricsRow> rows_;
};

std::string format_number(double v);

}  // namespace softgfn
