#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string_view>

namespace softgfn {

/// Counter-based generator: the i-th output is a pure function of
/// (key, i), where key is derived from (seed, stream). Streams with
/// different ids never interact, so rollouts, replay sampling and
/// initialization stay reproducible independently of each other.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t stream);
  CounterRng(std::uint64_t seed, std::string_view stream_name);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  double normal();
  /// Index drawn from unnormalized nonnegative weights.
  std::size_t categorical(std::span<const double> weights);

  std::uint64_t counter() const { return counter_; }
  /// Derive an independent child stream (e.g. one per trajectory).
  CounterRng split(std::uint64_t sub_stream) const;

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_name(std::string_view name);

}  // namespace softgfn
