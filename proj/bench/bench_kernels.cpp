// Serial reference vs OpenMP dense kernels at training shapes (batch x 256 hidden).
#include <benchmark/benchmark.h>

#include "softgfn/kernels.hpp"
#include "softgfn/rng.hpp"

using namespace softgfn;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t stream) {
  Matrix m(r, c);
  CounterRng rng(7, stream);
  for (auto& v : m.flat()) v = rng.normal();
  return m;
}

template <kernels::Backend B>
void BM_forward(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const auto X = random_matrix(batch, 256, 1), W = random_matrix(256, 256, 2);
  const std::vector<double> bias(256, 0.1);
  Matrix Y(batch, 256);
  for (auto _ : state) {
    kernels::dense_forward(B, X.cview(), W.cview(), bias, Y.view());
    benchmark::DoNotOptimize(Y.flat().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch * 256 * 256));
}

template <kernels::Backend B>
void BM_backward_params(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const auto X = random_matrix(batch, 256, 1), dY = random_matrix(batch, 256, 3);
  Matrix dW(256, 256);
  std::vector<double> db(256);
  for (auto _ : state) {
    kernels::dense_backward_params(B, X.cview(), dY.cview(), dW.view(), db);
    benchmark::DoNotOptimize(dW.flat().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch * 256 * 256));
}

template <kernels::Backend B>
void BM_backward_input(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const auto dY = random_matrix(batch, 256, 3), W = random_matrix(256, 256, 2);
  Matrix dX(batch, 256);
  for (auto _ : state) {
    kernels::dense_backward_input(B, dY.cview(), W.cview(), dX.view());
    benchmark::DoNotOptimize(dX.flat().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch * 256 * 256));
}

constexpr auto kSerial = kernels::Backend::serial;
constexpr auto kParallel = kernels::Backend::parallel;

}  // namespace

BENCHMARK(BM_forward<kSerial>)->Arg(16)->Arg(256);
BENCHMARK(BM_forward<kParallel>)->Arg(16)->Arg(256);
BENCHMARK(BM_backward_params<kSerial>)->Arg(16)->Arg(256);
BENCHMARK(BM_backward_params<kParallel>)->Arg(16)->Arg(256);
BENCHMARK(BM_backward_input<kSerial>)->Arg(16)->Arg(256);
BENCHMARK(BM_backward_input<kParallel>)->Arg(16)->Arg(256);

BENCHMARK_MAIN();
