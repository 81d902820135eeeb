// Serial reference kernels against their OpenMP counterparts, plus the whole
// engine on one layer. Run with OMP_NUM_THREADS set to compare scaling.

#include <benchmark/benchmark.h>

#include <vector>

#include "septq/engine.hpp"
#include "septq/instances.hpp"
#include "septq/kernels.hpp"

using namespace septq;
namespace k = septq::kernels;

namespace {

Matrix random(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  instances::Rng rng(seed);
  return instances::gaussian(rows, cols, rng);
}

template <auto Kernel>
void BM_gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random(n, n, 1), b = random(n, n, 2);
  Matrix out(n, n);
  for (auto _ : state) {
    Kernel(a, b, out);
    benchmark::DoNotOptimize(out.values().data());
  }
}

template <auto Kernel>
void BM_gram(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix x = random(n, 2 * n, 3);
  Matrix out(n, n);
  for (auto _ : state) {
    Kernel(x, 2.0, out);
    benchmark::DoNotOptimize(out.values().data());
  }
}

template <auto Kernel>
void BM_block_update(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t block = 32;
  const Matrix w0 = random(n, n, 4);
  const Matrix err = random(n, block, 5);
  const Matrix factor = random(n, n, 6);
  for (auto _ : state) {
    state.PauseTiming();
    Matrix w = w0;
    state.ResumeTiming();
    Kernel(w, block, err, factor, 0);
    benchmark::DoNotOptimize(w.values().data());
  }
}

template <auto Kernel>
void BM_importance(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix w = random(n, n, 7);
  const std::vector<double> diag(n, 0.5);
  const QuantGrid g = QuantGrid::per_matrix(2, 0.5, 1);
  Matrix out(n, n);
  for (auto _ : state) {
    Kernel(w, diag, g, out);
    benchmark::DoNotOptimize(out.values().data());
  }
}

void BM_run_septq(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  instances::Rng rng(8);
  const Matrix w = instances::heavy_tailed_weights(n, n, rng);
  const Matrix x = instances::calibration_inputs(n, 2 * n, rng);
  EngineConfig cfg;
  cfg.bits = 2;
  cfg.strategy.p = 1.0;
  for (auto _ : state) benchmark::DoNotOptimize(run_septq(w, x, cfg).metrics.layer_error);
}

}  // namespace

BENCHMARK(BM_gemm<k::serial::gemm>)->Name("gemm/serial")->Arg(128)->Arg(256);
BENCHMARK(BM_gemm<k::omp::gemm>)->Name("gemm/omp")->Arg(128)->Arg(256);
BENCHMARK(BM_gram<k::serial::gram>)->Name("gram/serial")->Arg(128)->Arg(256);
BENCHMARK(BM_gram<k::omp::gram>)->Name("gram/omp")->Arg(128)->Arg(256);
BENCHMARK(BM_block_update<k::serial::block_update>)->Name("block_update/serial")->Arg(256)->Arg(512);
BENCHMARK(BM_block_update<k::omp::block_update>)->Name("block_update/omp")->Arg(256)->Arg(512);
BENCHMARK(BM_importance<k::serial::importance_scores>)->Name("importance/serial")->Arg(256)->Arg(512);
BENCHMARK(BM_importance<k::omp::importance_scores>)->Name("importance/omp")->Arg(256)->Arg(512);
BENCHMARK(BM_run_septq)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
