// Serial reference vs OpenMP kernels on ensemble-shaped inputs.

#include <benchmark/benchmark.h>

#include "enkf/kernels.hpp"
#include "enkf/models.hpp"

namespace {

using enkf::Index;
using enkf::Matrix;

Matrix input(Index rows, Index cols, std::uint64_t seed) {
  return enkf::standard_normal(rows, cols, seed);
}

void bm_crossprod_serial(benchmark::State& state) {
  const Matrix du = input(state.range(0), state.range(1), 1);
  const Matrix dg = input(state.range(0) / 2, state.range(1), 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(enkf::kernels::serial::crossprod(du, dg));
  }
}

void bm_crossprod_parallel(benchmark::State& state) {
  const Matrix du = input(state.range(0), state.range(1), 1);
  const Matrix dg = input(state.range(0) / 2, state.range(1), 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(enkf::kernels::crossprod(du, dg));
  }
}

void bm_matmul_serial(benchmark::State& state) {
  const Matrix a = input(state.range(0), state.range(0), 3);
  const Matrix b = input(state.range(0), state.range(1), 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(enkf::kernels::serial::matmul(a, b));
  }
}

void bm_matmul_parallel(benchmark::State& state) {
  const Matrix a = input(state.range(0), state.range(0), 3);
  const Matrix b = input(state.range(0), state.range(1), 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(enkf::kernels::matmul(a, b));
  }
}

void bm_threshold_serial(benchmark::State& state) {
  const Matrix b = input(state.range(0), state.range(0), 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(enkf::kernels::serial::threshold(b, 0.5));
  }
}

void bm_threshold_parallel(benchmark::State& state) {
  const Matrix b = input(state.range(0), state.range(0), 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(enkf::kernels::threshold(b, 0.5));
  }
}

void bm_col_mean_serial(benchmark::State& state) {
  const Matrix m = input(state.range(0), state.range(1), 6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(enkf::kernels::serial::col_mean(m));
  }
}

void bm_col_mean_parallel(benchmark::State& state) {
  const Matrix m = input(state.range(0), state.range(1), 6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(enkf::kernels::col_mean(m));
  }
}

}  // namespace

BENCHMARK(bm_crossprod_serial)->Args({200, 1000})->Args({400, 2000});
BENCHMARK(bm_crossprod_parallel)->Args({200, 1000})->Args({400, 2000});
BENCHMARK(bm_matmul_serial)->Args({200, 1000})->Args({400, 2000});
BENCHMARK(bm_matmul_parallel)->Args({200, 1000})->Args({400, 2000});
BENCHMARK(bm_threshold_serial)->Arg(400)->Arg(1000);
BENCHMARK(bm_threshold_parallel)->Arg(400)->Arg(1000);
BENCHMARK(bm_col_mean_serial)->Args({200, 5000});
BENCHMARK(bm_col_mean_parallel)->Args({200, 5000});

BENCHMARK_MAIN();
