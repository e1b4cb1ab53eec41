// Serial reference vs OpenMP-parallel window solves on a synthetic panel.
// Use --benchmark_filter to pick sizes; OMP_NUM_THREADS sets the team.

#include <random>

#include <benchmark/benchmark.h>

#include "kmpa/backtest.hpp"
#include "kmpa/mpaerl.hpp"

namespace {

kmpa::Matrix synthetic_relatives(kmpa::Index T, kmpa::Index N) {
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> mean(0.0, 0.03), vol(0.02, 0.08);
    kmpa::Matrix X(T, N);
    for (kmpa::Index j = 0; j < N; ++j) {
        std::normal_distribution<double> r(mean(rng), vol(rng));
        for (kmpa::Index t = 0; t < T; ++t) X(t, j) = std::max(1.0 + r(rng), 0.05);
    }
    return X;
}

kmpa::WindowStrategy strategy() {
    return [](const kmpa::Matrix& w) {
        const kmpa::Portfolio p = kmpa::solve_window(w, kmpa::MpaerlParams{});
        return kmpa::WindowDecision{p.weights, p.diagnostics.converged, p.diagnostics.iterations};
    };
}

void BM_BacktestSerial(benchmark::State& state) {
    const kmpa::Matrix X = synthetic_relatives(state.range(0), state.range(1));
    const auto s = strategy();
    for (auto _ : state) benchmark::DoNotOptimize(kmpa::run_backtest_serial(X, 18, s));
    state.SetItemsProcessed(state.iterations() * (state.range(0) - 18));
}

void BM_BacktestParallel(benchmark::State& state) {
    const kmpa::Matrix X = synthetic_relatives(state.range(0), state.range(1));
    const auto s = strategy();
    for (auto _ : state) benchmark::DoNotOptimize(kmpa::run_backtest(X, 18, s, kmpa::Execution::Parallel));
    state.SetItemsProcessed(state.iterations() * (state.range(0) - 18));
}

}  // namespace

BENCHMARK(BM_BacktestSerial)->Args({120, 6})->Args({240, 25})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_BacktestParallel)->Args({120, 6})->Args({240, 25})->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
