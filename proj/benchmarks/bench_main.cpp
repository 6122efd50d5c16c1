#include "hicov/allocation.hpp"
#include "hicov/estimators.hpp"
#include "hicov/models.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace hicov;

DataPanel nested_panel(int p, int n) {
    Rng rng(1);
    return sample_panel(build_nested_sigma(p, 0.1), n, NoiseDistribution::gaussian(), rng);
}

void bm_estimator(benchmark::State& state, EstimatorKind kind) {
    const int p = static_cast<int>(state.range(0));
    const auto panel = nested_panel(p, 2 * p);
    EstimatorSpec spec;
    spec.kind = kind;
    for (auto _ : state) {
        const EstimationWorkspace ws(panel);
        benchmark::DoNotOptimize(estimate(ws, spec));
    }
}

BENCHMARK_CAPTURE(bm_estimator, naive, EstimatorKind::Naive)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_estimator, linear, EstimatorKind::Linear)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_estimator, alca, EstimatorKind::Alca)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_estimator, lp, EstimatorKind::LP)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_estimator, ycm, EstimatorKind::Ycm)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_estimator, two_step_ycm, EstimatorKind::TwoStepYcm)
    ->Arg(50)
    ->Arg(100)
    ->Unit(benchmark::kMillisecond);

void bm_fixed_point(benchmark::State& state) {
    const int p = static_cast<int>(state.range(0));
    const auto panel = nested_panel(p, 2 * p);
    const Matrix centered = panel.demeaned().values();
    for (auto _ : state) benchmark::DoNotOptimize(ycm_fixed_point(centered, 0.3, 1e-8, 500));
}
BENCHMARK(bm_fixed_point)->Arg(50)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

void bm_allocation(benchmark::State& state, Strategy strategy) {
    const int p = static_cast<int>(state.range(0));
    const auto xi = estimate_linear(nested_panel(p, 2 * p)).estimate;
    for (auto _ : state) benchmark::DoNotOptimize(allocate(strategy, xi));
}

BENCHMARK_CAPTURE(bm_allocation, mvp, Strategy::Mvp)->Arg(100)->Arg(400)->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(bm_allocation, mvp_long_only, Strategy::MvpLongOnly)
    ->Arg(100)
    ->Arg(400)
    ->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(bm_allocation, hrp, Strategy::Hrp)->Arg(100)->Arg(400)->Unit(benchmark::kMicrosecond);

void bm_nested_eigenvalues(benchmark::State& state) {
    const int p = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(nested_sigma_eigenvalues(p, 0.1));
}
BENCHMARK(bm_nested_eigenvalues)->Arg(100)->Arg(400)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
