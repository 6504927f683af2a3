#include <cmath>

#include <benchmark/benchmark.h>

#include "hjreg/action.hpp"
#include "hjreg/catalog.hpp"
#include "hjreg/discounted.hpp"
#include "hjreg/laxoleinik.hpp"

namespace {

using namespace hjreg;

TonelliLagrangian cos_lagrangian() {
    catalog::MechanicalParams mp;
    mp.potential = catalog::Potential::kCos;
    return catalog::mechanical(mp);
}

void BM_MinimizeActionFree(benchmark::State& state) {
    const auto lag = catalog::free_particle(static_cast<int>(state.range(0)));
    const Vec x = Vec::Zero(lag.dim());
    const Vec y = Vec::Constant(lag.dim(), 0.5);
    for (auto _ : state) benchmark::DoNotOptimize(minimize_action(lag, 0.0, 0.3, x, y).value);
}
BENCHMARK(BM_MinimizeActionFree)->Arg(1)->Arg(2)->Arg(3);

void BM_MinimizeActionCos(benchmark::State& state) {
    const auto lag = cos_lagrangian();
    ActionOptions opts;
    opts.n_segments = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(minimize_action(lag, 0.0, 0.3, vec1(0.1), vec1(0.6), opts).value);
}
BENCHMARK(BM_MinimizeActionCos)->Arg(8)->Arg(16)->Arg(32);

void BM_LaxPlusMoreau(benchmark::State& state) {
    const int count = static_cast<int>(state.range(0));
    const auto u = GridFunction::sample(GridSpec::box(vec1(-3.0), vec1(3.0), {count, 1, 1}),
                                        [](const Vec& x) { return -std::abs(x(0)); });
    const auto kernel = make_kernel(catalog::free_particle(1));
    for (auto _ : state) benchmark::DoNotOptimize(lax_plus(u, *kernel, 0.0, 0.2).kappa0_bound);
    state.SetItemsProcessed(state.iterations() * count);
}
BENCHMARK(BM_LaxPlusMoreau)->Arg(501)->Arg(2001)->Unit(benchmark::kMillisecond);

void BM_LaxMinusSolverKernel(benchmark::State& state) {
    const auto u = GridFunction::sample(
        GridSpec::box(vec1(0.0), vec1(2.0 * M_PI), {static_cast<int>(state.range(0)), 1, 1}, BoundaryPolicy::kPeriodic),
        [](const Vec& x) { return std::cos(x(0)); });
    const auto lag = cos_lagrangian();
    for (auto _ : state) benchmark::DoNotOptimize(lax_minus(u, lag, 0.0, 0.1).kappa0_bound);
}
BENCHMARK(BM_LaxMinusSolverKernel)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_DiscountedCos(benchmark::State& state) {
    const int count = static_cast<int>(state.range(0));
    const auto grid = GridSpec::box(vec1(0.0), vec1(2.0 * M_PI), {count, 1, 1}, BoundaryPolicy::kPeriodic);
    const auto lag = cos_lagrangian();
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_discounted(lag, 0.5, grid, 4.0 * grid.spacing(0), 1e-9).iterations);
    }
}
BENCHMARK(BM_DiscountedCos)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_DiscountedStep2D(benchmark::State& state) {
    const auto grid = GridSpec::box(vec2(0, 0), vec2(2.0 * M_PI, 2.0 * M_PI), {32, 32, 1}, BoundaryPolicy::kPeriodic);
    catalog::MechanicalParams mp;
    mp.dim = 2;
    mp.potential = catalog::Potential::kCos;
    const auto lag = catalog::mechanical(mp);
    const auto u = GridFunction::sample(grid, [](const Vec&) { return 0.0; });
    std::vector<Vec> controls;
    for (auto _ : state) benchmark::DoNotOptimize(discounted_step(lag, 0.5, 0.2, u, controls, true).size());
}
BENCHMARK(BM_DiscountedStep2D)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
