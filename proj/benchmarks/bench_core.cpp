#include <benchmark/benchmark.h>

#include "mcem/em.hpp"
#include "mcem/glmm.hpp"
#include "mcem/lmm.hpp"
#include "mcem/rng.hpp"

namespace {

const mcem::GroupedDataset& bulls() { return mcem::bulls_data(); }

const mcem::PanelDataset& panel() {
    static const mcem::PanelDataset data =
        mcem::glmm_synthetic(10, 15, 6.0, 2.0, 606);
    return data;
}

void BM_normal_draws(benchmark::State& state) {
    mcem::RngStream rng(12345);
    double acc = 0;
    for (auto _ : state) acc += rng.normal();
    benchmark::DoNotOptimize(acc);
}
BENCHMARK(BM_normal_draws);

void BM_lmm_loglik(benchmark::State& state) {
    const mcem::Theta theta = mcem::lmm_theta(53.318, 54.821, 249.23);
    for (auto _ : state)
        benchmark::DoNotOptimize(mcem::lmm_loglik(theta, bulls()));
}
BENCHMARK(BM_lmm_loglik);

void BM_lmm_em_step(benchmark::State& state) {
    const mcem::Theta theta = mcem::lmm_theta(55, 45, 260);
    for (auto _ : state)
        benchmark::DoNotOptimize(mcem::lmm_em_step(theta, bulls()));
}
BENCHMARK(BM_lmm_em_step);

void BM_lmm_mcem_step(benchmark::State& state) {
    const mcem::Theta theta = mcem::lmm_theta(55, 45, 260);
    mcem::RngStream rng(7);
    const std::int64_t m = state.range(0);
    for (auto _ : state)
        benchmark::DoNotOptimize(mcem::lmm_mcem_step(theta, bulls(), m, rng));
    state.SetItemsProcessed(state.iterations() * m);
}
BENCHMARK(BM_lmm_mcem_step)->Arg(1000)->Arg(10000);

void BM_glmm_chain_sweeps(benchmark::State& state) {
    const mcem::Theta theta = mcem::glmm_theta(6.0, 2.0);
    mcem::RngStream rng(7);
    const std::int64_t m = state.range(0);
    const std::vector<double> u0(panel().q(), 0.0);
    for (auto _ : state)
        benchmark::DoNotOptimize(
            mcem::glmm_mh_chain(theta, panel(), m, 0, u0, rng));
    state.SetItemsProcessed(state.iterations() * m);
}
BENCHMARK(BM_glmm_chain_sweeps)->Arg(1000);

void BM_glmm_loglik_quadrature(benchmark::State& state) {
    const mcem::Theta theta = mcem::glmm_theta(6.0, 2.0);
    for (auto _ : state)
        benchmark::DoNotOptimize(
            mcem::glmm_loglik_quadrature(theta, panel(), 32));
}
BENCHMARK(BM_glmm_loglik_quadrature);

} // namespace

BENCHMARK_MAIN();
