/// Serial reference loops against the OpenMP path for the batch kernels.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "pwh/assumptions.hpp"
#include "pwh/scales.hpp"
#include "pwh/shadowing.hpp"
#include "pwh/stability.hpp"
#include "pwh/systems.hpp"

using namespace pwh;

namespace {

Execution exec_of(const benchmark::State& state) {
    return state.range(0) == 0 ? Execution::serial : Execution::parallel;
}

const SystemSpec& cat() {
    static const SystemSpec sys = build_cat_map();
    return sys;
}

const ScaleParams& cat_scales() {
    static const ScaleParams sc = with_c_f(ScaleParams{}, cat());
    return sc;
}

void BM_certify_batch(benchmark::State& state) {
    std::vector<ShadowJob> jobs;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::uint64_t i = 0; i < 32; ++i) jobs.push_back({Point{u(rng), u(rng)}, 50, 0.1, i});
    for (auto _ : state) {
        auto res = certify_batch(cat(), cat_scales(), jobs, {}, {}, exec_of(state));
        benchmark::DoNotOptimize(res);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(jobs.size()));
}

void BM_rate_margins(benchmark::State& state) {
    std::vector<Point> pts;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 2000; ++i) pts.emplace_back(u(rng), u(rng));
    for (auto _ : state) {
        auto rep = check_rate_margins(cat_scales(), cat(), pts, 1e-3, 30, exec_of(state));
        benchmark::DoNotOptimize(rep);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pts.size()));
}

void BM_verify_assumptions(benchmark::State& state) {
    AssumptionOptions opts;
    opts.resolution = 12;
    opts.exec = exec_of(state);
    for (auto _ : state) {
        auto rep = verify_assumptions(cat(), cat_scales(), opts);
        benchmark::DoNotOptimize(rep);
    }
}

void BM_conjugacy_field(benchmark::State& state) {
    for (auto _ : state) {
        auto field = conjugacy_field(cat(), cat(), cat_scales(), 6, 40, {}, {}, exec_of(state));
        benchmark::DoNotOptimize(field);
    }
    state.SetItemsProcessed(state.iterations() * 36);
}

}  // namespace

// Argument 0 runs the serial reference, 1 the OpenMP path.
BENCHMARK(BM_certify_batch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_rate_margins)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_verify_assumptions)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_conjugacy_field)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
