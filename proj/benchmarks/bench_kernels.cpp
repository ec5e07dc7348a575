// Serial vs OpenMP kernels. Run: ./qdtwin_bench --benchmark_counters_tabular=true

#include <benchmark/benchmark.h>

#include <omp.h>

#include "qdtwin/bench.hpp"
#include "qdtwin/correlator.hpp"
#include "qdtwin/emitter.hpp"

using namespace qdtwin;

namespace {

// HBT tags of an 80 MHz run with roughly `pulses` pulses.
const BenchOutput& hbt_tags(std::uint64_t pulses)
{
    static std::uint64_t cached_pulses = 0;
    static BenchOutput out;
    if (cached_pulses != pulses) {
        EmitterParams e;
        e.p_multi = 0.01;
        ExcitationConfig x;
        x.n_pulses = pulses;
        x.power_ratio = 2.0;
        x.seed = 7;
        const ExcitationSchedule s(x);
        out = hbt_split(generate_stream(e, x), DetectorParams::ideal(), DetectorParams::ideal(), s.duration_ps(), 7);
        cached_pulses = pulses;
    }
    return out;
}

void BM_correlate_serial(benchmark::State& state)
{
    const auto& t = hbt_tags(static_cast<std::uint64_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(cross_correlate_serial(t.a, t.b, 4, -137504, 137504));
    }
    state.counters["tags/s"] = benchmark::Counter(static_cast<double>(t.a.tags.size() + t.b.tags.size()),
                                                  benchmark::Counter::kIsIterationInvariantRate);
}

void BM_correlate_parallel(benchmark::State& state)
{
    const auto& t = hbt_tags(static_cast<std::uint64_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(cross_correlate_parallel(t.a, t.b, 4, -137504, 137504, omp_get_max_threads()));
    }
    state.counters["tags/s"] = benchmark::Counter(static_cast<double>(t.a.tags.size() + t.b.tags.size()),
                                                  benchmark::Counter::kIsIterationInvariantRate);
}

void BM_fold_serial(benchmark::State& state)
{
    const auto& t = hbt_tags(static_cast<std::uint64_t>(state.range(0)));
    const PulseClock clock(80e6);
    for (auto _ : state) {
        benchmark::DoNotOptimize(fold_serial(t.a.tags, clock, 4, 12500));
    }
    state.counters["tags/s"] = benchmark::Counter(static_cast<double>(t.a.tags.size()),
                                                  benchmark::Counter::kIsIterationInvariantRate);
}

void BM_fold_parallel(benchmark::State& state)
{
    const auto& t = hbt_tags(static_cast<std::uint64_t>(state.range(0)));
    const PulseClock clock(80e6);
    for (auto _ : state) {
        benchmark::DoNotOptimize(fold_parallel(t.a.tags, clock, 4, 12500, omp_get_max_threads()));
    }
    state.counters["tags/s"] = benchmark::Counter(static_cast<double>(t.a.tags.size()),
                                                  benchmark::Counter::kIsIterationInvariantRate);
}

void BM_generate_stream(benchmark::State& state)
{
    EmitterParams e;
    e.p_multi = 0.0014;
    ExcitationConfig x;
    x.n_pulses = static_cast<std::uint64_t>(state.range(0));
    x.power_ratio = 0.5;
    for (auto _ : state) {
        benchmark::DoNotOptimize(generate_stream(e, x));
    }
    state.counters["pulses/s"] =
        benchmark::Counter(static_cast<double>(x.n_pulses), benchmark::Counter::kIsIterationInvariantRate);
}

}  // namespace

BENCHMARK(BM_correlate_serial)->Arg(1'000'000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_correlate_parallel)->Arg(1'000'000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_fold_serial)->Arg(1'000'000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_fold_parallel)->Arg(1'000'000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_generate_stream)->Arg(1'000'000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
