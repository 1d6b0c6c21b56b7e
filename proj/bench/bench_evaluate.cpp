// Population evaluation: serial reference vs OpenMP.
#include <benchmark/benchmark.h>

#include <omp.h>

#include "ccstress/fuzzer.hpp"

using namespace ccstress;

namespace {

struct Setup {
    Evaluator ev;
    std::vector<PacketTrace> traces;
};

const Setup& setup()
{
    static const Setup s = [] {
        CampaignConfig cfg;
        cfg.sim.cca.kind = CcaKind::Reno;
        Setup out{make_evaluator(cfg), {}};
        Rng rng = make_rng(42);
        for (int i = 0; i < 50; ++i) {
            out.traces.push_back(gen_initial_traffic_trace(cfg.ga.max_cross_packets, cfg.sim.duration_us, cfg.gen, rng));
        }
        return out;
    }();
    return s;
}

void BM_EvaluateSerial(benchmark::State& state)
{
    const auto& s = setup();
    for (auto _ : state) {
        benchmark::DoNotOptimize(evaluate_serial(s.ev, s.traces));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.traces.size()));
}

void BM_EvaluateParallel(benchmark::State& state)
{
    const auto& s = setup();
    const int threads = static_cast<int>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(evaluate_parallel(s.ev, s.traces, false, threads));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.traces.size()));
    state.counters["threads"] = threads;
}

}  // namespace

BENCHMARK(BM_EvaluateSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_EvaluateParallel)
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime()
    ->Arg(1)
    ->Arg(2)
    ->Arg(4)
    ->Arg(8);

BENCHMARK_MAIN();
