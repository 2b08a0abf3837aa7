// Serial reference vs OpenMP kernels on the benchmark corpus.

#include <benchmark/benchmark.h>

#include <random>
#include <sstream>

#include "steer/pipeline.hpp"
#include "steer/sim.hpp"

namespace {

const std::string& corpus() {
    static const std::string text = [] {
        const steer::SynthSpec spec = steer::synth_spec_from_file(STEER_SOURCE_DIR "/data/synth/bench.json");
        std::ostringstream out;
        steer::synth_corpus(spec, 2000, 11, out);
        return out.str();
    }();
    return text;
}

const std::vector<steer::Vec3>& vectors() {
    static const std::vector<steer::Vec3> v = [] {
        std::mt19937_64 rng(3);
        std::normal_distribution<double> g(0.0, 1.0);
        std::vector<steer::Vec3> out(200000);
        for (auto& x : out) {
            x = steer::normalized({g(rng), g(rng), g(rng)});
        }
        return out;
    }();
    return v;
}

void annotate_serial(benchmark::State& state) {
    corpus();  // built outside the timed loop
    for (auto _ : state) {
        std::istringstream in(corpus());
        std::ostringstream out;
        benchmark::DoNotOptimize(steer::annotate_stream_serial(in, out, {}));
    }
    state.SetItemsProcessed(state.iterations() * 2000);
}

void annotate_parallel(benchmark::State& state) {
    corpus();
    for (auto _ : state) {
        std::istringstream in(corpus());
        std::ostringstream out;
        benchmark::DoNotOptimize(steer::annotate_stream(in, out, {}, static_cast<int>(state.range(0))));
    }
    state.SetItemsProcessed(state.iterations() * 2000);
}

void classify_serial(benchmark::State& state) {
    vectors();
    for (auto _ : state) {
        benchmark::DoNotOptimize(steer::classify_batch_serial(vectors(), steer::default_anchors()));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(vectors().size()));
}

void classify_parallel(benchmark::State& state) {
    vectors();
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            steer::classify_batch(vectors(), steer::default_anchors(), static_cast<int>(state.range(0))));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(vectors().size()));
}

}  // namespace

BENCHMARK(annotate_serial)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(annotate_parallel)->Arg(1)->Arg(4)->Arg(8)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(classify_serial)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(classify_parallel)->Arg(1)->Arg(4)->Arg(8)->UseRealTime()->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
