// Serial reference vs OpenMP kernels for the two data-parallel hot paths:
// per-sample class scales and the DUO loss forward/backward pass.

#include <benchmark/benchmark.h>

#include <vector>

#include "auv/duo_loss.hpp"
#include "auv/gradcheck.hpp"
#include "auv/scale_kernels.hpp"
#include "auv/synth.hpp"

namespace {

const std::vector<auv::FeatureVolume>& volumes() {
    static const auto v = [] {
        auv::synth::SynthSpec spec;
        spec.n_samples = 64;
        std::vector<auv::FeatureVolume> out;
        for (std::size_t i = 0; i < spec.n_samples; ++i)
            out.push_back(auv::synth::make_feature_volume(
                spec, i % 20 == 0, auv::synth::sample_seed(spec.seed, i)));
        return out;
    }();
    return v;
}

const auv::duo::BatchFiles& loss_batch() {
    static const auto b = auv::duo::random_batch(3, {4, 4, 16, 32, 32});
    return b;
}

void BM_ScalesSerial(benchmark::State& state) {
    volumes();  // build the fixture outside the timed loop
    for (auto _ : state)
        benchmark::DoNotOptimize(auv::serial::class_scales_batch(volumes(), {}, {}));
}
BENCHMARK(BM_ScalesSerial)->Unit(benchmark::kMillisecond);

void BM_ScalesOpenMP(benchmark::State& state) {
    const int workers = static_cast<int>(state.range(0));
    volumes();
    for (auto _ : state)
        benchmark::DoNotOptimize(auv::class_scales_batch(volumes(), {}, {}, workers));
}
// Wall time: CPU time of the calling thread undercounts parallel work.
BENCHMARK(BM_ScalesOpenMP)
    ->Arg(1)->Arg(2)->Arg(4)->Arg(8)
    ->UseRealTime()
    ->Unit(benchmark::kMillisecond);

void BM_DuoReference(benchmark::State& state) {
    const auto& b = loss_batch();
    for (auto _ : state)
        benchmark::DoNotOptimize(
            auv::duo::reference::duo_total_loss(b.batch, b.epsilon_raw, b.scales));
}
BENCHMARK(BM_DuoReference)->Unit(benchmark::kMillisecond);

void BM_DuoKernel(benchmark::State& state) {
    const auto& b = loss_batch();
    const int workers = static_cast<int>(state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(
            auv::duo::duo_total_loss(b.batch, b.epsilon_raw, b.scales, {}, workers));
}
BENCHMARK(BM_DuoKernel)
    ->Arg(1)->Arg(2)->Arg(4)->Arg(8)
    ->UseRealTime()
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
