// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

// Serial reference kernels against their OpenMP counterparts on one
// synthetic 128x128, 15-view scene. Parallel runs take the thread count as
// the benchmark argument.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "matseg/calibration.hpp"
#include "matseg/classifier.hpp"
#include "matseg/encoder.hpp"
#include "matseg/fusion.hpp"
#include "matseg/synth.hpp"

namespace {

using namespace matseg;

struct Fixture {
    BrdfDictionary dict = default_dictionary();
    SceneSpec scene;
    ImageStack reflectance;
    ImageStack raw;
    FeatureGrid rr;
    Network net;
    std::vector<ProbabilityGrid> sources;

    Fixture() {
        scene.width = 128;
        scene.height = 128;
        scene.material_map = voronoi_material_map(128, 128, 64, dict.size(), 1);
        scene.views = default_views(15, 2);
        scene.noise.gaussian_sigma = {0.02};
        scene.seed = 3;
        reflectance = render(scene, dict).stack;
        raw = render_dn(scene, dict);
        rr = encode_tile(reflectance, dict, EncodeOptions{});
        net = Network::build(NetworkConfig::desk_default(rr.feature_len, dict.size()), 4);
        const ProbabilityGrid p = predict_tile(net, rr);
        for (int t = 0; t < 10; ++t) sources.push_back(p);
    }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

const std::vector<std::int64_t> kThreads{1, 2, 4, 8};

void BM_render_reference(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state) benchmark::DoNotOptimize(reference::render(f.scene, f.dict));
}
void BM_render_omp(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state) benchmark::DoNotOptimize(render(f.scene, f.dict, static_cast<int>(state.range(0))));
}

void BM_calibrate_reference(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state) benchmark::DoNotOptimize(reference::calibrate_stack(f.raw));
}
void BM_calibrate_omp(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state) benchmark::DoNotOptimize(calibrate_stack(f.raw, static_cast<int>(state.range(0))));
}

void BM_encode_rr_reference(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state) benchmark::DoNotOptimize(reference::encode_tile(f.reflectance, f.dict, EncodeOptions{}));
}
void BM_encode_rr_omp(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state) {
        benchmark::DoNotOptimize(encode_tile(f.reflectance, f.dict, EncodeOptions{}, static_cast<int>(state.range(0))));
    }
}

void BM_predict_reference(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state) benchmark::DoNotOptimize(reference::predict_tile(f.net, f.rr));
}
void BM_predict_omp(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state) benchmark::DoNotOptimize(predict_tile(f.net, f.rr, static_cast<int>(state.range(0))));
}

void BM_fuse_reference(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state) benchmark::DoNotOptimize(reference::softmax_fuse(f.sources));
}
void BM_fuse_omp(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state) benchmark::DoNotOptimize(softmax_fuse(f.sources, static_cast<int>(state.range(0))));
}

BENCHMARK(BM_render_reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_render_omp)->ArgsProduct({kThreads})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_calibrate_reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_calibrate_omp)->ArgsProduct({kThreads})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_encode_rr_reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_encode_rr_omp)->ArgsProduct({kThreads})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_predict_reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_predict_omp)->ArgsProduct({kThreads})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_fuse_reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_fuse_omp)->ArgsProduct({kThreads})->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
