// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartgcl/graphs.hpp"
#include "chartgcl/synth.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using namespace chartgcl;

ChartScene scattered_scene(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> pos(0.0, 480.0);
    std::uniform_real_distribution<double> side(2.0, 30.0);
    ChartScene s;
    s.scene_id = "bench";
    s.width = s.height = 512;
    for (int i = 0; i < n; ++i) {
        ChartObject o;
        o.id = i;
        o.cls = "bar";
        const double x = pos(rng), y = pos(rng);
        o.bbox = {x, y, x + side(rng), y + side(rng)};
        o.ocr_texts = {"v" + std::to_string(i)};
        s.objects.push_back(o);
    }
    s.objects = order_objects(s.objects);
    return s;
}

void BM_MinBoxDistance(benchmark::State& state) {
    const BBox a{0, 0, 10, 10};
    const BBox b{25, 40, 60, 80};
    for (auto _ : state) benchmark::DoNotOptimize(min_bbox_distance(a, b));
}
BENCHMARK(BM_MinBoxDistance);

void BM_KnnEdges(benchmark::State& state) {
    const auto scene = scattered_scene(static_cast<int>(state.range(0)), 1);
    state.SetComplexityN(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(knn_edges(scene.objects, 3));
}
BENCHMARK(BM_KnnEdges)->RangeMultiplier(2)->Range(8, 256)->Complexity();

void BM_TextualGraph(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto scene = scattered_scene(n, 2);
    const Matrix labels = Matrix::Random(n, 64);
    const Matrix ocr = Matrix::Random(n, 64);
    for (auto _ : state) benchmark::DoNotOptimize(build_textual_graph(scene, labels, ocr, 3));
}
BENCHMARK(BM_TextualGraph)->Arg(16)->Arg(64);

void BM_DropEdges(benchmark::State& state) {
    const auto scene = scattered_scene(64, 3);
    const Graph g = build_visual_graph(scene, Matrix::Zero(64, 8), 3);
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(drop_edges(g, 0.3, seed++));
}
BENCHMARK(BM_DropEdges);

void BM_SynthScene(benchmark::State& state) {
    SynthSpec spec;
    spec.count = 1;
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(synth_generate(spec, seed++));
}
BENCHMARK(BM_SynthScene);

}  // namespace
