// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartgcl/promptfuse.hpp"
#include "chartgcl/synth.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace chartgcl;

ModelConfig bench_config(int d_model) {
    ModelConfig mc;
    mc.backbone.d_model = d_model;
    mc.backbone.ffn_dim = 2 * d_model;
    mc.graph.gcn_hidden = d_model / 2;
    return mc;
}

std::vector<ChartScene> bench_scenes() {
    SynthSpec spec;
    spec.count = 8;
    return synth_generate(spec, 11);
}

// Forward and backward of one scene's joint loss.
void BM_SceneStep(benchmark::State& state) {
    const auto data = bench_scenes();
    GraphPromptModel model(bench_config(static_cast<int>(state.range(0))), Tokenizer::build(data), 1);
    const auto prepared = model.prepare(data[0]);
    TrainConfig tc;
    tc.intra_cl = state.range(1) != 0;
    std::uint64_t seed = 0;
    for (auto _ : state) {
        model.params().zero_grad();
        const auto losses = model.scene_losses(prepared, tc, seed++);
        ad::backward(ad::add(losses.task, ad::scale(losses.contrastive, tc.lambda)));
    }
}
BENCHMARK(BM_SceneStep)->Args({64, 0})->Args({64, 1})->Args({128, 0})->Unit(benchmark::kMillisecond);

void BM_Generate(benchmark::State& state) {
    const auto data = bench_scenes();
    GraphPromptModel model(bench_config(64), Tokenizer::build(data), 1);
    ChartScene bare = data[0];
    bare.qa.clear();
    const auto prepared = model.prepare(bare);
    for (auto _ : state) benchmark::DoNotOptimize(model.generate(prepared, data[0].qa[0].question, 8));
}
BENCHMARK(BM_Generate)->Unit(benchmark::kMillisecond);

void BM_Prepare(benchmark::State& state) {
    const auto data = bench_scenes();
    GraphPromptModel model(bench_config(64), Tokenizer::build(data), 1);
    for (auto _ : state) benchmark::DoNotOptimize(model.prepare(data[1]));
}
BENCHMARK(BM_Prepare)->Unit(benchmark::kMicrosecond);

}  // namespace
