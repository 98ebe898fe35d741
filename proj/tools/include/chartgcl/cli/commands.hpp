// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "chartgcl/cli/run_config.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace chartgcl::cli {

/// State shared by every command: the resolved config, the output directory
/// and the streams for human-readable output.
struct Context {
    RunConfig config;
    std::filesystem::path out_dir = "out";
    // True when the config came from --config; enables the checkpoint dimension check.
    bool config_from_file = false;
    std::ostream* out = nullptr;
    std::ostream* err = nullptr;
};

struct SynthOptions {
    std::optional<std::filesystem::path> output;  // default: <out>/scenes.json
    bool jsonl = false;
};
/// Returns the written scene file.
std::filesystem::path cmd_synth(const Context& ctx, const SynthOptions& opts);

struct GraphDumpOptions {
    std::filesystem::path scenes;
    std::optional<std::string> scene_id;
};
/// One JSON line per scene: {scene_id, visual, textual}.
void cmd_graph_dump(const Context& ctx, const GraphDumpOptions& opts);

struct TrainOptions {
    std::optional<std::filesystem::path> scenes;  // overrides data.train
};
struct TrainOutputs {
    std::filesystem::path checkpoint;
    std::filesystem::path metrics;
    std::filesystem::path resolved_config;
    MetricRow last;
};
TrainOutputs cmd_train(const Context& ctx, const TrainOptions& opts);

struct EvalOptions {
    std::filesystem::path checkpoint;
    std::vector<std::filesystem::path> scenes;  // one split per file; default data.test
    std::string model_name = "model";
};
EvalResult cmd_eval(const Context& ctx, const EvalOptions& opts);

struct CotOptions {
    std::optional<std::filesystem::path> scenes;  // overrides data.test
};
BenchmarkResult cmd_cot(const Context& ctx, const CotOptions& opts);

struct ReportOptions {
    // Prediction JSONL files or report JSON files; one table row each.
    std::vector<std::filesystem::path> inputs;
    std::optional<std::string> metric;
};
std::string cmd_report(const Context& ctx, const ReportOptions& opts);

/// Metric for a list of answer kinds under an eval.metric setting.
MetricId choose_metric(const std::string& setting, const std::vector<AnswerKind>& kinds);

}  // namespace chartgcl::cli
