// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "chartgcl/cot.hpp"
#include "chartgcl/metrics.hpp"
#include "chartgcl/promptfuse.hpp"
#include "chartgcl/synth.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace chartgcl::cli {

struct DataSection {
    std::string train;  // scene file for `train`
    std::string test;   // scene file for `eval` and `cot`
    SynthSpec synth;
    std::uint64_t synth_seed = 0;
    bool write_images = false;
};

struct EvalSection {
    // "auto" picks BLEU-4 when every answer is open-ended, relaxed accuracy otherwise.
    std::string metric = "auto";
    int max_answer_tokens = 32;
};

struct CotSection {
    TemplateId template_id = TemplateId::original;
    int concurrency = 1;
    bool resume = false;
    std::string client = "mock";  // mock | openai
    std::string endpoint = "http://localhost:8000/v1";
    std::string model = "qwen2-vl";
    // The only field with ${VAR} interpolation.
    std::string api_key = "${MLLM_API_KEY}";
    double timeout_seconds = 120.0;
    int max_tokens = 512;
    RetryPolicy retry;
};

/// Every tunable of the tool. Sections: data, graph, encoder, contrastive,
/// train, eval, cot.
struct RunConfig {
    DataSection data;
    ModelConfig model;
    TrainConfig train;
    EvalSection eval;
    CotSection cot;

    void validate() const;
};

/// The full document with every default filled in.
nlohmann::json to_json(const RunConfig& cfg);

/// Parses JSON (comments allowed) over the defaults. Unknown keys and type
/// mismatches raise LoadError with the dotted key path.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& text);

/// Expands ${NAME} from the environment. Throws when NAME is unset or empty.
std::string expand_env(const std::string& value);

}  // namespace chartgcl::cli
