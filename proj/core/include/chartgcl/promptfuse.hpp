// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "chartgcl/autodiff.hpp"
#include "chartgcl/backbone.hpp"
#include "chartgcl/contrastive.hpp"
#include "chartgcl/encoders.hpp"
#include "chartgcl/graphs.hpp"
#include "chartgcl/scene.hpp"
#include "chartgcl/tokenizer.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chartgcl {

inline constexpr int kPromptSlots = 36;

enum class PromptSource { textual, visual };

std::string_view to_string(PromptSource s);
PromptSource parse_prompt_source(std::string_view text);

/// Slot layout of a soft prompt: slot_nodes[s] is the graph node placed in
/// slot s, or -1 for a pad slot.
struct SoftPromptLayout {
    std::vector<int> slot_nodes;

    int content_slots() const;
};

/// Object nodes (OCR nodes skipped) in node order fill the first slots,
/// truncated to `slots`; the rest are pads.
SoftPromptLayout plan_soft_prompt(const std::vector<GraphNode>& provenance, int slots = kPromptSlots);

struct SoftPrompt {
    Matrix embeddings;  // slots x d_model
    SoftPromptLayout layout;
};

SoftPrompt build_soft_prompt(const Matrix& node_reps, const std::vector<GraphNode>& provenance, const RowVector& pad,
                             int slots = kPromptSlots);

/// Differentiable variant used inside the model.
ad::Var soft_prompt_var(const ad::Var& node_reps, const SoftPromptLayout& layout, const ad::Var& pad);

struct GraphEncoderConfig {
    int gcn_layers = 2;
    int gcn_hidden = 64;
    int text_embed_dim = 64;
    int knn_k = 3;
    std::uint64_t embed_seed = 17;
    bool normalize_node_inputs = false;
    std::string embed_backend = "deterministic-stub";
    std::string embed_endpoint;
};

struct ModelConfig {
    BackboneConfig backbone;
    GraphEncoderConfig graph;
    SimilarityConfig contrastive;
    std::vector<std::string> classes = default_class_vocabulary();
    bool use_graph = true;
    PromptSource prompt_source = PromptSource::textual;

    void validate() const;
};

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct TrainConfig {
    double lambda = 1.0;
    double lr = 1e-3;
    int steps = 200;
    int batch_size = 8;  // scenes per step; every QA of a scene is used
    std::uint64_t seed = 0;
    PromptSource prompt_source = PromptSource::textual;
    bool intra_cl = false;
    double edge_drop_p = 0.3;
    bool use_graph = true;
    bool freeze_encoder = false;
    double weight_decay = 0.01;
    double clip_norm = 1.0;
    int warmup_steps = 0;

    void validate() const;
};

/// Per-scene inputs that do not depend on parameters.
struct PreparedScene {
    std::string scene_id;
    Matrix patch_feats;
    Matrix patch_mean;  // objects x patches
    Graph visual;       // topology only; features come from the encoder
    Graph textual;      // features are text embeddings
    Matrix visual_adjacency;
    Matrix textual_adjacency;
    PairMap pairs;
    struct Example {
        std::vector<int> tokens;   // question ++ [SEP] ++ answer
        std::vector<int> targets;  // next-token targets, -1 outside the answer
    };
    std::vector<Example> examples;
};

struct SceneLosses {
    ad::Var task;         // mean answer-token cross-entropy over the scene's QAs
    ad::Var contrastive;  // ℓ_cl, or nullptr when the graph is disabled
    ContrastiveTerms terms;
};

/// Toy backbone + graph encoders + soft-prompt fusion. Move-only: parameters
/// are shared handles.
class GraphPromptModel {
public:
    GraphPromptModel(ModelConfig cfg, Tokenizer tokenizer, std::uint64_t init_seed);
    GraphPromptModel(GraphPromptModel&&) noexcept;
    GraphPromptModel& operator=(GraphPromptModel&&) noexcept;
    ~GraphPromptModel();

    const ModelConfig& config() const { return cfg_; }
    ModelConfig& mutable_config() { return cfg_; }
    const Tokenizer& tokenizer() const { return tokenizer_; }
    ad::ParamStore& params() { return params_; }
    const ad::ParamStore& params() const { return params_; }
    const ToyBackbone& backbone() const { return *backbone_; }

    PreparedScene prepare(const ChartScene& scene) const;

    ad::Var encode_patches(const PreparedScene& scene) const;

    struct GraphOutputs {
        ad::Var visual;   // H_v
        ad::Var textual;  // H_t
    };
    /// GCN_v over patch-mean node features and GCN_t over text embeddings.
    /// Optional edge-dropped graphs reuse the same encoders.
    GraphOutputs encode_graphs(const PreparedScene& scene, const ad::Var& encoder_states,
                               const Graph* visual_override = nullptr, const Graph* textual_override = nullptr) const;

    /// The soft prompt for a scene: graph nodes from the configured source, or
    /// all pads when the graph is disabled.
    ad::Var soft_prompt(const PreparedScene& scene, const GraphOutputs* graphs) const;

    ad::Var decoder_forward(const ad::Var& prompt, const std::vector<int>& tokens, const ad::Var& encoder_states) const;

    /// Task loss (and ℓ_cl when the graph is on) for every QA of one scene.
    SceneLosses scene_losses(const PreparedScene& scene, const TrainConfig& train, std::uint64_t augment_seed) const;

    /// Greedy decoding to [EOS] or `max_tokens`.
    std::string generate(const PreparedScene& scene, std::string_view question, int max_tokens = 32) const;
    std::string generate(const ChartScene& scene, std::string_view question, int max_tokens = 32) const;

    /// Snaps every parameter to the nearest float32 so checkpoints are lossless.
    void round_to_float32();

private:
    ad::Var run_gcn(const std::vector<ad::Var>& layer_params, const Matrix& adjacency, const ad::Var& features) const;

    ModelConfig cfg_;
    Tokenizer tokenizer_;
    ad::ParamStore params_;
    std::unique_ptr<ToyBackbone> backbone_;
    std::vector<ad::Var> gcn_v_;  // w0, b0, w1, b1, ...
    std::vector<ad::Var> gcn_t_;
    std::vector<ad::Var> projection_;  // w1, b1, w2, b2 when enabled
    std::unique_ptr<Embedder> embedder_;
};

struct MetricRow {
    int step = 0;
    double l_task = 0;
    double l_cl = 0;
    double lr = 0;
};

nlohmann::json to_json(const MetricRow& row);

struct TrainResult {
    GraphPromptModel model;
    std::vector<MetricRow> log;
};

/// Joint single-stage training: L = L_task + λ·ℓ_cl. Deterministic given
/// cfg.seed. Rows are also streamed as JSONL to `metrics_out` when given.
TrainResult train(const std::vector<ChartScene>& dataset, ModelConfig model_cfg, const TrainConfig& cfg,
                  std::ostream* metrics_out = nullptr);

/// Binary checkpoint: magic, little-endian u64 header length, JSON header
/// (config, vocab, tensor table), then float32 little-endian tensors in
/// declared order.
void save_checkpoint(const GraphPromptModel& model, const std::filesystem::path& path);
GraphPromptModel load_checkpoint(const std::filesystem::path& path);

}  // namespace chartgcl
