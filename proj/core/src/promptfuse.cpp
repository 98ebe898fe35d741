// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartgcl/promptfuse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace chartgcl {

std::string_view to_string(PromptSource s) { return s == PromptSource::textual ? "textual" : "visual"; }

PromptSource parse_prompt_source(std::string_view text) {
    if (text == "textual") return PromptSource::textual;
    if (text == "visual") return PromptSource::visual;
    throw Error("unknown prompt_source '" + std::string(text) + "' (expected textual or visual)");
}

int SoftPromptLayout::content_slots() const {
    return static_cast<int>(std::count_if(slot_nodes.begin(), slot_nodes.end(), [](int n) { return n >= 0; }));
}

SoftPromptLayout plan_soft_prompt(const std::vector<GraphNode>& provenance, int slots) {
    SoftPromptLayout layout;
    layout.slot_nodes.reserve(std::size_t(slots));
    for (const auto& node : provenance) {
        if (static_cast<int>(layout.slot_nodes.size()) == slots) break;
        if (!node.is_ocr()) layout.slot_nodes.push_back(node.node_id);
    }
    layout.slot_nodes.resize(std::size_t(slots), -1);
    return layout;
}

SoftPrompt build_soft_prompt(const Matrix& node_reps, const std::vector<GraphNode>& provenance, const RowVector& pad,
                             int slots) {
    if (pad.size() != node_reps.cols()) {
        throw Error("node representation width " + std::to_string(node_reps.cols()) + " != d_model " +
                    std::to_string(pad.size()));
    }
    SoftPrompt out;
    out.layout = plan_soft_prompt(provenance, slots);
    out.embeddings.resize(slots, pad.size());
    for (int s = 0; s < slots; ++s) {
        const int node = out.layout.slot_nodes[std::size_t(s)];
        if (node >= node_reps.rows()) throw Error("soft prompt node index out of range");
        out.embeddings.row(s) = node >= 0 ? RowVector(node_reps.row(node)) : pad;
    }
    return out;
}

ad::Var soft_prompt_var(const ad::Var& node_reps, const SoftPromptLayout& layout, const ad::Var& pad) {
    std::vector<int> content;
    for (int n : layout.slot_nodes) {
        if (n >= 0) content.push_back(n);
    }
    const auto n_pad = layout.slot_nodes.size() - content.size();
    std::vector<ad::Var> parts;
    if (!content.empty()) {
        if (!node_reps) throw Error("soft prompt has content slots but no node representations");
        if (node_reps->value.cols() != pad->value.cols()) throw Error("node representation width does not match d_model");
        parts.push_back(ad::gather_rows(node_reps, content));
    }
    if (n_pad > 0) parts.push_back(ad::gather_rows(pad, std::vector<int>(n_pad, 0)));
    return parts.size() == 1 ? parts.front() : ad::concat_rows(parts);
}

void ModelConfig::validate() const {
    backbone.validate();
    contrastive.validate();
    if (backbone.prompt_slots != kPromptSlots) throw Error("the soft prompt has exactly 36 slots");
    if (graph.gcn_layers < 1) throw Error("gcn_layers must be >= 1");
    if (graph.gcn_hidden <= 0 || graph.text_embed_dim <= 0) throw Error("GCN widths must be positive");
    if (graph.knn_k < 1) throw Error("knn_k must be >= 1");
    if (classes.empty()) throw Error("class vocabulary is empty");
    if (graph.embed_backend != "deterministic-stub" && graph.embed_backend != "external-encoder") {
        throw Error("embed_backend must be deterministic-stub or external-encoder");
    }
    if (graph.embed_backend == "external-encoder" && graph.embed_endpoint.empty()) {
        throw Error("external-encoder backend needs embed_endpoint");
    }
}

void TrainConfig::validate() const {
    if (!(lambda >= 0) || !std::isfinite(lambda)) throw Error("lambda must be >= 0");
    if (!(lr > 0)) throw Error("lr must be > 0");
    if (steps < 0) throw Error("steps must be >= 0");
    if (batch_size <= 0) throw Error("batch_size must be > 0");
    if (!(edge_drop_p >= 0 && edge_drop_p < 1)) throw Error("edge_drop_p must be in [0, 1)");
    if (warmup_steps < 0) throw Error("warmup_steps must be >= 0");
}

nlohmann::json to_json(const ModelConfig& cfg) {
    const auto& b = cfg.backbone;
    const auto& g = cfg.graph;
    const auto& c = cfg.contrastive;
    return {
        {"backbone",
         {{"d_model", b.d_model}, {"heads", b.heads}, {"ffn_dim", b.ffn_dim}, {"encoder_layers", b.encoder_layers},
          {"decoder_layers", b.decoder_layers}, {"max_patches", b.max_patches}, {"max_text_len", b.max_text_len},
          {"prompt_slots", b.prompt_slots}}},
        {"graph",
         {{"gcn_layers", g.gcn_layers}, {"gcn_hidden", g.gcn_hidden}, {"text_embed_dim", g.text_embed_dim},
          {"knn_k", g.knn_k}, {"embed_seed", g.embed_seed}, {"normalize_node_inputs", g.normalize_node_inputs},
          {"embed_backend", g.embed_backend}, {"embed_endpoint", g.embed_endpoint}}},
        {"contrastive",
         {{"theta", to_string(c.theta)}, {"tau", c.tau}, {"symmetric", c.symmetric},
          {"projection_hidden", c.projection_hidden}, {"inter_uses_augmented_text", c.inter_uses_augmented_text}}},
        {"classes", cfg.classes},
        {"use_graph", cfg.use_graph},
        {"prompt_source", to_string(cfg.prompt_source)},
    };
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    try {
        const auto& b = j.at("backbone");
        cfg.backbone.d_model = b.at("d_model");
        cfg.backbone.heads = b.at("heads");
        cfg.backbone.ffn_dim = b.at("ffn_dim");
        cfg.backbone.encoder_layers = b.at("encoder_layers");
        cfg.backbone.decoder_layers = b.at("decoder_layers");
        cfg.backbone.max_patches = b.at("max_patches");
        cfg.backbone.max_text_len = b.at("max_text_len");
        cfg.backbone.prompt_slots = b.at("prompt_slots");
        const auto& g = j.at("graph");
        cfg.graph.gcn_layers = g.at("gcn_layers");
        cfg.graph.gcn_hidden = g.at("gcn_hidden");
        cfg.graph.text_embed_dim = g.at("text_embed_dim");
        cfg.graph.knn_k = g.at("knn_k");
        cfg.graph.embed_seed = g.at("embed_seed");
        cfg.graph.normalize_node_inputs = g.at("normalize_node_inputs");
        cfg.graph.embed_backend = g.at("embed_backend");
        cfg.graph.embed_endpoint = g.at("embed_endpoint");
        const auto& c = j.at("contrastive");
        cfg.contrastive.theta = parse_similarity(c.at("theta").get<std::string>());
        cfg.contrastive.tau = c.at("tau");
        cfg.contrastive.symmetric = c.at("symmetric");
        cfg.contrastive.projection_hidden = c.at("projection_hidden");
        cfg.contrastive.inter_uses_augmented_text = c.at("inter_uses_augmented_text");
        cfg.classes = j.at("classes").get<std::vector<std::string>>();
        cfg.use_graph = j.at("use_graph");
        cfg.prompt_source = parse_prompt_source(j.at("prompt_source").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("model config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

namespace {

std::unique_ptr<Embedder> make_embedder(const GraphEncoderConfig& g) {
    if (g.embed_backend == "external-encoder") return std::make_unique<HttpEmbedder>(g.embed_endpoint, g.text_embed_dim);
    return std::make_unique<StubEmbedder>(g.text_embed_dim, g.embed_seed);
}

std::vector<ad::Var> register_gcn(ad::ParamStore& store, const std::string& prefix, const std::vector<int>& dims,
                                  std::mt19937_64& rng) {
    const GCNParams init = GCNParams::glorot(dims, rng);
    std::vector<ad::Var> vars;
    for (std::size_t l = 0; l < init.layers.size(); ++l) {
        const std::string p = prefix + ".layer" + std::to_string(l);
        vars.push_back(store.add(p + ".w", init.layers[l].weight));
        vars.push_back(store.add(p + ".b", Matrix(init.layers[l].bias)));
    }
    return vars;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

GraphPromptModel::GraphPromptModel(ModelConfig cfg, Tokenizer tokenizer, std::uint64_t init_seed)
    : cfg_(std::move(cfg)), tokenizer_(std::move(tokenizer)) {
    cfg_.validate();
    std::mt19937_64 rng(init_seed);
    backbone_ = std::make_unique<ToyBackbone>(cfg_.backbone, patch_feature_dim(cfg_.classes.size()), tokenizer_.size(),
                                              params_, rng);
    const int d = cfg_.backbone.d_model;
    std::vector<int> dims_v = {d}, dims_t = {cfg_.graph.text_embed_dim};
    for (int l = 0; l + 1 < cfg_.graph.gcn_layers; ++l) {
        dims_v.push_back(cfg_.graph.gcn_hidden);
        dims_t.push_back(cfg_.graph.gcn_hidden);
    }
    dims_v.push_back(d);
    dims_t.push_back(d);
    gcn_v_ = register_gcn(params_, "gcn_v", dims_v, rng);
    gcn_t_ = register_gcn(params_, "gcn_t", dims_t, rng);
    if (cfg_.contrastive.theta == Similarity::cosine_projection) {
        const ProjectionHead head = ProjectionHead::init(d, cfg_.contrastive.projection_hidden, d, rng);
        projection_ = {params_.add("proj.w1", head.w1), params_.add("proj.b1", Matrix(head.b1)),
                       params_.add("proj.w2", head.w2), params_.add("proj.b2", Matrix(head.b2))};
    }
    embedder_ = make_embedder(cfg_.graph);
}

GraphPromptModel::GraphPromptModel(GraphPromptModel&&) noexcept = default;
GraphPromptModel& GraphPromptModel::operator=(GraphPromptModel&&) noexcept = default;
GraphPromptModel::~GraphPromptModel() = default;

PreparedScene GraphPromptModel::prepare(const ChartScene& scene) const {
    validate_scene(scene, cfg_.classes);
    if (scene.objects.empty()) throw Error("scene " + scene.scene_id + " has no objects");
    PreparedScene out;
    out.scene_id = scene.scene_id;
    out.patch_feats = patch_features(scene, cfg_.classes);

    std::vector<int> ids;
    std::vector<std::string> labels, ocr;
    for (const auto& obj : scene.objects) {
        ids.push_back(obj.id);
        labels.push_back(obj.cls);
        ocr.insert(ocr.end(), obj.ocr_texts.begin(), obj.ocr_texts.end());
    }
    out.patch_mean = patch_mean_operator(align_objects_to_patches(scene), ids, scene.patch_count());

    const auto n = static_cast<Eigen::Index>(scene.objects.size());
    out.visual = build_visual_graph(scene, Matrix::Zero(n, cfg_.backbone.d_model), cfg_.graph.knn_k);
    const Matrix ocr_feats = ocr.empty() ? Matrix(0, cfg_.graph.text_embed_dim) : embedder_->embed_all(ocr);
    out.textual = build_textual_graph(scene, embedder_->embed_all(labels), ocr_feats, cfg_.graph.knn_k);
    out.visual_adjacency = normalized_adjacency(out.visual);
    out.textual_adjacency = normalized_adjacency(out.textual);
    out.pairs = make_pair_map(out.visual, out.textual);

    for (const auto& qa : scene.qa) {
        PreparedScene::Example ex;
        ex.tokens = tokenizer_.encode(qa.question);
        const auto q_len = ex.tokens.size();
        ex.tokens.push_back(Tokenizer::kSep);
        const auto answer = tokenizer_.encode(qa.answer);
        ex.tokens.insert(ex.tokens.end(), answer.begin(), answer.end());
        if (static_cast<int>(ex.tokens.size()) > cfg_.backbone.max_text_len) {
            throw Error("scene " + scene.scene_id + ": question+answer exceed max_text_len tokens");
        }
        ex.targets.assign(ex.tokens.size(), -1);
        for (std::size_t j = q_len; j < ex.tokens.size(); ++j) {
            ex.targets[j] = j + 1 < ex.tokens.size() ? ex.tokens[j + 1] : Tokenizer::kEos;
        }
        out.examples.push_back(std::move(ex));
    }
    return out;
}

ad::Var GraphPromptModel::encode_patches(const PreparedScene& scene) const { return backbone_->encode(scene.patch_feats); }

ad::Var GraphPromptModel::run_gcn(const std::vector<ad::Var>& layer_params, const Matrix& adjacency,
                                  const ad::Var& features) const {
    ad::Var input = features;
    if (cfg_.graph.normalize_node_inputs) {
        const auto w = features->value.cols();
        input = ad::layer_norm(features, ad::constant(Matrix::Ones(1, w)), ad::constant(Matrix::Zero(1, w)));
    }
    auto params = std::make_shared<GCNParams>();
    for (std::size_t i = 0; i < layer_params.size(); i += 2) {
        params->layers.push_back({layer_params[i]->value, layer_params[i + 1]->value.row(0)});
    }
    auto cache = std::make_shared<GCNCache>();
    Matrix out = gcn_forward(adjacency, input->value, *params, cache.get());
    std::vector<ad::Var> parents = {input};
    parents.insert(parents.end(), layer_params.begin(), layer_params.end());
    return ad::custom(std::move(out), std::move(parents), [params, cache](const Matrix& g) {
        GCNGrads grads = gcn_backward(*cache, *params, g);
        std::vector<Matrix> result = {std::move(grads.input)};
        for (std::size_t l = 0; l < grads.weight.size(); ++l) {
            result.push_back(std::move(grads.weight[l]));
            result.push_back(Matrix(grads.bias[l]));
        }
        return result;
    });
}

GraphPromptModel::GraphOutputs GraphPromptModel::encode_graphs(const PreparedScene& scene,
                                                               const ad::Var& encoder_states,
                                                               const Graph* visual_override,
                                                               const Graph* textual_override) const {
    const Matrix adj_v = visual_override ? normalized_adjacency(*visual_override) : scene.visual_adjacency;
    const Matrix adj_t = textual_override ? normalized_adjacency(*textual_override) : scene.textual_adjacency;
    const ad::Var visual_init = ad::matmul(ad::constant(scene.patch_mean), encoder_states);
    return {run_gcn(gcn_v_, adj_v, visual_init), run_gcn(gcn_t_, adj_t, ad::constant(scene.textual.features))};
}

ad::Var GraphPromptModel::soft_prompt(const PreparedScene& scene, const GraphOutputs* graphs) const {
    const int slots = cfg_.backbone.prompt_slots;
    if (!cfg_.use_graph || !graphs) {
        return soft_prompt_var(nullptr, SoftPromptLayout{std::vector<int>(std::size_t(slots), -1)},
                               backbone_->pad_vector());
    }
    const bool textual = cfg_.prompt_source == PromptSource::textual;
    const auto layout = plan_soft_prompt(textual ? scene.textual.nodes : scene.visual.nodes, slots);
    return soft_prompt_var(textual ? graphs->textual : graphs->visual, layout, backbone_->pad_vector());
}

ad::Var GraphPromptModel::decoder_forward(const ad::Var& prompt, const std::vector<int>& tokens,
                                          const ad::Var& encoder_states) const {
    return backbone_->decode(prompt, tokens, encoder_states);
}

SceneLosses GraphPromptModel::scene_losses(const PreparedScene& scene, const TrainConfig& train,
                                           std::uint64_t augment_seed) const {
    SceneLosses out;
    const ad::Var enc = encode_patches(scene);
    std::optional<GraphOutputs> graphs;
    if (cfg_.use_graph) {
        graphs = encode_graphs(scene, enc);

        ContrastiveBatch batch{graphs->visual->value, graphs->textual->value, scene.pairs, std::nullopt, std::nullopt};
        std::vector<ad::Var> parents = {graphs->visual, graphs->textual};
        const bool need_aug = train.intra_cl || cfg_.contrastive.inter_uses_augmented_text;
        if (need_aug) {
            const Graph v_aug = drop_edges(scene.visual, train.edge_drop_p, mix_seed(augment_seed, 1));
            const Graph t_aug = drop_edges(scene.textual, train.edge_drop_p, mix_seed(augment_seed, 2));
            const GraphOutputs aug = encode_graphs(scene, enc, &v_aug, &t_aug);
            batch.h_v_aug = aug.visual->value;
            batch.h_t_aug = aug.textual->value;
            parents.push_back(aug.visual);
            parents.push_back(aug.textual);
        }
        auto head = std::make_shared<std::optional<ProjectionHead>>();
        if (!projection_.empty()) {
            *head = ProjectionHead{projection_[0]->value, projection_[1]->value.row(0), projection_[2]->value,
                                   projection_[3]->value.row(0)};
            parents.insert(parents.end(), projection_.begin(), projection_.end());
        }
        auto objective = std::make_shared<ContrastiveObjective>(cfg_.contrastive, *head ? &**head : nullptr);
        out.terms = objective->forward(batch, train.intra_cl);
        Matrix value(1, 1);
        value(0, 0) = out.terms.total();
        out.contrastive = ad::custom(std::move(value), std::move(parents),
                                     [objective, head, need_aug](const Matrix& g) {
                                         ContrastiveGrads grads = objective->backward(g(0, 0));
                                         std::vector<Matrix> r = {std::move(grads.h_v), std::move(grads.h_t)};
                                         if (need_aug) {
                                             r.push_back(grads.h_v_aug.value_or(Matrix()));
                                             r.push_back(grads.h_t_aug.value_or(Matrix()));
                                         }
                                         if (grads.projection) {
                                             r.push_back(std::move(grads.projection->w1));
                                             r.push_back(Matrix(grads.projection->b1));
                                             r.push_back(std::move(grads.projection->w2));
                                             r.push_back(Matrix(grads.projection->b2));
                                         }
                                         return r;
                                     });
    }

    const ad::Var prompt = soft_prompt(scene, graphs ? &*graphs : nullptr);
    const auto slots = static_cast<Eigen::Index>(cfg_.backbone.prompt_slots);
    std::vector<ad::Var> per_example;
    for (const auto& ex : scene.examples) {
        const ad::Var logits = decoder_forward(prompt, ex.tokens, enc);
        const auto text_logits = ad::slice_rows(logits, slots, static_cast<Eigen::Index>(ex.tokens.size()));
        per_example.push_back(ad::cross_entropy(text_logits, ex.targets));
    }
    if (!per_example.empty()) {
        out.task = ad::scale(ad::sum(ad::concat_rows(per_example)), 1.0 / double(per_example.size()));
    }
    return out;
}

std::string GraphPromptModel::generate(const PreparedScene& scene, std::string_view question, int max_tokens) const {
    ad::NoGradGuard no_grad;
    const ad::Var enc = encode_patches(scene);
    std::optional<GraphOutputs> graphs;
    if (cfg_.use_graph) graphs = encode_graphs(scene, enc);
    const ad::Var prompt = soft_prompt(scene, graphs ? &*graphs : nullptr);

    std::vector<int> tokens = tokenizer_.encode(question);
    tokens.push_back(Tokenizer::kSep);
    std::vector<int> answer;
    for (int i = 0; i < max_tokens && static_cast<int>(tokens.size()) < cfg_.backbone.max_text_len; ++i) {
        const ad::Var logits = decoder_forward(prompt, tokens, enc);
        Eigen::Index best = 0;
        logits->value.row(logits->value.rows() - 1).maxCoeff(&best);
        if (best == Tokenizer::kEos) break;
        tokens.push_back(static_cast<int>(best));
        answer.push_back(static_cast<int>(best));
    }
    return tokenizer_.decode(answer);
}

std::string GraphPromptModel::generate(const ChartScene& scene, std::string_view question, int max_tokens) const {
    ChartScene stripped = scene;
    stripped.qa.clear();
    return generate(prepare(stripped), question, max_tokens);
}

void GraphPromptModel::round_to_float32() {
    for (const auto& e : params_.entries()) e.var->value = e.var->value.cast<float>().cast<double>();
}

nlohmann::json to_json(const MetricRow& row) {
    return {{"step", row.step}, {"L_task", row.l_task}, {"l_cl", row.l_cl}, {"lr", row.lr}};
}

TrainResult train(const std::vector<ChartScene>& dataset, ModelConfig model_cfg, const TrainConfig& cfg,
                  std::ostream* metrics_out) {
    cfg.validate();
    if (dataset.empty()) throw Error("training dataset is empty");
    model_cfg.use_graph = cfg.use_graph;
    model_cfg.prompt_source = cfg.prompt_source;
    GraphPromptModel model(std::move(model_cfg), Tokenizer::build(dataset), cfg.seed);

    std::vector<PreparedScene> prepared;
    prepared.reserve(dataset.size());
    for (const auto& s : dataset) prepared.push_back(model.prepare(s));

    ad::AdamW optimizer({0.9, 0.999, 1e-8, cfg.weight_decay, cfg.clip_norm});
    std::mt19937_64 order_rng(mix_seed(cfg.seed, 0x5ce7e5));
    std::vector<std::size_t> order(prepared.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), order_rng);
    std::size_t cursor = 0;

    const auto trainable = [&](std::string_view name) { return !(cfg.freeze_encoder && name.rfind("enc.", 0) == 0); };

    std::vector<MetricRow> log;
    for (int step = 0; step < cfg.steps; ++step) {
        model.params().zero_grad();
        double task_sum = 0, cl_sum = 0;
        int task_count = 0;
        const int batch = std::min<int>(cfg.batch_size, static_cast<int>(prepared.size()));
        for (int b = 0; b < batch; ++b) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), order_rng);
                cursor = 0;
            }
            const std::size_t idx = order[cursor++];
            const auto aug_seed = mix_seed(mix_seed(cfg.seed, std::uint64_t(step)), idx);
            SceneLosses losses;
            try {
                losses = model.scene_losses(prepared[idx], cfg, aug_seed);
            } catch (const Error& e) {
                // Inputs were validated up front, so a later failure means the weights blew up.
                if (step == 0) throw;
                throw Error("training diverged at step " + std::to_string(step) + " (" + e.what() + ")");
            }
            ad::Var total;
            if (losses.task) {
                task_sum += losses.task->value(0, 0);
                ++task_count;
                total = losses.task;
            }
            if (losses.contrastive) {
                cl_sum += losses.contrastive->value(0, 0);
                const auto weighted = ad::scale(losses.contrastive, cfg.lambda);
                total = total ? ad::add(total, weighted) : weighted;
            }
            if (total) ad::backward(total, 1.0 / double(batch));
        }
        MetricRow row;
        row.step = step;
        row.l_task = task_count > 0 ? task_sum / task_count : 0.0;
        row.l_cl = cfg.use_graph ? cl_sum / batch : 0.0;
        row.lr = cfg.warmup_steps > 0 && step < cfg.warmup_steps ? cfg.lr * double(step + 1) / cfg.warmup_steps : cfg.lr;
        if (!std::isfinite(row.l_task) || !std::isfinite(row.l_cl) || !std::isfinite(model.params().grad_norm())) {
            throw Error("training diverged at step " + std::to_string(step) + " (L_task=" + std::to_string(row.l_task) +
                        ", l_cl=" + std::to_string(row.l_cl) + ", grad norm=" +
                        std::to_string(model.params().grad_norm()) + ")");
        }
        optimizer.step(model.params(), row.lr, trainable);
        for (const auto& e : model.params().entries()) {
            if (!e.var->value.allFinite()) {
                throw Error("training diverged at step " + std::to_string(step) + " (parameter " + e.name +
                            " is no longer finite)");
            }
        }
        log.push_back(row);
        if (metrics_out) *metrics_out << to_json(row).dump() << '\n';
    }
    model.round_to_float32();
    return {std::move(model), std::move(log)};
}

}  // namespace chartgcl
