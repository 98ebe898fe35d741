// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartgcl/cli/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace chartgcl::cli {
namespace {

using nlohmann::json;

bool same_kind(const json& a, const json& b) {
    if (a.is_number() && b.is_number()) return !(a.is_number_float() && b.is_number_integer());
    return a.type() == b.type();
}

void check_keys(const json& given, const json& defaults, const std::string& path) {
    if (!given.is_object()) throw LoadError("config: '" + (path.empty() ? "<root>" : path) + "' must be an object");
    for (const auto& [key, value] : given.items()) {
        const std::string where = path.empty() ? key : path + "." + key;
        if (!defaults.contains(key)) throw LoadError("config: unknown key '" + where + "'");
        const json& d = defaults.at(key);
        if (d.is_object()) {
            check_keys(value, d, where);
        } else if (!same_kind(value, d)) {
            throw LoadError("config: '" + where + "' expects " + std::string(d.type_name()) + ", got " +
                            value.type_name());
        }
    }
}

std::vector<std::string> chart_type_names(const std::vector<ChartType>& types) {
    std::vector<std::string> out;
    for (auto t : types) out.emplace_back(to_string(t));
    return out;
}

}  // namespace

void RunConfig::validate() const {
    validate_synth_spec(data.synth);
    model.validate();
    train.validate();
    if (eval.metric != "auto") parse_metric_id(eval.metric);
    if (eval.max_answer_tokens < 1) throw Error("eval.max_answer_tokens must be >= 1");
    if (cot.concurrency < 1) throw Error("cot.concurrency must be >= 1");
    if (cot.client != "mock" && cot.client != "openai") throw Error("cot.client must be mock or openai");
    cot.retry.validate();
}

json to_json(const RunConfig& cfg) {
    const auto& s = cfg.data.synth;
    const auto& b = cfg.model.backbone;
    const auto& g = cfg.model.graph;
    const auto& c = cfg.model.contrastive;
    const auto& t = cfg.train;
    return {
        {"data",
         {{"train", cfg.data.train},
          {"test", cfg.data.test},
          {"classes", cfg.model.classes},
          {"synth_seed", cfg.data.synth_seed},
          {"write_images", cfg.data.write_images},
          {"synth",
           {{"count", s.count}, {"chart_types", chart_type_names(s.chart_types)},
            {"min_categories", s.min_categories}, {"max_categories", s.max_categories}, {"min_value", s.min_value},
            {"max_value", s.max_value}, {"width", s.width}, {"height", s.height}, {"patch_size", s.patch_size},
            {"questions_per_scene", s.questions_per_scene}, {"id_prefix", s.id_prefix}}}}},
        {"graph",
         {{"use_graph", t.use_graph},
          {"prompt_source", to_string(t.prompt_source)},
          {"knn_k", g.knn_k},
          {"edge_drop_p", t.edge_drop_p}}},
        {"encoder",
         {{"d_model", b.d_model}, {"heads", b.heads}, {"ffn_dim", b.ffn_dim}, {"encoder_layers", b.encoder_layers},
          {"decoder_layers", b.decoder_layers}, {"max_patches", b.max_patches}, {"max_text_len", b.max_text_len},
          {"gcn_layers", g.gcn_layers}, {"gcn_hidden", g.gcn_hidden}, {"text_embed_dim", g.text_embed_dim},
          {"embed_seed", g.embed_seed}, {"normalize_node_inputs", g.normalize_node_inputs},
          {"embed_backend", g.embed_backend}, {"embed_endpoint", g.embed_endpoint},
          {"freeze_encoder", t.freeze_encoder}}},
        {"contrastive",
         {{"theta", to_string(c.theta)}, {"tau", c.tau}, {"symmetric", c.symmetric},
          {"projection_hidden", c.projection_hidden}, {"inter_uses_augmented_text", c.inter_uses_augmented_text},
          {"intra_cl", t.intra_cl}, {"lambda", t.lambda}}},
        {"train",
         {{"lr", t.lr}, {"steps", t.steps}, {"batch_size", t.batch_size}, {"seed", t.seed},
          {"weight_decay", t.weight_decay}, {"clip_norm", t.clip_norm}, {"warmup_steps", t.warmup_steps}}},
        {"eval", {{"metric", cfg.eval.metric}, {"max_answer_tokens", cfg.eval.max_answer_tokens}}},
        {"cot",
         {{"template", to_string(cfg.cot.template_id)}, {"concurrency", cfg.cot.concurrency},
          {"resume", cfg.cot.resume}, {"client", cfg.cot.client}, {"endpoint", cfg.cot.endpoint},
          {"model", cfg.cot.model}, {"api_key", cfg.cot.api_key}, {"timeout_seconds", cfg.cot.timeout_seconds},
          {"max_tokens", cfg.cot.max_tokens}, {"max_attempts", cfg.cot.retry.max_attempts},
          {"initial_backoff_seconds", cfg.cot.retry.initial_backoff_seconds},
          {"backoff_multiplier", cfg.cot.retry.multiplier}}},
    };
}

RunConfig run_config_from_json(const json& given) {
    const json defaults = to_json(RunConfig{});
    check_keys(given, defaults, "");
    json j = defaults;
    j.merge_patch(given);

    RunConfig cfg;
    try {
        const auto& d = j.at("data");
        cfg.data.train = d.at("train");
        cfg.data.test = d.at("test");
        cfg.model.classes = d.at("classes").get<std::vector<std::string>>();
        cfg.data.synth_seed = d.at("synth_seed");
        cfg.data.write_images = d.at("write_images");
        const auto& s = d.at("synth");
        auto& sp = cfg.data.synth;
        sp.count = s.at("count");
        sp.chart_types.clear();
        for (const auto& name : s.at("chart_types")) sp.chart_types.push_back(parse_chart_type(name.get<std::string>()));
        sp.min_categories = s.at("min_categories");
        sp.max_categories = s.at("max_categories");
        sp.min_value = s.at("min_value");
        sp.max_value = s.at("max_value");
        sp.width = s.at("width");
        sp.height = s.at("height");
        sp.patch_size = s.at("patch_size");
        sp.questions_per_scene = s.at("questions_per_scene");
        sp.id_prefix = s.at("id_prefix");

        auto& t = cfg.train;
        const auto& g = j.at("graph");
        t.use_graph = g.at("use_graph");
        t.prompt_source = parse_prompt_source(g.at("prompt_source").get<std::string>());
        cfg.model.graph.knn_k = g.at("knn_k");
        t.edge_drop_p = g.at("edge_drop_p");

        const auto& e = j.at("encoder");
        auto& b = cfg.model.backbone;
        b.d_model = e.at("d_model");
        b.heads = e.at("heads");
        b.ffn_dim = e.at("ffn_dim");
        b.encoder_layers = e.at("encoder_layers");
        b.decoder_layers = e.at("decoder_layers");
        b.max_patches = e.at("max_patches");
        b.max_text_len = e.at("max_text_len");
        auto& ge = cfg.model.graph;
        ge.gcn_layers = e.at("gcn_layers");
        ge.gcn_hidden = e.at("gcn_hidden");
        ge.text_embed_dim = e.at("text_embed_dim");
        ge.embed_seed = e.at("embed_seed");
        ge.normalize_node_inputs = e.at("normalize_node_inputs");
        ge.embed_backend = e.at("embed_backend");
        ge.embed_endpoint = e.at("embed_endpoint");
        t.freeze_encoder = e.at("freeze_encoder");

        const auto& c = j.at("contrastive");
        auto& sc = cfg.model.contrastive;
        sc.theta = parse_similarity(c.at("theta").get<std::string>());
        sc.tau = c.at("tau");
        sc.symmetric = c.at("symmetric");
        sc.projection_hidden = c.at("projection_hidden");
        sc.inter_uses_augmented_text = c.at("inter_uses_augmented_text");
        t.intra_cl = c.at("intra_cl");
        t.lambda = c.at("lambda");

        const auto& tr = j.at("train");
        t.lr = tr.at("lr");
        t.steps = tr.at("steps");
        t.batch_size = tr.at("batch_size");
        t.seed = tr.at("seed");
        t.weight_decay = tr.at("weight_decay");
        t.clip_norm = tr.at("clip_norm");
        t.warmup_steps = tr.at("warmup_steps");

        const auto& ev = j.at("eval");
        cfg.eval.metric = ev.at("metric");
        cfg.eval.max_answer_tokens = ev.at("max_answer_tokens");

        const auto& co = j.at("cot");
        cfg.cot.template_id = parse_template_id(co.at("template").get<std::string>());
        cfg.cot.concurrency = co.at("concurrency");
        cfg.cot.resume = co.at("resume");
        cfg.cot.client = co.at("client");
        cfg.cot.endpoint = co.at("endpoint");
        cfg.cot.model = co.at("model");
        cfg.cot.api_key = co.at("api_key");
        cfg.cot.timeout_seconds = co.at("timeout_seconds");
        cfg.cot.max_tokens = co.at("max_tokens");
        cfg.cot.retry.max_attempts = co.at("max_attempts");
        cfg.cot.retry.initial_backoff_seconds = co.at("initial_backoff_seconds");
        cfg.cot.retry.multiplier = co.at("backoff_multiplier");
    } catch (const json::exception& ex) {
        throw LoadError(std::string("config: ") + ex.what());
    }
    cfg.model.use_graph = cfg.train.use_graph;
    cfg.model.prompt_source = cfg.train.prompt_source;
    cfg.validate();
    return cfg;
}

RunConfig parse_run_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw LoadError(std::string("config: ") + e.what());
    }
    return run_config_from_json(j);
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw LoadError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    try {
        return parse_run_config(ss.str());
    } catch (const LoadError& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
}

std::string expand_env(const std::string& value) {
    std::string out;
    std::size_t pos = 0;
    while (true) {
        const auto open = value.find("${", pos);
        if (open == std::string::npos) break;
        const auto close = value.find('}', open + 2);
        if (close == std::string::npos) throw Error("unterminated ${ in '" + value + "'");
        out.append(value, pos, open - pos);
        const std::string name = value.substr(open + 2, close - open - 2);
        const char* v = std::getenv(name.c_str());
        if (!v || !*v) throw Error("environment variable " + name + " is not set");
        out += v;
        pos = close + 1;
    }
    out.append(value, pos, std::string::npos);
    return out;
}

}  // namespace chartgcl::cli
