// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartgcl/cli/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <ostream>

namespace chartgcl::cli {
namespace fs = std::filesystem;

namespace {

std::ostream& out_of(const Context& ctx) { return ctx.out ? *ctx.out : std::cout; }

void ensure_dir(const fs::path& dir) {
    if (dir.empty()) return;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create directory " + dir.string() + ": " + ec.message());
}

fs::path require_path(const std::optional<fs::path>& flag, const std::string& configured, const std::string& what) {
    if (flag) return *flag;
    if (configured.empty()) throw Error("no " + what + " scenes: set data." + what + " or pass --scenes");
    return configured;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw Error("cannot write " + path.string());
    os << text;
    if (!os) throw Error("failed writing " + path.string());
}

std::unique_ptr<Embedder> embedder_for(const GraphEncoderConfig& g) {
    if (g.embed_backend == "external-encoder") return std::make_unique<HttpEmbedder>(g.embed_endpoint, g.text_embed_dim);
    return std::make_unique<StubEmbedder>(g.text_embed_dim, g.embed_seed);
}

void check_dims(const ModelConfig& from_checkpoint, const ModelConfig& configured) {
    const auto a = to_json(from_checkpoint);
    const auto b = to_json(configured);
    for (const char* section : {"backbone", "graph"}) {
        for (const auto& [key, value] : a.at(section).items()) {
            if (b.at(section).at(key) != value) {
                throw Error(std::string("checkpoint/config mismatch: ") + section + "." + key + " is " + value.dump() +
                            " in the checkpoint but " + b.at(section).at(key).dump() + " in the config");
            }
        }
    }
    if (a.at("classes") != b.at("classes")) throw Error("checkpoint/config mismatch: class vocabularies differ");
}

}  // namespace

MetricId choose_metric(const std::string& setting, const std::vector<AnswerKind>& kinds) {
    if (setting != "auto") return parse_metric_id(setting);
    const bool all_open = !kinds.empty() && std::all_of(kinds.begin(), kinds.end(), [](AnswerKind k) {
        return k == AnswerKind::open_ended;
    });
    return all_open ? MetricId::bleu4 : MetricId::relaxed_accuracy;
}

fs::path cmd_synth(const Context& ctx, const SynthOptions& opts) {
    const auto& cfg = ctx.config;
    auto scenes = synth_generate(cfg.data.synth, cfg.data.synth_seed);
    const fs::path path = opts.output.value_or(ctx.out_dir / (opts.jsonl ? "scenes.jsonl" : "scenes.json"));
    ensure_dir(path.parent_path());
    if (cfg.data.write_images) {
        const fs::path image_dir = path.parent_path() / "images";
        ensure_dir(image_dir);
        for (auto& scene : scenes) {
            const fs::path rel = fs::path("images") / (scene.scene_id + ".png");
            const auto png = render_scene_png(scene);
            std::ofstream os(path.parent_path() / rel, std::ios::binary | std::ios::trunc);
            os.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
            if (!os) throw Error("cannot write " + (path.parent_path() / rel).string());
            scene.image_path = rel.generic_string();
        }
    }
    save_scenes(path, scenes, opts.jsonl);
    out_of(ctx) << "wrote " << scenes.size() << " scenes to " << path.string() << '\n';
    return path;
}

void cmd_graph_dump(const Context& ctx, const GraphDumpOptions& opts) {
    const auto& model = ctx.config.model;
    const auto scenes = load_scenes(opts.scenes, model.classes);
    auto embedder = embedder_for(model.graph);
    bool found = false;
    for (const auto& scene : scenes) {
        if (opts.scene_id && scene.scene_id != *opts.scene_id) continue;
        found = true;
        std::vector<int> ids;
        std::vector<std::string> labels, ocr;
        for (const auto& obj : scene.objects) {
            ids.push_back(obj.id);
            labels.push_back(obj.cls);
            ocr.insert(ocr.end(), obj.ocr_texts.begin(), obj.ocr_texts.end());
        }
        const Matrix raster = patch_features(scene, model.classes);
        const Matrix visual_feats = init_nodes_patch_mean(raster, align_objects_to_patches(scene), ids);
        const Graph visual = build_visual_graph(scene, visual_feats, model.graph.knn_k);
        const Matrix ocr_feats = ocr.empty() ? Matrix(0, embedder->dim()) : embedder->embed_all(ocr);
        const Graph textual = build_textual_graph(scene, embedder->embed_all(labels), ocr_feats, model.graph.knn_k);
        const nlohmann::json row = {
            {"scene_id", scene.scene_id}, {"visual", graph_debug_json(visual)}, {"textual", graph_debug_json(textual)}};
        out_of(ctx) << row.dump() << '\n';
    }
    if (opts.scene_id && !found) throw Error("scene '" + *opts.scene_id + "' not found in " + opts.scenes.string());
}

TrainOutputs cmd_train(const Context& ctx, const TrainOptions& opts) {
    const auto& cfg = ctx.config;
    const fs::path data = require_path(opts.scenes, cfg.data.train, "train");
    const auto scenes = load_scenes(data, cfg.model.classes);
    ensure_dir(ctx.out_dir);

    TrainOutputs outputs;
    outputs.resolved_config = ctx.out_dir / "resolved_config.json";
    outputs.metrics = ctx.out_dir / "metrics.jsonl";
    outputs.checkpoint = ctx.out_dir / "model.ckpt";

    nlohmann::json snapshot = to_json(cfg);
    snapshot["data"]["train"] = data.string();
    write_text(outputs.resolved_config, snapshot.dump(2) + "\n");

    std::ofstream metrics(outputs.metrics, std::ios::trunc);
    if (!metrics) throw Error("cannot write " + outputs.metrics.string());
    TrainResult result = train(scenes, cfg.model, cfg.train, &metrics);
    save_checkpoint(result.model, outputs.checkpoint);
    if (!result.log.empty()) outputs.last = result.log.back();
    out_of(ctx) << "trained " << cfg.train.steps << " steps on " << scenes.size() << " scenes: L_task=" << std::setprecision(6)
                << outputs.last.l_task << " l_cl=" << outputs.last.l_cl << '\n'
                << "checkpoint " << outputs.checkpoint.string() << '\n';
    return outputs;
}

EvalResult cmd_eval(const Context& ctx, const EvalOptions& opts) {
    const auto& cfg = ctx.config;
    GraphPromptModel model = load_checkpoint(opts.checkpoint);
    if (ctx.config_from_file) check_dims(model.config(), cfg.model);

    std::vector<fs::path> files = opts.scenes;
    if (files.empty()) {
        if (cfg.data.test.empty()) throw Error("no test scenes: set data.test or pass --scenes");
        files.emplace_back(cfg.data.test);
    }

    std::vector<PredictionRecord> records;
    for (const auto& file : files) {
        const auto scenes = load_scenes(file, model.config().classes);
        if (scenes.empty()) throw Error("no scenes in " + file.string());
        for (const auto& scene : scenes) {
            ChartScene bare = scene;
            bare.qa.clear();
            const PreparedScene prepared = model.prepare(bare);
            for (const auto& qa : scene.qa) {
                records.push_back({scene.scene_id, qa.question,
                                   model.generate(prepared, qa.question, cfg.eval.max_answer_tokens), qa.answer, qa.kind,
                                   file.stem().string()});
            }
        }
    }
    if (records.empty()) throw Error("the test scenes carry no questions");
    std::vector<AnswerKind> kinds;
    for (const auto& r : records) kinds.push_back(r.kind);
    const EvalResult result = evaluate_predictions(records, choose_metric(cfg.eval.metric, kinds));

    ensure_dir(ctx.out_dir);
    write_predictions(ctx.out_dir / "predictions.jsonl", records);
    nlohmann::json report = to_json(result);
    report["model"] = opts.model_name;
    write_text(ctx.out_dir / "report.json", report.dump(2) + "\n");
    out_of(ctx) << format_table({{opts.model_name, result}});
    return result;
}

BenchmarkResult cmd_cot(const Context& ctx, const CotOptions& opts) {
    const auto& cfg = ctx.config;
    const fs::path data = require_path(opts.scenes, cfg.data.test, "test");
    const auto scenes = load_scenes(data, cfg.model.classes);
    const auto items = benchmark_items(scenes, data.parent_path());

    std::unique_ptr<MLLMClient> client;
    if (cfg.cot.client == "openai") {
        ChatClientConfig cc;
        cc.endpoint = cfg.cot.endpoint;
        cc.model = cfg.cot.model;
        cc.api_key = expand_env(cfg.cot.api_key);
        cc.timeout_seconds = cfg.cot.timeout_seconds;
        cc.max_tokens = cfg.cot.max_tokens;
        client = std::make_unique<OpenAIChatClient>(cc);
    } else {
        client = make_gold_mock(items);
    }

    ensure_dir(ctx.out_dir);
    BenchmarkOptions bo;
    bo.template_id = cfg.cot.template_id;
    bo.concurrency = cfg.cot.concurrency;
    bo.resume = cfg.cot.resume;
    bo.archive = ctx.out_dir / "cot_traces.jsonl";
    bo.retry = cfg.cot.retry;
    std::vector<AnswerKind> kinds;
    for (const auto& item : items) kinds.push_back(item.kind);
    bo.metric = choose_metric(cfg.eval.metric, kinds);
    bo.split_label = data.stem().string();

    BenchmarkResult result = run_benchmark(items, *client, bo);
    const std::string name = cfg.cot.client + "/" + std::string(to_string(cfg.cot.template_id));
    nlohmann::json report = to_json(result.eval);
    report["model"] = name;
    report["reused"] = result.reused;
    write_text(ctx.out_dir / "cot_report.json", report.dump(2) + "\n");
    std::size_t failed = 0;
    for (const auto& t : result.traces) failed += t.failed;
    out_of(ctx) << format_table({{name, result.eval}}) << result.traces.size() << " items, " << result.reused
                << " reused from the archive, " << failed << " failed\n";
    return result;
}

std::string cmd_report(const Context& ctx, const ReportOptions& opts) {
    if (opts.inputs.empty()) throw Error("report needs at least one predictions or report file");
    std::vector<std::pair<std::string, EvalResult>> rows;
    for (const auto& path : opts.inputs) {
        if (path.extension() == ".jsonl") {
            const auto records = read_predictions(path);
            std::vector<AnswerKind> kinds;
            for (const auto& r : records) kinds.push_back(r.kind);
            rows.emplace_back(path.stem().string(),
                              evaluate_predictions(records, choose_metric(opts.metric.value_or(ctx.config.eval.metric), kinds)));
        } else {
            std::ifstream is(path);
            if (!is) throw LoadError("cannot open " + path.string());
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(is);
            } catch (const nlohmann::json::exception& e) {
                throw LoadError(path.string() + ": " + e.what());
            }
            EvalResult r = eval_result_from_json(j);
            if (opts.metric) r = combine_splits(std::move(r.splits), parse_metric_id(*opts.metric));
            rows.emplace_back(j.value("model", path.stem().string()), std::move(r));
        }
    }
    const std::string table = format_table(rows);
    out_of(ctx) << table;
    return table;
}

}  // namespace chartgcl::cli
