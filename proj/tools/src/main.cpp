// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartgcl/cli/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>

using namespace chartgcl;
using namespace chartgcl::cli;

int main(int argc, char** argv) {
    CLI::App app{"Graph contrastive soft prompts for chart question answering"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "out";
    app.add_option("--config", config_path, "JSON run config (comments allowed)");
    app.add_option("--seed", seed, "Overrides train.seed and data.synth_seed");
    app.add_option("--out", out_dir, "Output directory")->capture_default_str();

    auto* synth = app.add_subcommand("synth", "Generate synthetic chart scenes");
    SynthOptions synth_opts;
    std::string synth_output;
    bool synth_images = false;
    synth->add_option("--output", synth_output, "Scene file (default <out>/scenes.json)");
    synth->add_flag("--jsonl", synth_opts.jsonl, "Write one scene per line");
    synth->add_flag("--images", synth_images, "Also render PNG images next to the scene file");

    auto* dump = app.add_subcommand("graph-dump", "Print visual and textual graphs as JSON lines");
    GraphDumpOptions dump_opts;
    std::string dump_scene;
    dump->add_option("--scenes", dump_opts.scenes, "Scene file")->required();
    dump->add_option("--scene-id", dump_scene, "Only this scene");

    auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
    std::string train_scenes;
    train_cmd->add_option("--scenes", train_scenes, "Training scenes (default data.train)");

    auto* eval_cmd = app.add_subcommand("eval", "Answer test questions with a checkpoint and score them");
    EvalOptions eval_opts;
    std::vector<std::string> eval_scenes;
    eval_cmd->add_option("--checkpoint", eval_opts.checkpoint, "Checkpoint file")->required();
    eval_cmd->add_option("--scenes", eval_scenes, "Scene files, one split each (default data.test)");
    eval_cmd->add_option("--name", eval_opts.model_name, "Row label in the table")->capture_default_str();

    auto* cot_cmd = app.add_subcommand("cot", "Run the two-step chain-of-thought benchmark");
    std::string cot_scenes, cot_template;
    int cot_concurrency = 0;
    bool cot_resume = false;
    cot_cmd->add_option("--scenes", cot_scenes, "Scenes with images (default data.test)");
    cot_cmd->add_option("--template", cot_template, "Prompt template")
        ->check(CLI::IsMember({"original", "p1", "p2", "p3"}));
    cot_cmd->add_option("--concurrency", cot_concurrency, "Items in flight")->check(CLI::PositiveNumber);
    cot_cmd->add_flag("--resume", cot_resume, "Skip items already in the trace archive");

    auto* report = app.add_subcommand("report", "Render a results table");
    ReportOptions report_opts;
    std::vector<std::string> report_inputs;
    std::string report_metric;
    report->add_option("inputs", report_inputs, "predictions.jsonl or report.json files")->required();
    report->add_option("--metric", report_metric, "relaxed_accuracy, exact_match or bleu4");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        Context ctx;
        if (!config_path.empty()) {
            ctx.config = load_run_config(config_path);
            ctx.config_from_file = true;
        }
        if (seed) {
            ctx.config.train.seed = *seed;
            ctx.config.data.synth_seed = *seed;
        }
        ctx.out_dir = out_dir;

        if (*synth) {
            if (!synth_output.empty()) synth_opts.output = synth_output;
            if (synth_images) ctx.config.data.write_images = true;
            cmd_synth(ctx, synth_opts);
        } else if (*dump) {
            if (!dump_scene.empty()) dump_opts.scene_id = dump_scene;
            cmd_graph_dump(ctx, dump_opts);
        } else if (*train_cmd) {
            TrainOptions o;
            if (!train_scenes.empty()) o.scenes = train_scenes;
            cmd_train(ctx, o);
        } else if (*eval_cmd) {
            for (const auto& s : eval_scenes) eval_opts.scenes.emplace_back(s);
            cmd_eval(ctx, eval_opts);
        } else if (*cot_cmd) {
            if (!cot_template.empty()) ctx.config.cot.template_id = parse_template_id(cot_template);
            if (cot_concurrency > 0) ctx.config.cot.concurrency = cot_concurrency;
            if (cot_resume) ctx.config.cot.resume = true;
            CotOptions o;
            if (!cot_scenes.empty()) o.scenes = cot_scenes;
            cmd_cot(ctx, o);
        } else if (*report) {
            for (const auto& s : report_inputs) report_opts.inputs.emplace_back(s);
            if (!report_metric.empty()) report_opts.metric = report_metric;
            cmd_report(ctx, report_opts);
        }
    } catch (const std::exception& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << "error: " << msg << '\n';
        return 1;
    }
    return 0;
}
