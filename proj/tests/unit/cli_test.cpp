// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartgcl/cli/commands.hpp"
#include "temp_dir.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

namespace chartgcl::cli {
namespace {

using chartgcl::testing::TempDir;

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    for (std::string line; std::getline(is, line);) {
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

RunConfig tiny_run() {
    RunConfig cfg = parse_run_config(R"({
        "data": {"synth": {"count": 6, "questions_per_scene": 2}},
        "encoder": {"d_model": 16, "heads": 2, "ffn_dim": 32, "encoder_layers": 1, "decoder_layers": 1,
                    "gcn_hidden": 8, "text_embed_dim": 8},
        "train": {"steps": 3, "batch_size": 2}
    })");
    return cfg;
}

class Workspace : public ::testing::Test {
protected:
    Context context(const std::string& sub) {
        Context ctx;
        ctx.config = tiny_run();
        ctx.out_dir = dir / sub;
        ctx.out = &out;
        return ctx;
    }

    TempDir dir;
    std::ostringstream out;
};

TEST(RunConfigJson, DefaultsRoundTrip) {
    const auto j = to_json(RunConfig{});
    EXPECT_EQ(to_json(run_config_from_json(j)), j);
    EXPECT_EQ(to_json(run_config_from_json(nlohmann::json::object())), j);
    for (const char* section : {"data", "graph", "encoder", "contrastive", "train", "eval", "cot"}) {
        EXPECT_TRUE(j.contains(section)) << section;
    }
}

TEST(RunConfigJson, OverridesLandInTheRightFields) {
    const auto cfg = parse_run_config(R"({
        // comments are allowed
        "graph": {"prompt_source": "visual", "knn_k": 4, "edge_drop_p": 0.1},
        "contrastive": {"theta": "cosine-with-projection", "intra_cl": true, "lambda": 0.5},
        "cot": {"template": "p2", "concurrency": 3}
    })");
    EXPECT_EQ(cfg.train.prompt_source, PromptSource::visual);
    EXPECT_EQ(cfg.model.graph.knn_k, 4);
    EXPECT_EQ(cfg.train.edge_drop_p, 0.1);
    EXPECT_EQ(cfg.model.contrastive.theta, Similarity::cosine_projection);
    EXPECT_TRUE(cfg.train.intra_cl);
    EXPECT_EQ(cfg.train.lambda, 0.5);
    EXPECT_EQ(cfg.cot.template_id, TemplateId::p2);
    EXPECT_EQ(cfg.cot.concurrency, 3);
}

TEST(RunConfigJson, UnknownKeyNamesDottedPath) {
    try {
        parse_run_config(R"({"train": {"lrr": 0.1}})");
        FAIL() << "expected LoadError";
    } catch (const LoadError& e) {
        EXPECT_NE(std::string(e.what()).find("train.lrr"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_run_config(R"({"extra": {}})"), LoadError);
}

TEST(RunConfigJson, TypeMismatchAndInvalidValues) {
    try {
        parse_run_config(R"({"train": {"steps": "ten"}})");
        FAIL() << "expected LoadError";
    } catch (const LoadError& e) {
        EXPECT_NE(std::string(e.what()).find("train.steps"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_run_config(R"({"cot": {"concurrency": 0}})"), Error);
    EXPECT_THROW(parse_run_config(R"({"graph": {"edge_drop_p": 1.0}})"), Error);
    EXPECT_THROW(parse_run_config(R"({"contrastive": {"lambda": -1}})"), Error);
    EXPECT_THROW(parse_run_config(R"({"cot": {"template": "p9"}})"), Error);
    EXPECT_THROW(parse_run_config("{not json"), LoadError);
}

TEST(ExpandEnv, SubstitutesAndFailsLoudly) {
    ::setenv("CHARTGCL_TEST_KEY", "abc", 1);
    EXPECT_EQ(expand_env("${CHARTGCL_TEST_KEY}"), "abc");
    EXPECT_EQ(expand_env("k-${CHARTGCL_TEST_KEY}-${CHARTGCL_TEST_KEY}"), "k-abc-abc");
    EXPECT_EQ(expand_env("plain"), "plain");
    ::unsetenv("CHARTGCL_TEST_KEY");
    EXPECT_THROW(expand_env("${CHARTGCL_TEST_KEY}"), Error);
    EXPECT_THROW(expand_env("${OPEN"), Error);
}

TEST(ChooseMetric, AutoAndExplicit) {
    EXPECT_EQ(choose_metric("auto", {AnswerKind::numeric, AnswerKind::textual}), MetricId::relaxed_accuracy);
    EXPECT_EQ(choose_metric("auto", {AnswerKind::open_ended}), MetricId::bleu4);
    EXPECT_EQ(choose_metric("exact_match", {AnswerKind::open_ended}), MetricId::exact_match);
    EXPECT_THROW(choose_metric("rouge", {}), Error);
}

TEST_F(Workspace, SynthIsDeterministicAndWritesImages) {
    auto ctx = context("a");
    ctx.config.data.write_images = true;
    const auto a = cmd_synth(ctx, {});
    const auto b = cmd_synth(context("b"), {});
    const auto scenes = load_scenes(a);
    ASSERT_EQ(scenes.size(), 6u);
    for (const auto& s : scenes) {
        EXPECT_FALSE(s.image_path.empty());
        EXPECT_TRUE(std::filesystem::exists(a.parent_path() / s.image_path));
    }
    auto plain = load_scenes(b);
    EXPECT_EQ(plain.size(), 6u);
    for (std::size_t i = 0; i < plain.size(); ++i) {
        plain[i].image_path = scenes[i].image_path;
        EXPECT_EQ(plain[i], scenes[i]);
    }
    const auto jsonl = cmd_synth(context("c"), {dir / "c" / "s.jsonl", true});
    EXPECT_EQ(load_scenes(jsonl), load_scenes(b));
    auto reseeded = context("d");
    reseeded.config.data.synth_seed = 99;
    EXPECT_NE(testing::read_file(cmd_synth(reseeded, {})), testing::read_file(b));
}

TEST_F(Workspace, GraphDumpPrintsOneLinePerScene) {
    const auto scenes = cmd_synth(context("d"), {});
    out.str("");
    cmd_graph_dump(context("d"), {scenes, std::nullopt});
    const auto rows = lines_of(out.str());
    ASSERT_EQ(rows.size(), 6u);
    const auto first = nlohmann::json::parse(rows[0]);
    EXPECT_TRUE(first.contains("visual") && first.contains("textual"));
    const std::string id = first.at("scene_id");

    out.str("");
    cmd_graph_dump(context("d"), {scenes, id});
    EXPECT_EQ(lines_of(out.str()), std::vector<std::string>{rows[0]});
    EXPECT_THROW(cmd_graph_dump(context("d"), {scenes, std::string("nope")}), Error);
    EXPECT_THROW(cmd_graph_dump(context("d"), {dir / "missing.json", std::nullopt}), Error);
}

TEST_F(Workspace, TrainEvalAndReport) {
    const auto scenes = cmd_synth(context("data"), {});
    auto ctx = context("run");
    ctx.config.data.train = scenes.string();
    const auto trained = cmd_train(ctx, {});
    EXPECT_TRUE(std::filesystem::exists(trained.checkpoint));
    const auto rows = lines_of(testing::read_file(trained.metrics));
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(nlohmann::json::parse(rows[2]).at("step"), 2);

    // The snapshot alone reproduces the run.
    auto again = context("rerun");
    again.config = load_run_config(trained.resolved_config);
    const auto replay = cmd_train(again, {});
    EXPECT_EQ(testing::read_file(replay.metrics), testing::read_file(trained.metrics));
    EXPECT_EQ(testing::read_file(replay.checkpoint), testing::read_file(trained.checkpoint));

    auto eval_ctx = context("eval");
    const auto result = cmd_eval(eval_ctx, {trained.checkpoint, {scenes}, "toy"});
    ASSERT_EQ(result.splits.size(), 1u);
    EXPECT_EQ(result.splits[0].items.size(), 12u);
    EXPECT_NE(out.str().find("toy"), std::string::npos);
    const auto predictions = read_predictions(dir / "eval" / "predictions.jsonl");
    EXPECT_EQ(predictions.size(), 12u);

    out.str("");
    const auto table = cmd_report(context("eval"), {{dir / "eval" / "report.json", dir / "eval" / "predictions.jsonl"},
                                                    std::nullopt});
    EXPECT_NE(table.find("toy"), std::string::npos);
    EXPECT_NE(table.find("predictions"), std::string::npos);
    EXPECT_EQ(out.str(), table);
    EXPECT_THROW(cmd_report(context("eval"), {{}, std::nullopt}), Error);
    EXPECT_THROW(cmd_report(context("eval"), {{dir / "none.json"}, std::nullopt}), Error);
}

TEST_F(Workspace, EvalErrors) {
    const auto scenes = cmd_synth(context("data"), {});
    EXPECT_THROW(cmd_eval(context("e"), {dir / "missing.ckpt", {scenes}, "m"}), Error);

    auto ctx = context("run");
    ctx.config.data.train = scenes.string();
    const auto trained = cmd_train(ctx, {});
    EXPECT_THROW(cmd_eval(context("e"), {trained.checkpoint, {}, "m"}), Error);

    auto mismatch = context("e");
    mismatch.config_from_file = true;
    mismatch.config.model.backbone.d_model = 32;
    try {
        cmd_eval(mismatch, {trained.checkpoint, {scenes}, "m"});
        FAIL() << "expected a dimension mismatch";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("d_model"), std::string::npos) << e.what();
    }
    EXPECT_THROW(cmd_train(context("t"), {}), Error);
}

TEST_F(Workspace, CotWithMockAndResume) {
    auto data_ctx = context("data");
    data_ctx.config.data.write_images = true;
    const auto scenes = cmd_synth(data_ctx, {});
    auto ctx = context("cot");
    ctx.config.cot.template_id = TemplateId::p1;
    ctx.config.cot.concurrency = 3;
    const auto first = cmd_cot(ctx, {scenes});
    EXPECT_EQ(first.traces.size(), 12u);
    EXPECT_DOUBLE_EQ(first.eval.splits.at(0).relaxed_acc, 100.0);
    EXPECT_TRUE(std::filesystem::exists(dir / "cot" / "cot_report.json"));

    EXPECT_THROW(cmd_cot(ctx, {scenes}), Error);
    ctx.config.cot.resume = true;
    const auto second = cmd_cot(ctx, {scenes});
    EXPECT_EQ(second.reused, 12u);
    EXPECT_EQ(read_archive(dir / "cot" / "cot_traces.jsonl").size(), 12u);
}

TEST_F(Workspace, CotNeedsImagesAndApiKey) {
    const auto scenes = cmd_synth(context("data"), {});
    EXPECT_THROW(cmd_cot(context("cot"), {scenes}), Error);

    auto data_ctx = context("img");
    data_ctx.config.data.write_images = true;
    const auto with_images = cmd_synth(data_ctx, {});
    auto ctx = context("remote");
    ctx.config.cot.client = "openai";
    ::unsetenv("MLLM_API_KEY");
    try {
        cmd_cot(ctx, {with_images});
        FAIL() << "expected a missing key error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("MLLM_API_KEY"), std::string::npos) << e.what();
    }
}

}  // namespace
}  // namespace chartgcl::cli
