// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "chartgcl/common.hpp"
#include "chartgcl/metrics.hpp"
#include "chartgcl/scene.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace chartgcl {

enum class TemplateId { original, p1, p2, p3 };

std::string_view to_string(TemplateId t);
TemplateId parse_template_id(std::string_view text);

/// The step-1 prompt for a question under a template.
std::string render_prompt(TemplateId id, const std::string& question);

/// The step-2 prompt wrapping the step-1 reasoning.
std::string render_step2(const std::string& step1_output);

/// Trims, strips one pair of wrapping quotes and a trailing period.
std::string extract_final_answer(std::string_view output);

struct ImageData {
    std::vector<unsigned char> bytes;
    std::string media_type;
};

/// Reads an image file; the media type follows the extension.
ImageData load_image(const std::filesystem::path& path);

std::string base64_encode(const std::vector<unsigned char>& bytes);

/// Failure worth retrying (timeouts, 429, 5xx).
class TransientError : public Error {
public:
    using Error::Error;
};

/// A multimodal chat model. Implementations must be safe to call from several
/// threads at once.
class MLLMClient {
public:
    virtual ~MLLMClient() = default;
    virtual std::string ask(const ImageData& image, const std::string& text) = 0;
};

/// Exponential backoff: attempt k (1-based) waits initial * multiplier^(k-1)
/// seconds before attempt k + 1.
struct RetryPolicy {
    int max_attempts = 4;
    double initial_backoff_seconds = 1.0;
    double multiplier = 2.0;
    std::function<void(double)> sleep;  // defaults to a real sleep

    void validate() const;
};

struct CoTTrace {
    std::string scene_id;
    std::string question;
    TemplateId template_id = TemplateId::original;
    std::string step1_prompt;
    std::string step1_output;
    std::string step2_prompt;
    std::string step2_output;
    std::string final_answer;
    std::string gold;
    AnswerKind kind = AnswerKind::textual;
    std::string started_at;
    std::string finished_at;
    int step1_attempts = 0;
    int step2_attempts = 0;
    bool failed = false;
    std::string error;
};

nlohmann::json to_json(const CoTTrace& t);
CoTTrace trace_from_json(const nlohmann::json& j);

/// Two calls on the same image (one for the original template), with retries.
/// Exhausted retries or a permanent error give a trace marked failed instead
/// of throwing.
CoTTrace run_two_step(MLLMClient& client, const ImageData& image, const std::string& question, TemplateId id,
                      const RetryPolicy& retry = {});

struct BenchmarkItem {
    std::string scene_id;
    std::string question;
    std::string gold;
    AnswerKind kind = AnswerKind::textual;
    std::filesystem::path image_path;
};

/// One item per QA. Relative image paths resolve against `base_dir`. Throws
/// when a scene has no image or the file is missing.
std::vector<BenchmarkItem> benchmark_items(const std::vector<ChartScene>& scenes,
                                           const std::filesystem::path& base_dir = {});

struct BenchmarkOptions {
    TemplateId template_id = TemplateId::original;
    int concurrency = 1;
    bool resume = false;
    std::filesystem::path archive;
    RetryPolicy retry;
    MetricId metric = MetricId::relaxed_accuracy;
    std::string split_label = "test";
};

struct BenchmarkResult {
    EvalResult eval;
    std::vector<CoTTrace> traces;  // item order
    std::size_t reused = 0;       // items answered from the archive
};

/// Runs every item not already archived, appending one JSONL trace per item,
/// then scores all items. Without `resume` an existing non-empty archive is
/// an error.
BenchmarkResult run_benchmark(const std::vector<BenchmarkItem>& items, MLLMClient& client,
                              const BenchmarkOptions& opts);

std::vector<CoTTrace> read_archive(const std::filesystem::path& path);

/// Scripted client for tests and offline runs. Records every call.
class MockClient final : public MLLMClient {
public:
    using Responder = std::function<std::string(const ImageData&, const std::string&)>;

    /// The default responder echoes the prompt.
    explicit MockClient(Responder responder = {});

    std::string ask(const ImageData& image, const std::string& text) override;

    /// The next `n` calls throw TransientError.
    void fail_next(int n);

    struct Call {
        std::string text;
        std::size_t image_bytes = 0;
        std::size_t image_hash = 0;
    };
    std::vector<Call> calls() const;
    std::size_t call_count() const;

private:
    Responder responder_;
    mutable std::mutex mutex_;
    std::vector<Call> calls_;
    int pending_failures_ = 0;
};

/// A mock that answers every item with its gold answer. Step-1 replies quote
/// the prompt so step 2 can be traced back to its item.
std::unique_ptr<MockClient> make_gold_mock(const std::vector<BenchmarkItem>& items);

struct ChatClientConfig {
    // Base URL of an OpenAI-compatible server, e.g. http://localhost:8000/v1
    std::string endpoint;
    std::string model;
    std::string api_key;
    double timeout_seconds = 120.0;
    int max_tokens = 512;
    double temperature = 0.0;
};

/// POST {endpoint}/chat/completions with the image as a base64 data URL.
class OpenAIChatClient final : public MLLMClient {
public:
    explicit OpenAIChatClient(ChatClientConfig cfg);
    std::string ask(const ImageData& image, const std::string& text) override;

    nlohmann::json request_body(const ImageData& image, const std::string& text) const;

private:
    ChatClientConfig cfg_;
};

}  // namespace chartgcl
