// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartgcl/cot.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <optional>
#include <thread>
#include <tuple>

namespace chartgcl {
namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[40];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

struct AskOutcome {
    std::optional<std::string> text;
    int attempts = 0;
    std::string error;
};

AskOutcome ask_with_retry(MLLMClient& client, const ImageData& image, const std::string& prompt,
                          const RetryPolicy& retry) {
    AskOutcome out;
    double wait = retry.initial_backoff_seconds;
    for (int attempt = 1; attempt <= retry.max_attempts; ++attempt) {
        out.attempts = attempt;
        try {
            out.text = client.ask(image, prompt);
            return out;
        } catch (const TransientError& e) {
            out.error = e.what();
            if (attempt == retry.max_attempts) break;
            if (retry.sleep) {
                retry.sleep(wait);
            } else {
                std::this_thread::sleep_for(std::chrono::duration<double>(wait));
            }
            wait *= retry.multiplier;
        } catch (const std::exception& e) {
            out.error = e.what();
            return out;
        }
    }
    out.error = "gave up after " + std::to_string(out.attempts) + " attempts: " + out.error;
    return out;
}

using TraceKey = std::tuple<std::string, std::string, std::string>;

TraceKey key_of(const std::string& scene_id, const std::string& question, TemplateId t) {
    return {scene_id, question, std::string(to_string(t))};
}

std::string media_type_for(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    if (ext == ".png") return "image/png";
    if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
    if (ext == ".gif") return "image/gif";
    if (ext == ".webp") return "image/webp";
    throw Error("unsupported image type '" + ext + "' for " + path.string());
}

}  // namespace

std::string_view to_string(TemplateId t) {
    switch (t) {
        case TemplateId::original: return "original";
        case TemplateId::p1: return "p1";
        case TemplateId::p2: return "p2";
        case TemplateId::p3: return "p3";
    }
    return "?";
}

TemplateId parse_template_id(std::string_view text) {
    if (text == "original") return TemplateId::original;
    if (text == "p1") return TemplateId::p1;
    if (text == "p2") return TemplateId::p2;
    if (text == "p3") return TemplateId::p3;
    throw Error("unknown template '" + std::string(text) + "' (expected original, p1, p2 or p3)");
}

std::string render_prompt(TemplateId id, const std::string& question) {
    if (question.empty()) throw Error("render_prompt: empty question");
    switch (id) {
        case TemplateId::original: return question;
        case TemplateId::p1: return question + " Let's first convert the chart to table, and then think step by step";
        case TemplateId::p2:
            return question + " Let's first convert the chart to scene graph, and then think step by step";
        case TemplateId::p3: return "What are the steps required to answer the following question? " + question;
    }
    throw Error("render_prompt: unknown template");
}

std::string render_step2(const std::string& step1_output) {
    return "Reasoning Steps: " + step1_output + " Based on the chart and reasoning step, generate the answer directly.";
}

std::string extract_final_answer(std::string_view output) {
    std::string_view s = trim(output);
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\''))) {
        s = trim(s.substr(1, s.size() - 2));
    }
    if (!s.empty() && s.back() == '.') s = trim(s.substr(0, s.size() - 1));
    return std::string(s);
}

ImageData load_image(const std::filesystem::path& path) {
    ImageData img;
    img.media_type = media_type_for(path);
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("missing image " + path.string());
    img.bytes.assign(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
    if (img.bytes.empty()) throw Error("image " + path.string() + " is empty");
    return img;
}

void RetryPolicy::validate() const {
    if (max_attempts < 1) throw Error("max_attempts must be >= 1");
    if (!(initial_backoff_seconds >= 0) || !(multiplier >= 1)) {
        throw Error("backoff must be >= 0 with multiplier >= 1");
    }
}

nlohmann::json to_json(const CoTTrace& t) {
    return {{"scene_id", t.scene_id},
            {"question", t.question},
            {"template_id", to_string(t.template_id)},
            {"step1_prompt", t.step1_prompt},
            {"step1_output", t.step1_output},
            {"step2_prompt", t.step2_prompt},
            {"step2_output", t.step2_output},
            {"final_answer", t.final_answer},
            {"gold", t.gold},
            {"kind", to_string(t.kind)},
            {"started_at", t.started_at},
            {"finished_at", t.finished_at},
            {"step1_attempts", t.step1_attempts},
            {"step2_attempts", t.step2_attempts},
            {"status", t.failed ? "failed" : "ok"},
            {"error", t.error}};
}

CoTTrace trace_from_json(const nlohmann::json& j) {
    try {
        CoTTrace t;
        t.scene_id = j.at("scene_id");
        t.question = j.at("question");
        t.template_id = parse_template_id(j.at("template_id").get<std::string>());
        t.step1_prompt = j.at("step1_prompt");
        t.step1_output = j.at("step1_output");
        t.step2_prompt = j.at("step2_prompt");
        t.step2_output = j.at("step2_output");
        t.final_answer = j.at("final_answer");
        t.gold = j.at("gold");
        t.kind = parse_answer_kind(j.at("kind").get<std::string>());
        t.started_at = j.at("started_at");
        t.finished_at = j.at("finished_at");
        t.step1_attempts = j.at("step1_attempts");
        t.step2_attempts = j.at("step2_attempts");
        t.failed = j.at("status").get<std::string>() == "failed";
        t.error = j.at("error");
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("trace: ") + e.what());
    }
}

CoTTrace run_two_step(MLLMClient& client, const ImageData& image, const std::string& question, TemplateId id,
                      const RetryPolicy& retry) {
    retry.validate();
    CoTTrace t;
    t.question = question;
    t.template_id = id;
    t.started_at = utc_now();
    t.step1_prompt = render_prompt(id, question);

    const AskOutcome first = ask_with_retry(client, image, t.step1_prompt, retry);
    t.step1_attempts = first.attempts;
    if (!first.text) {
        t.failed = true;
        t.error = "step 1: " + first.error;
    } else {
        t.step1_output = *first.text;
        if (id == TemplateId::original) {
            t.final_answer = extract_final_answer(t.step1_output);
        } else {
            t.step2_prompt = render_step2(t.step1_output);
            const AskOutcome second = ask_with_retry(client, image, t.step2_prompt, retry);
            t.step2_attempts = second.attempts;
            if (!second.text) {
                t.failed = true;
                t.error = "step 2: " + second.error;
            } else {
                t.step2_output = *second.text;
                t.final_answer = extract_final_answer(t.step2_output);
            }
        }
    }
    t.finished_at = utc_now();
    return t;
}

std::vector<BenchmarkItem> benchmark_items(const std::vector<ChartScene>& scenes, const std::filesystem::path& base_dir) {
    std::vector<BenchmarkItem> items;
    for (const auto& s : scenes) {
        if (s.image_path.empty()) throw Error("scene " + s.scene_id + " has no image_path");
        std::filesystem::path img = s.image_path;
        if (img.is_relative() && !base_dir.empty()) img = base_dir / img;
        if (!std::filesystem::exists(img)) throw Error("scene " + s.scene_id + ": missing image " + img.string());
        for (const auto& qa : s.qa) items.push_back({s.scene_id, qa.question, qa.answer, qa.kind, img});
    }
    return items;
}

std::vector<CoTTrace> read_archive(const std::filesystem::path& path) {
    std::vector<CoTTrace> out;
    std::ifstream is(path);
    if (!is) return out;
    std::string line;
    for (int lineno = 1; std::getline(is, line); ++lineno) {
        if (trim(line).empty()) continue;
        try {
            out.push_back(trace_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw LoadError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

BenchmarkResult run_benchmark(const std::vector<BenchmarkItem>& items, MLLMClient& client,
                              const BenchmarkOptions& opts) {
    if (items.empty()) throw Error("benchmark has no items");
    if (opts.concurrency < 1) throw Error("concurrency must be >= 1");
    if (opts.archive.empty()) throw Error("benchmark needs an archive path");
    opts.retry.validate();
    for (const auto& item : items) {
        if (!std::filesystem::exists(item.image_path)) {
            throw Error("scene " + item.scene_id + ": missing image " + item.image_path.string());
        }
    }

    std::map<TraceKey, CoTTrace> done;
    const bool archive_has_rows = std::filesystem::exists(opts.archive) && std::filesystem::file_size(opts.archive) > 0;
    if (archive_has_rows && !opts.resume) {
        throw Error("archive " + opts.archive.string() + " already has traces; pass --resume or choose another path");
    }
    if (opts.resume) {
        for (auto& t : read_archive(opts.archive)) {
            if (!t.failed) {
                const auto key = key_of(t.scene_id, t.question, t.template_id);
                done.insert_or_assign(key, std::move(t));
            }
        }
    }

    BenchmarkResult result;
    result.traces.resize(items.size());
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto it = done.find(key_of(items[i].scene_id, items[i].question, opts.template_id));
        if (it != done.end()) {
            result.traces[i] = it->second;
            ++result.reused;
        } else {
            todo.push_back(i);
        }
    }

    std::ofstream archive(opts.archive, std::ios::app);
    if (!archive) throw Error("cannot open archive " + opts.archive.string());
    std::mutex write_mutex;
    std::atomic<std::size_t> next{0};
    std::exception_ptr fatal;

    const auto worker = [&] {
        for (std::size_t k = next++; k < todo.size(); k = next++) {
            const auto& item = items[todo[k]];
            CoTTrace trace;
            try {
                const ImageData image = load_image(item.image_path);
                trace = run_two_step(client, image, item.question, opts.template_id, opts.retry);
            } catch (const std::exception& e) {
                trace.question = item.question;
                trace.template_id = opts.template_id;
                trace.failed = true;
                trace.error = e.what();
            }
            trace.scene_id = item.scene_id;
            trace.gold = item.gold;
            trace.kind = item.kind;
            std::lock_guard lock(write_mutex);
            archive << to_json(trace).dump() << '\n';
            archive.flush();
            if (!archive && !fatal) fatal = std::make_exception_ptr(Error("failed writing " + opts.archive.string()));
            result.traces[todo[k]] = std::move(trace);
        }
    };
    const int width = std::min<int>(opts.concurrency, static_cast<int>(std::max<std::size_t>(todo.size(), 1)));
    if (width == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < width; ++w) pool.emplace_back(worker);
    }
    if (fatal) std::rethrow_exception(fatal);

    std::vector<std::string> preds, golds;
    std::vector<AnswerKind> kinds;
    for (const auto& t : result.traces) {
        preds.push_back(t.final_answer);
        golds.push_back(t.gold);
        kinds.push_back(t.kind);
    }
    result.eval = combine_splits({evaluate_split(preds, golds, kinds, opts.split_label)}, opts.metric);
    return result;
}

MockClient::MockClient(Responder responder) : responder_(std::move(responder)) {
    if (!responder_) responder_ = [](const ImageData&, const std::string& text) { return "echo: " + text; };
}

std::string MockClient::ask(const ImageData& image, const std::string& text) {
    {
        std::lock_guard lock(mutex_);
        const std::string_view raw(reinterpret_cast<const char*>(image.bytes.data()), image.bytes.size());
        calls_.push_back({text, image.bytes.size(), std::hash<std::string_view>{}(raw)});
        if (pending_failures_ > 0) {
            --pending_failures_;
            throw TransientError("mock transient failure");
        }
    }
    return responder_(image, text);
}

void MockClient::fail_next(int n) {
    std::lock_guard lock(mutex_);
    pending_failures_ = n;
}

std::vector<MockClient::Call> MockClient::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

std::size_t MockClient::call_count() const {
    std::lock_guard lock(mutex_);
    return calls_.size();
}

std::unique_ptr<MockClient> make_gold_mock(const std::vector<BenchmarkItem>& items) {
    // (image hash, question) -> gold. Step-2 prompts carry the step-1 reply,
    // which quotes the step-1 prompt and therefore the question.
    auto golds = std::make_shared<std::vector<std::tuple<std::size_t, std::string, std::string>>>();
    for (const auto& item : items) {
        const ImageData img = load_image(item.image_path);
        const std::string_view raw(reinterpret_cast<const char*>(img.bytes.data()), img.bytes.size());
        golds->emplace_back(std::hash<std::string_view>{}(raw), item.question, item.gold);
    }
    static const std::string kStep2 = "Reasoning Steps: ";
    return std::make_unique<MockClient>([golds](const ImageData& image, const std::string& text) -> std::string {
        const std::string_view raw(reinterpret_cast<const char*>(image.bytes.data()), image.bytes.size());
        const std::size_t h = std::hash<std::string_view>{}(raw);
        if (text.rfind(kStep2, 0) != 0) {
            for (const auto& [hash, question, gold] : *golds) {
                if (hash == h && text == question) return gold;
            }
            return "Plan: " + text;
        }
        const std::string_view payload = std::string_view(text).substr(kStep2.size());
        const std::string* best = nullptr;
        for (const auto& [hash, question, gold] : *golds) {
            if (hash == h && payload.find(question) != std::string_view::npos &&
                (!best || question.size() > best->size())) {
                best = &question;
            }
        }
        if (!best) return "unknown";
        for (const auto& [hash, question, gold] : *golds) {
            if (hash == h && &question == best) return gold;
        }
        return "unknown";
    });
}

}  // namespace chartgcl
