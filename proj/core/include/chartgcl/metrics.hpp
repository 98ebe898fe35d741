// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "chartgcl/common.hpp"
#include "chartgcl/scene.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace chartgcl {

/// Parses "1,234.5", "-3e2", "+7", "12%" and the like. Surrounding whitespace
/// is ignored; anything else that is not a finite number yields nullopt.
std::optional<double> parse_number(std::string_view text);

/// Numeric answers match within 5% of |gold| (inclusive); a gold of 0 needs an
/// exact 0. Everything else is trimmed, case-insensitive string equality.
bool relaxed_match(std::string_view pred, std::string_view gold);

/// Trimmed, case-insensitive string equality.
bool exact_match(std::string_view pred, std::string_view gold);

/// Lowercased, 13a-style punctuation splitting, whitespace tokens.
std::vector<std::string> bleu_tokenize(std::string_view text);

/// Sufficient statistics for corpus BLEU; sums of these reduce exactly.
struct BleuStats {
    std::array<long, 4> matches{};
    std::array<long, 4> totals{};
    long hyp_len = 0;
    long ref_len = 0;

    BleuStats& operator+=(const BleuStats& o);
};

BleuStats bleu_stats(std::string_view hypothesis, std::string_view reference);

struct BleuOptions {
    // Add-one smoothing on orders 2..4.
    bool smooth = false;
};

double bleu_from_stats(const BleuStats& stats, const BleuOptions& opts = {});

/// Corpus BLEU-4 scaled to [0, 100]. Throws on mismatched or empty lists and
/// on an empty reference.
double bleu4(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
             const BleuOptions& opts = {});

enum class MetricId { relaxed_accuracy, exact_match, bleu4 };

std::string_view to_string(MetricId m);
MetricId parse_metric_id(std::string_view text);

/// Metric used when scoring by answer kind: BLEU for open-ended answers,
/// relaxed accuracy otherwise.
MetricId metric_for_kind(AnswerKind kind);

struct ItemVerdict {
    std::string pred;
    std::string gold;
    AnswerKind kind = AnswerKind::textual;
    bool relaxed = false;
    bool exact = false;
};

struct SplitResult {
    std::string label;
    std::vector<ItemVerdict> items;
    double relaxed_acc = 0;
    double exact_acc = 0;
    double bleu4 = 0;

    double score(MetricId metric) const;
};

struct EvalResult {
    MetricId metric = MetricId::relaxed_accuracy;
    std::vector<SplitResult> splits;
    // Unweighted mean of the split scores when there are two or more splits.
    std::optional<double> average;
};

/// Scores one split. Throws on length mismatch or an empty split.
SplitResult evaluate_split(const std::vector<std::string>& preds, const std::vector<std::string>& golds,
                           const std::vector<AnswerKind>& kinds, std::string label = "test");

EvalResult combine_splits(std::vector<SplitResult> splits, MetricId metric);

/// Unweighted mean of split scores.
double split_average(const std::vector<double>& scores);

/// Rounds half away from zero to two decimals, the reporting precision.
double round2(double value);

nlohmann::json to_json(const EvalResult& result);
EvalResult eval_result_from_json(const nlohmann::json& j);

/// Text table with one row per model and columns per split plus "avg.".
std::string format_table(const std::vector<std::pair<std::string, EvalResult>>& rows);

struct PredictionRecord {
    std::string scene_id;
    std::string question;
    std::string pred;
    std::string gold;
    AnswerKind kind = AnswerKind::textual;
    std::string split = "test";
};

nlohmann::json to_json(const PredictionRecord& r);
PredictionRecord prediction_from_json(const nlohmann::json& j);
void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRecord>& records);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

/// Groups records by split (first-seen order) and scores each.
EvalResult evaluate_predictions(const std::vector<PredictionRecord>& records, MetricId metric);

}  // namespace chartgcl
