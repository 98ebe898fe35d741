// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartgcl/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <regex>
#include <sstream>

namespace chartgcl {
namespace {

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return lower(x) == lower(y);
           });
}

}  // namespace

std::optional<double> parse_number(std::string_view text) {
    std::string s(trim(text));
    if (!s.empty() && s.back() == '%') s.pop_back();
    s.erase(std::remove(s.begin(), s.end(), ','), s.end());
    std::size_t start = 0;
    if (!s.empty() && s[0] == '+') start = 1;
    if (start == s.size() || (start == 1 && s[1] == '-')) return std::nullopt;
    // from_chars would accept "inf" and "nan"; require a digit or a dot first.
    const char first = start < s.size() && s[start] == '-' ? (start + 1 < s.size() ? s[start + 1] : '\0') : s[start];
    if (!(std::isdigit(static_cast<unsigned char>(first)) || first == '.')) return std::nullopt;
    double value = 0;
    const char* b = s.data() + start;
    const char* e = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(b, e, value);
    if (ec != std::errc() || ptr != e || !std::isfinite(value)) return std::nullopt;
    return value;
}

bool relaxed_match(std::string_view pred, std::string_view gold) {
    const auto p = parse_number(pred);
    const auto g = parse_number(gold);
    if (p && g) {
        if (*g == 0.0) return *p == 0.0;
        // The relative slack absorbs decimal-to-binary rounding at the boundary.
        return std::abs(*p - *g) <= 0.05 * std::abs(*g) * (1.0 + 1e-12);
    }
    return iequals(trim(pred), trim(gold));
}

bool exact_match(std::string_view pred, std::string_view gold) { return iequals(trim(pred), trim(gold)); }

std::vector<std::string> bleu_tokenize(std::string_view text) {
    static const std::regex punct(R"(([\x7B-\x7E\x5B-\x60\x20-\x26\x28-\x2B\x3A-\x40/]))");
    static const std::regex period_comma_after_nondigit(R"(([^0-9])([\.,]))");
    static const std::regex period_comma_before_nondigit(R"(([\.,])([^0-9]))");
    static const std::regex dash_after_digit(R"(([0-9])(-))");

    std::string s;
    s.reserve(text.size() + 2);
    s.push_back(' ');
    for (char c : text) s.push_back(c == '\n' || c == '\t' || c == '\r' ? ' ' : lower(c));
    s.push_back(' ');
    s = std::regex_replace(s, punct, " $1 ");
    s = std::regex_replace(s, period_comma_after_nondigit, "$1 $2 ");
    s = std::regex_replace(s, period_comma_before_nondigit, " $1 $2");
    s = std::regex_replace(s, dash_after_digit, "$1 $2 ");

    std::vector<std::string> tokens;
    std::istringstream is(s);
    for (std::string tok; is >> tok;) tokens.push_back(std::move(tok));
    return tokens;
}

BleuStats& BleuStats::operator+=(const BleuStats& o) {
    for (std::size_t n = 0; n < 4; ++n) {
        matches[n] += o.matches[n];
        totals[n] += o.totals[n];
    }
    hyp_len += o.hyp_len;
    ref_len += o.ref_len;
    return *this;
}

BleuStats bleu_stats(std::string_view hypothesis, std::string_view reference) {
    const auto hyp = bleu_tokenize(hypothesis);
    const auto ref = bleu_tokenize(reference);
    if (ref.empty()) throw Error("bleu4: empty reference");
    BleuStats st;
    st.hyp_len = static_cast<long>(hyp.size());
    st.ref_len = static_cast<long>(ref.size());
    for (std::size_t n = 1; n <= 4; ++n) {
        std::map<std::vector<std::string>, long> ref_counts, hyp_counts;
        for (std::size_t i = 0; i + n <= ref.size(); ++i) ++ref_counts[{ref.begin() + long(i), ref.begin() + long(i + n)}];
        for (std::size_t i = 0; i + n <= hyp.size(); ++i) ++hyp_counts[{hyp.begin() + long(i), hyp.begin() + long(i + n)}];
        long matched = 0;
        for (const auto& [gram, count] : hyp_counts) {
            const auto it = ref_counts.find(gram);
            if (it != ref_counts.end()) matched += std::min(count, it->second);
        }
        st.matches[n - 1] = matched;
        st.totals[n - 1] = hyp.size() >= n ? static_cast<long>(hyp.size() - n + 1) : 0;
    }
    return st;
}

double bleu_from_stats(const BleuStats& st, const BleuOptions& opts) {
    if (st.hyp_len == 0) return 0.0;
    double log_sum = 0;
    for (std::size_t n = 0; n < 4; ++n) {
        double m = double(st.matches[n]);
        double t = double(st.totals[n]);
        if (opts.smooth && n > 0) {
            m += 1;
            t += 1;
        }
        if (m == 0 || t == 0) return 0.0;
        log_sum += std::log(m / t);
    }
    const double c = double(st.hyp_len);
    const double r = double(st.ref_len);
    const double bp = c <= r ? std::exp(1.0 - r / c) : 1.0;
    return 100.0 * bp * std::exp(log_sum / 4.0);
}

double bleu4(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
             const BleuOptions& opts) {
    if (hypotheses.size() != references.size()) {
        throw Error("bleu4: " + std::to_string(hypotheses.size()) + " hypotheses vs " +
                    std::to_string(references.size()) + " references");
    }
    if (hypotheses.empty()) throw Error("bleu4: empty corpus");
    BleuStats total;
    for (std::size_t i = 0; i < hypotheses.size(); ++i) total += bleu_stats(hypotheses[i], references[i]);
    return bleu_from_stats(total, opts);
}

std::string_view to_string(MetricId m) {
    switch (m) {
        case MetricId::relaxed_accuracy: return "relaxed_accuracy";
        case MetricId::exact_match: return "exact_match";
        case MetricId::bleu4: return "bleu4";
    }
    return "?";
}

MetricId parse_metric_id(std::string_view text) {
    if (text == "relaxed_accuracy") return MetricId::relaxed_accuracy;
    if (text == "exact_match") return MetricId::exact_match;
    if (text == "bleu4") return MetricId::bleu4;
    throw Error("unknown metric '" + std::string(text) + "' (expected relaxed_accuracy, exact_match or bleu4)");
}

MetricId metric_for_kind(AnswerKind kind) {
    return kind == AnswerKind::open_ended ? MetricId::bleu4 : MetricId::relaxed_accuracy;
}

double SplitResult::score(MetricId metric) const {
    switch (metric) {
        case MetricId::relaxed_accuracy: return relaxed_acc;
        case MetricId::exact_match: return exact_acc;
        case MetricId::bleu4: return bleu4;
    }
    return 0;
}

SplitResult evaluate_split(const std::vector<std::string>& preds, const std::vector<std::string>& golds,
                           const std::vector<AnswerKind>& kinds, std::string label) {
    if (preds.size() != golds.size() || preds.size() != kinds.size()) {
        throw Error("evaluate_split: " + std::to_string(preds.size()) + " predictions, " +
                    std::to_string(golds.size()) + " golds, " + std::to_string(kinds.size()) + " kinds");
    }
    if (preds.empty()) throw Error("evaluate_split: split '" + label + "' is empty");
    SplitResult out;
    out.label = std::move(label);
    long relaxed = 0, exact = 0;
    BleuStats stats;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        ItemVerdict v{preds[i], golds[i], kinds[i], relaxed_match(preds[i], golds[i]), exact_match(preds[i], golds[i])};
        relaxed += v.relaxed;
        exact += v.exact;
        if (!bleu_tokenize(golds[i]).empty()) stats += bleu_stats(preds[i], golds[i]);
        out.items.push_back(std::move(v));
    }
    const double n = double(preds.size());
    out.relaxed_acc = 100.0 * double(relaxed) / n;
    out.exact_acc = 100.0 * double(exact) / n;
    out.bleu4 = bleu_from_stats(stats);
    return out;
}

double split_average(const std::vector<double>& scores) {
    if (scores.empty()) throw Error("split_average: no splits");
    double s = 0;
    for (double v : scores) s += v;
    return s / double(scores.size());
}

EvalResult combine_splits(std::vector<SplitResult> splits, MetricId metric) {
    if (splits.empty()) throw Error("no splits to combine");
    EvalResult out;
    out.metric = metric;
    out.splits = std::move(splits);
    if (out.splits.size() >= 2) {
        std::vector<double> scores;
        for (const auto& s : out.splits) scores.push_back(s.score(metric));
        out.average = split_average(scores);
    }
    return out;
}

double round2(double value) { return std::round(value * 100.0) / 100.0; }

nlohmann::json to_json(const EvalResult& result) {
    nlohmann::json splits = nlohmann::json::array();
    for (const auto& s : result.splits) {
        nlohmann::json items = nlohmann::json::array();
        for (const auto& v : s.items) {
            items.push_back({{"pred", v.pred}, {"gold", v.gold}, {"kind", to_string(v.kind)}, {"relaxed", v.relaxed},
                             {"exact", v.exact}});
        }
        splits.push_back({{"label", s.label}, {"n", s.items.size()}, {"relaxed_acc", s.relaxed_acc},
                          {"exact_acc", s.exact_acc}, {"bleu4", s.bleu4}, {"items", std::move(items)}});
    }
    nlohmann::json j = {{"metric", to_string(result.metric)}, {"splits", std::move(splits)}};
    j["average"] = result.average ? nlohmann::json(*result.average) : nlohmann::json(nullptr);
    return j;
}

EvalResult eval_result_from_json(const nlohmann::json& j) {
    try {
        std::vector<SplitResult> splits;
        for (const auto& s : j.at("splits")) {
            std::vector<std::string> preds, golds;
            std::vector<AnswerKind> kinds;
            for (const auto& it : s.at("items")) {
                preds.push_back(it.at("pred"));
                golds.push_back(it.at("gold"));
                kinds.push_back(parse_answer_kind(it.at("kind").get<std::string>()));
            }
            splits.push_back(evaluate_split(preds, golds, kinds, s.at("label")));
        }
        return combine_splits(std::move(splits), parse_metric_id(j.at("metric").get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("report: ") + e.what());
    }
}

std::string format_table(const std::vector<std::pair<std::string, EvalResult>>& rows) {
    if (rows.empty()) return {};
    std::vector<std::string> columns;
    for (const auto& s : rows.front().second.splits) columns.push_back(s.label);
    const bool with_avg = columns.size() >= 2;
    std::size_t name_w = 5;
    for (const auto& [name, _] : rows) name_w = std::max(name_w, name.size());

    std::ostringstream os;
    os << std::left << std::setw(int(name_w)) << "Model";
    for (const auto& c : columns) os << "  " << std::right << std::setw(8) << c;
    if (with_avg) os << "  " << std::right << std::setw(8) << "avg.";
    os << "  (" << to_string(rows.front().second.metric) << ")\n";
    for (const auto& [name, result] : rows) {
        os << std::left << std::setw(int(name_w)) << name << std::fixed << std::setprecision(2);
        for (const auto& s : result.splits) os << "  " << std::right << std::setw(8) << round2(s.score(result.metric));
        if (with_avg) {
            os << "  " << std::right << std::setw(8);
            if (result.average) {
                os << round2(*result.average);
            } else {
                os << "-";
            }
        }
        os << '\n';
    }
    return os.str();
}

nlohmann::json to_json(const PredictionRecord& r) {
    return {{"scene_id", r.scene_id}, {"question", r.question}, {"pred", r.pred},
            {"gold", r.gold},         {"kind", to_string(r.kind)}, {"split", r.split}};
}

PredictionRecord prediction_from_json(const nlohmann::json& j) {
    try {
        PredictionRecord r;
        r.scene_id = j.at("scene_id");
        r.question = j.at("question");
        r.pred = j.at("pred");
        r.gold = j.at("gold");
        r.kind = parse_answer_kind(j.at("kind").get<std::string>());
        r.split = j.value("split", "test");
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("prediction record: ") + e.what());
    }
}

void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRecord>& records) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw Error("cannot write " + path.string());
    for (const auto& r : records) os << to_json(r).dump() << '\n';
    if (!os) throw Error("failed writing " + path.string());
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw LoadError("cannot open " + path.string());
    std::vector<PredictionRecord> out;
    std::string line;
    for (int lineno = 1; std::getline(is, line); ++lineno) {
        if (trim(line).empty()) continue;
        try {
            out.push_back(prediction_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw LoadError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

EvalResult evaluate_predictions(const std::vector<PredictionRecord>& records, MetricId metric) {
    if (records.empty()) throw Error("no predictions to evaluate");
    std::vector<std::string> order;
    std::map<std::string, std::vector<const PredictionRecord*>> groups;
    for (const auto& r : records) {
        if (!groups.count(r.split)) order.push_back(r.split);
        groups[r.split].push_back(&r);
    }
    std::vector<SplitResult> splits;
    for (const auto& label : order) {
        std::vector<std::string> preds, golds;
        std::vector<AnswerKind> kinds;
        for (const auto* r : groups[label]) {
            preds.push_back(r->pred);
            golds.push_back(r->gold);
            kinds.push_back(r->kind);
        }
        splits.push_back(evaluate_split(preds, golds, kinds, label));
    }
    return combine_splits(std::move(splits), metric);
}

}  // namespace chartgcl
