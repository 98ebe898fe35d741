// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartgcl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <set>

namespace chartgcl {

std::string_view to_string(ChartType type) {
    switch (type) {
        case ChartType::bar: return "bar";
        case ChartType::line: return "line";
        case ChartType::pie: return "pie";
    }
    return "bar";
}

ChartType parse_chart_type(std::string_view text) {
    if (text == "bar") return ChartType::bar;
    if (text == "line") return ChartType::line;
    if (text == "pie") return ChartType::pie;
    throw Error("unknown chart type '" + std::string(text) + "' (expected bar, line or pie)");
}

const std::vector<std::string>& synth_category_pool() {
    static const std::vector<std::string> pool = {
        "Apple", "Banana", "Cherry", "Grape", "Lemon", "Mango", "Orange", "Peach", "Pear", "Plum",
        "Kiwi", "Lime", "Melon", "Berry", "Fig", "Olive", "Alpha", "Bravo", "Delta", "Echo",
        "Nova", "Orion", "Vega", "Atlas", "Titan", "Zephyr", "North", "South", "East", "West",
        "Coral", "Amber", "Ivory", "Jade", "Ruby", "Onyx", "Pearl", "Slate", "Cobalt", "Maple",
    };
    return pool;
}

std::string format_value(double value, ChartType type) {
    char buf[64];
    if (type == ChartType::pie) {
        std::snprintf(buf, sizeof buf, "%.1f", value);
    } else {
        std::snprintf(buf, sizeof buf, "%.0f", value);
    }
    return buf;
}

void validate_synth_spec(const SynthSpec& spec) {
    if (spec.count < 0) throw Error("synth: count must be >= 0");
    if (spec.chart_types.empty()) throw Error("synth: at least one chart type required");
    if (spec.min_categories < 2) throw Error("synth: min_categories must be >= 2");
    if (spec.max_categories < spec.min_categories) throw Error("synth: max_categories < min_categories");
    if (spec.max_categories > 8) throw Error("synth: max_categories must be <= 8 to fit the canvas");
    if (!(std::isfinite(spec.min_value) && std::isfinite(spec.max_value)) || spec.min_value < 0 ||
        spec.max_value <= spec.min_value) {
        throw Error("synth: value range must satisfy 0 <= min_value < max_value");
    }
    const double distinct = std::floor(spec.max_value) - std::ceil(spec.min_value) + 1;
    if (distinct < spec.max_categories) throw Error("synth: value range too narrow for distinct values");
    if (spec.width < 128 || spec.height < 128) throw Error("synth: canvas must be at least 128x128");
    if (spec.patch_size <= 0) throw Error("synth: patch_size must be positive");
    if (spec.questions_per_scene < 0) throw Error("synth: questions_per_scene must be >= 0");
}

namespace {

constexpr double kCharWidth = 6.0;
constexpr double kTextHeight = 10.0;

const std::vector<std::string> kMetrics = {"Sales", "Revenue", "Users", "Share", "Score", "Exports", "Votes", "Visits"};
const std::vector<std::string> kGroups = {"Fruit", "Region", "Brand", "Team", "Product"};

class SceneBuilder {
public:
    SceneBuilder(const SynthSpec& spec, std::string id) {
        scene_.scene_id = std::move(id);
        scene_.width = spec.width;
        scene_.height = spec.height;
        scene_.patch_size = spec.patch_size;
    }

    ChartObject& add(std::string cls, BBox box, std::vector<std::string> ocr = {}) {
        box.x0 = std::clamp(box.x0, 0.0, double(scene_.width));
        box.x1 = std::clamp(box.x1, box.x0, double(scene_.width));
        box.y0 = std::clamp(box.y0, 0.0, double(scene_.height));
        box.y1 = std::clamp(box.y1, box.y0, double(scene_.height));
        scene_.objects.push_back({next_id_++, std::move(cls), box, std::nullopt, std::move(ocr)});
        return scene_.objects.back();
    }

    ChartObject& add_text(std::string cls, double cx, double y0, const std::string& text, double max_width) {
        const double w = std::min(kCharWidth * double(text.size()), max_width);
        return add(std::move(cls), {cx - w / 2, y0, cx + w / 2, y0 + kTextHeight}, {text});
    }

    ChartScene& scene() { return scene_; }

private:
    ChartScene scene_;
    int next_id_ = 0;
};

void layout_axes(SceneBuilder& b, const std::string& metric, const std::string& group, bool with_axes) {
    const auto& s = b.scene();
    const std::string title = metric + " by " + group;
    b.add_text("title", s.width / 2.0, 6, title, s.width - 16.0);
    if (!with_axes) return;
    const double len = std::min(kCharWidth * double(metric.size()), 150.0);
    b.add("axis-title", {6, 60, 6 + kTextHeight, 60 + len}, {metric});
    b.add_text("axis-title", s.width / 2.0, s.height - 16.0, group, s.width - 16.0);
}

void layout_cartesian(SceneBuilder& b, ChartType type, const std::vector<std::string>& cats,
                      const std::vector<double>& values, double axis_max) {
    const auto& s = b.scene();
    const double left = 40, right = s.width - 8.0, top = 36, bottom = s.height - 36.0;
    const double slot = (right - left) / double(cats.size());
    for (std::size_t k = 0; k < cats.size(); ++k) {
        const double cx = left + slot * (double(k) + 0.5);
        const double h = values[k] / axis_max * (bottom - top);
        const std::string label = format_value(values[k], type);
        if (type == ChartType::bar) {
            const double bw = slot * 0.6;
            b.add("bar", {cx - bw / 2, bottom - h, cx + bw / 2, bottom}, {label}).value = values[k];
        } else {
            const double y = bottom - h;
            b.add("line-point", {cx - 3, y - 3, cx + 3, y + 3}, {label}).value = values[k];
        }
        b.add_text("tick-label", cx, bottom + 4, cats[k], slot - 2);
    }
}

BBox sector_box(double cx, double cy, double r, double a0, double a1) {
    double x0 = cx, x1 = cx, y0 = cy, y1 = cy;
    const auto extend = [&](double a) {
        const double x = cx + r * std::cos(a), y = cy + r * std::sin(a);
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
    };
    extend(a0);
    extend(a1);
    const double quarter = std::numbers::pi / 2;
    for (double a = std::ceil(a0 / quarter) * quarter; a < a1; a += quarter) extend(a);
    return {x0, y0, x1, y1};
}

void layout_pie(SceneBuilder& b, const std::vector<std::string>& cats, const std::vector<double>& percents) {
    const double cx = 100, cy = 136, r = 72;
    double angle = -std::numbers::pi / 2;
    for (std::size_t k = 0; k < cats.size(); ++k) {
        const double sweep = percents[k] / 100.0 * 2 * std::numbers::pi;
        b.add("pie-slice", sector_box(cx, cy, r, angle, angle + sweep), {format_value(percents[k], ChartType::pie) + "%"})
            .value = percents[k];
        angle += sweep;
        const double w = std::min(kCharWidth * double(cats[k].size()) + 12, 64.0);
        b.add("legend-item", {186, 50 + 14.0 * double(k), 186 + w, 60 + 14.0 * double(k)}, {cats[k]});
    }
}

void add_questions(ChartScene& scene, ChartType type, const std::vector<std::string>& cats,
                   const std::vector<double>& values, int count, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, cats.size() - 1);
    const auto pick_two = [&] {
        const std::size_t a = pick(rng);
        std::size_t b = pick(rng);
        while (b == a) b = pick(rng);
        return std::pair{a, b};
    };
    for (int q = 0; q < count; ++q) {
        switch (q % 4) {
            case 0: {
                const std::size_t k = pick(rng);
                scene.qa.push_back({"What is the value of " + cats[k] + "?", format_value(values[k], type),
                                    AnswerKind::numeric});
                break;
            }
            case 1: {
                const auto best = std::max_element(values.begin(), values.end()) - values.begin();
                scene.qa.push_back({"Which category has the highest value?", cats[best], AnswerKind::textual});
                break;
            }
            case 2: {
                const auto [a, b] = pick_two();
                scene.qa.push_back({"What is the sum of " + cats[a] + " and " + cats[b] + "?",
                                    format_value(values[a] + values[b], type), AnswerKind::numeric});
                break;
            }
            default: {
                const auto [a, b] = pick_two();
                scene.qa.push_back({"Is " + cats[a] + " greater than " + cats[b] + "?",
                                    values[a] > values[b] ? "Yes" : "No", AnswerKind::textual});
                break;
            }
        }
    }
}

ChartScene generate_one(const SynthSpec& spec, std::size_t index, std::mt19937_64& rng) {
    char id[32];
    std::snprintf(id, sizeof id, "-%05zu", index);
    SceneBuilder b(spec, spec.id_prefix + id);

    std::uniform_int_distribution<std::size_t> type_pick(0, spec.chart_types.size() - 1);
    const ChartType type = spec.chart_types[type_pick(rng)];
    std::uniform_int_distribution<int> count_pick(spec.min_categories, spec.max_categories);
    const int n = count_pick(rng);

    std::vector<std::string> pool = synth_category_pool();
    std::vector<std::string> cats;
    for (int k = 0; k < n; ++k) {
        std::uniform_int_distribution<std::size_t> at(std::size_t(k), pool.size() - 1);
        std::swap(pool[std::size_t(k)], pool[at(rng)]);
        cats.push_back(pool[std::size_t(k)]);
    }

    std::vector<double> values;
    if (type == ChartType::pie) {
        std::uniform_real_distribution<double> weight(1.0, 10.0);
        for (;;) {
            std::vector<double> w(std::size_t(n), 0.0);
            for (auto& x : w) x = weight(rng);
            double total = 0;
            for (double x : w) total += x;
            values.clear();
            for (double x : w) values.push_back(100.0 * x / total);
            std::set<std::string> shown;
            for (double v : values) shown.insert(format_value(v, type));
            if (shown.size() == values.size()) break;
        }
    } else {
        std::uniform_int_distribution<long> value_pick(std::lround(std::ceil(spec.min_value)),
                                                       std::lround(std::floor(spec.max_value)));
        std::set<long> used;
        while (values.size() < std::size_t(n)) {
            const long v = value_pick(rng);
            if (used.insert(v).second) values.push_back(double(v));
        }
    }

    const std::string metric = kMetrics[std::uniform_int_distribution<std::size_t>(0, kMetrics.size() - 1)(rng)];
    const std::string group = kGroups[std::uniform_int_distribution<std::size_t>(0, kGroups.size() - 1)(rng)];
    layout_axes(b, metric, group, type != ChartType::pie);
    if (type == ChartType::pie) {
        layout_pie(b, cats, values);
    } else {
        layout_cartesian(b, type, cats, values, spec.max_value);
    }

    ChartScene scene = std::move(b.scene());
    add_questions(scene, type, cats, values, spec.questions_per_scene, rng);
    scene.objects = order_objects(std::move(scene.objects));
    return scene;
}

}  // namespace

std::vector<ChartScene> synth_generate(const SynthSpec& spec, std::uint64_t seed) {
    validate_synth_spec(spec);
    std::mt19937_64 rng(seed);
    std::vector<ChartScene> scenes;
    scenes.reserve(std::size_t(spec.count));
    for (int i = 0; i < spec.count; ++i) scenes.push_back(generate_one(spec, std::size_t(i), rng));
    return scenes;
}

}  // namespace chartgcl
