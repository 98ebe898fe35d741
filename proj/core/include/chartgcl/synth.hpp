// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "chartgcl/scene.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace chartgcl {

enum class ChartType { bar, line, pie };

std::string_view to_string(ChartType type);
ChartType parse_chart_type(std::string_view text);

/// Parameters of the synthetic chart generator.
struct SynthSpec {
    int count = 10;
    std::vector<ChartType> chart_types = {ChartType::bar, ChartType::line, ChartType::pie};
    int min_categories = 3;
    int max_categories = 6;
    // Bar and line values are integers drawn uniformly from [min_value, max_value].
    // Pie values are percentages and ignore the range.
    double min_value = 5;
    double max_value = 95;
    int width = 256;
    int height = 256;
    int patch_size = 32;
    // Question kinds cycle through value lookup, argmax, sum, comparison.
    int questions_per_scene = 4;
    std::string id_prefix = "synth";
};

/// Throws Error on inconsistent ranges.
void validate_synth_spec(const SynthSpec& spec);

/// Deterministic under (spec, seed). Objects come out in reading order.
std::vector<ChartScene> synth_generate(const SynthSpec& spec, std::uint64_t seed);

/// Category names the generator draws from.
const std::vector<std::string>& synth_category_pool();

/// Formatting used for rendered values and numeric answers.
std::string format_value(double value, ChartType type);

/// PNG (RGB, stored deflate) of an 8-bit pixel buffer laid out row-major.
std::vector<unsigned char> encode_png_rgb(int width, int height, const std::vector<unsigned char>& rgb);

/// Flat-colour drawing of the scene's boxes, one colour per class. Text is not
/// drawn.
std::vector<unsigned char> render_scene_png(const ChartScene& scene);

}  // namespace chartgcl
