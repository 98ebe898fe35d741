// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "chartgcl/common.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chartgcl {

/// Axis-aligned box in pixel coordinates, origin top-left.
struct BBox {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    bool valid() const;

    friend bool operator==(const BBox&, const BBox&) = default;
};

struct ChartObject {
    int id = 0;
    std::string cls;
    BBox bbox;
    std::optional<double> value;
    std::vector<std::string> ocr_texts;

    friend bool operator==(const ChartObject&, const ChartObject&) = default;
};

enum class AnswerKind { numeric, textual, open_ended };

std::string_view to_string(AnswerKind kind);
AnswerKind parse_answer_kind(std::string_view text);

struct QARecord {
    std::string question;
    std::string answer;
    AnswerKind kind = AnswerKind::textual;

    friend bool operator==(const QARecord&, const QARecord&) = default;
};

struct ChartScene {
    std::string scene_id;
    int width = 0;
    int height = 0;
    int patch_size = 32;
    std::vector<ChartObject> objects;
    std::vector<QARecord> qa;
    // Optional path of the rendered chart; only the CoT pipeline needs it.
    std::string image_path;

    int grid_cols() const { return (width + patch_size - 1) / patch_size; }
    int grid_rows() const { return (height + patch_size - 1) / patch_size; }
    int patch_count() const { return grid_cols() * grid_rows(); }

    friend bool operator==(const ChartScene&, const ChartScene&) = default;
};

/// Object id -> sorted, non-empty list of row-major patch indices.
using PatchAlignment = std::map<int, std::vector<int>>;

/// Closed class vocabulary used when none is configured.
const std::vector<std::string>& default_class_vocabulary();

/// Reading order: (y0, x0, id) lexicographic on the top-left corner. Stable.
std::vector<ChartObject> order_objects(std::vector<ChartObject> objects);

/// Patches whose cell has positive overlap with each object's box.
/// Degenerate boxes are treated as segments/points; a coordinate lying exactly
/// on a cell boundary belongs to the lower-index cell.
PatchAlignment align_objects_to_patches(const ChartScene& scene);

/// Throws LoadError naming the scene and the offending field.
void validate_scene(const ChartScene& scene,
                    const std::vector<std::string>& classes = default_class_vocabulary());

nlohmann::json scene_to_json(const ChartScene& scene);
ChartScene scene_from_json(const nlohmann::json& j);

/// Reads `{"scenes": [...]}` JSON, or JSONL with one scene per line.
/// Objects are re-ordered with order_objects after parsing.
std::vector<ChartScene> load_scenes(const std::filesystem::path& path,
                                    const std::vector<std::string>& classes = default_class_vocabulary());

std::string dump_scenes(const std::vector<ChartScene>& scenes);
void save_scenes(const std::filesystem::path& path, const std::vector<ChartScene>& scenes,
                 bool jsonl = false);

}  // namespace chartgcl
