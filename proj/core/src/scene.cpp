// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartgcl/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

namespace chartgcl {

using nlohmann::json;

bool BBox::valid() const {
    const bool finite = std::isfinite(x0) && std::isfinite(y0) && std::isfinite(x1) && std::isfinite(y1);
    return finite && x0 >= 0 && y0 >= 0 && x0 <= x1 && y0 <= y1;
}

std::string_view to_string(AnswerKind kind) {
    switch (kind) {
        case AnswerKind::numeric: return "numeric";
        case AnswerKind::textual: return "textual";
        case AnswerKind::open_ended: return "open-ended";
    }
    return "textual";
}

AnswerKind parse_answer_kind(std::string_view text) {
    if (text == "numeric") return AnswerKind::numeric;
    if (text == "textual") return AnswerKind::textual;
    if (text == "open-ended") return AnswerKind::open_ended;
    throw Error("unknown answer_kind '" + std::string(text) + "'");
}

const std::vector<std::string>& default_class_vocabulary() {
    static const std::vector<std::string> classes = {
        "title", "axis-title", "tick-label", "bar", "line-point", "pie-slice", "legend-item",
    };
    return classes;
}

std::vector<ChartObject> order_objects(std::vector<ChartObject> objects) {
    std::stable_sort(objects.begin(), objects.end(), [](const ChartObject& a, const ChartObject& b) {
        return std::tie(a.bbox.y0, a.bbox.x0, a.id) < std::tie(b.bbox.y0, b.bbox.x0, b.id);
    });
    return objects;
}

namespace {

// Inclusive range of grid cells touched by [lo, hi] along one axis.
// Returns false when the extent misses the grid entirely.
bool cell_span(double lo, double hi, int patch, int cells, int& first, int& last) {
    if (hi > lo) {
        first = static_cast<int>(std::floor(lo / patch));
        last = static_cast<int>(std::ceil(hi / patch)) - 1;
    } else {
        // Zero extent: a boundary coordinate goes to the smaller-index cell.
        const double q = lo / patch;
        int idx = static_cast<int>(std::floor(q));
        if (idx > 0 && q == std::floor(q)) --idx;
        first = last = idx;
    }
    if (last < 0 || first >= cells) return false;
    first = std::max(first, 0);
    last = std::min(last, cells - 1);
    return first <= last;
}

}  // namespace

PatchAlignment align_objects_to_patches(const ChartScene& scene) {
    if (scene.patch_size <= 0) throw Error("scene " + scene.scene_id + ": patch_size must be positive");
    const int cols = scene.grid_cols();
    const int rows = scene.grid_rows();
    PatchAlignment out;
    for (const auto& obj : scene.objects) {
        int c0, c1, r0, r1;
        const bool hit_x = obj.bbox.x0 < scene.width || (obj.bbox.x0 == scene.width && obj.bbox.x1 == obj.bbox.x0);
        const bool hit_y = obj.bbox.y0 < scene.height || (obj.bbox.y0 == scene.height && obj.bbox.y1 == obj.bbox.y0);
        if (!hit_x || !hit_y || !cell_span(obj.bbox.x0, obj.bbox.x1, scene.patch_size, cols, c0, c1) ||
            !cell_span(obj.bbox.y0, obj.bbox.y1, scene.patch_size, rows, r0, r1)) {
            throw Error("scene " + scene.scene_id + ": object " + std::to_string(obj.id) +
                        " lies outside the image");
        }
        auto& patches = out[obj.id];
        for (int r = r0; r <= r1; ++r) {
            for (int c = c0; c <= c1; ++c) patches.push_back(r * cols + c);
        }
    }
    return out;
}

void validate_scene(const ChartScene& scene, const std::vector<std::string>& classes) {
    const auto fail = [&](const std::string& path, const std::string& what) {
        throw LoadError("scene '" + scene.scene_id + "': " + path + ": " + what);
    };
    if (scene.scene_id.empty()) throw LoadError("scene with empty scene_id");
    if (scene.width <= 0) fail("width", "must be positive");
    if (scene.height <= 0) fail("height", "must be positive");
    if (scene.patch_size <= 0) fail("patch_size", "must be positive");
    std::set<int> ids;
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
        const auto& obj = scene.objects[i];
        const std::string path = "objects[" + std::to_string(i) + "]";
        if (!ids.insert(obj.id).second) fail(path + ".id", "duplicate id " + std::to_string(obj.id));
        if (std::find(classes.begin(), classes.end(), obj.cls) == classes.end()) {
            fail(path + ".cls", "unknown class '" + obj.cls + "'");
        }
        if (!obj.bbox.valid()) fail(path + ".bbox", "expected finite 0 <= x0 <= x1 and 0 <= y0 <= y1");
        if (obj.bbox.x1 > scene.width || obj.bbox.y1 > scene.height) fail(path + ".bbox", "outside the image");
        if (obj.value && !std::isfinite(*obj.value)) fail(path + ".value", "not finite");
    }
    for (std::size_t i = 0; i < scene.qa.size(); ++i) {
        if (scene.qa[i].answer.empty()) fail("qa[" + std::to_string(i) + "].answer", "empty");
    }
}

json scene_to_json(const ChartScene& scene) {
    json objects = json::array();
    for (const auto& obj : scene.objects) {
        json o = {
            {"id", obj.id},
            {"cls", obj.cls},
            {"bbox", {obj.bbox.x0, obj.bbox.y0, obj.bbox.x1, obj.bbox.y1}},
            {"ocr_texts", obj.ocr_texts},
        };
        if (obj.value) o["value"] = *obj.value;
        objects.push_back(std::move(o));
    }
    json qa = json::array();
    for (const auto& q : scene.qa) {
        qa.push_back({{"question", q.question}, {"answer", q.answer}, {"answer_kind", to_string(q.kind)}});
    }
    json j = {
        {"scene_id", scene.scene_id},
        {"width", scene.width},
        {"height", scene.height},
        {"patch_size", scene.patch_size},
        {"objects", std::move(objects)},
        {"qa", std::move(qa)},
    };
    if (!scene.image_path.empty()) j["image_path"] = scene.image_path;
    return j;
}

namespace {

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) throw LoadError(where + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw LoadError(where + "." + key + ": " + e.what());
    }
}

}  // namespace

ChartScene scene_from_json(const json& j) {
    if (!j.is_object()) throw LoadError("scene record is not a JSON object");
    ChartScene s;
    s.scene_id = field<std::string>(j, "scene_id", "scene");
    const std::string where = "scene '" + s.scene_id + "'";
    s.width = field<int>(j, "width", where);
    s.height = field<int>(j, "height", where);
    s.patch_size = j.contains("patch_size") ? field<int>(j, "patch_size", where) : 32;
    if (j.contains("image_path")) s.image_path = field<std::string>(j, "image_path", where);

    const auto objects = j.contains("objects") ? j.at("objects") : json::array();
    if (!objects.is_array()) throw LoadError(where + ".objects: expected array");
    for (std::size_t i = 0; i < objects.size(); ++i) {
        const auto& o = objects[i];
        const std::string path = where + ".objects[" + std::to_string(i) + "]";
        ChartObject obj;
        obj.id = field<int>(o, "id", path);
        obj.cls = field<std::string>(o, "cls", path);
        const auto box = field<std::vector<double>>(o, "bbox", path);
        if (box.size() != 4) throw LoadError(path + ".bbox: expected [x0, y0, x1, y1]");
        obj.bbox = {box[0], box[1], box[2], box[3]};
        if (o.contains("value") && !o.at("value").is_null()) obj.value = field<double>(o, "value", path);
        if (o.contains("ocr_texts")) obj.ocr_texts = field<std::vector<std::string>>(o, "ocr_texts", path);
        s.objects.push_back(std::move(obj));
    }

    const auto qa = j.contains("qa") ? j.at("qa") : json::array();
    if (!qa.is_array()) throw LoadError(where + ".qa: expected array");
    for (std::size_t i = 0; i < qa.size(); ++i) {
        const std::string path = where + ".qa[" + std::to_string(i) + "]";
        QARecord rec;
        rec.question = field<std::string>(qa[i], "question", path);
        rec.answer = field<std::string>(qa[i], "answer", path);
        try {
            rec.kind = parse_answer_kind(field<std::string>(qa[i], "answer_kind", path));
        } catch (const LoadError&) {
            throw;
        } catch (const Error& e) {
            throw LoadError(path + ".answer_kind: " + e.what());
        }
        s.qa.push_back(std::move(rec));
    }
    return s;
}

std::vector<ChartScene> load_scenes(const std::filesystem::path& path, const std::vector<std::string>& classes) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open scene file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();

    std::vector<json> records;
    const auto first = text.find_first_not_of(" \t\r\n");
    bool parsed_document = false;
    if (first != std::string::npos && text[first] == '{') {
        json doc = json::parse(text, nullptr, false);
        if (!doc.is_discarded() && doc.is_object() && doc.contains("scenes")) {
            if (!doc["scenes"].is_array()) throw LoadError(path.string() + ": 'scenes' must be an array");
            for (auto& s : doc["scenes"]) records.push_back(std::move(s));
            parsed_document = true;
        }
    }
    if (!parsed_document) {
        std::istringstream lines(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(lines, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            json rec = json::parse(line, nullptr, false);
            if (rec.is_discarded()) {
                throw LoadError(path.string() + ":" + std::to_string(lineno) + ": invalid JSON");
            }
            records.push_back(std::move(rec));
        }
    }

    std::vector<ChartScene> scenes;
    scenes.reserve(records.size());
    for (const auto& rec : records) {
        ChartScene s = scene_from_json(rec);
        validate_scene(s, classes);
        s.objects = order_objects(std::move(s.objects));
        scenes.push_back(std::move(s));
    }
    return scenes;
}

std::string dump_scenes(const std::vector<ChartScene>& scenes) {
    json arr = json::array();
    for (const auto& s : scenes) arr.push_back(scene_to_json(s));
    return json{{"scenes", std::move(arr)}}.dump(1);
}

void save_scenes(const std::filesystem::path& path, const std::vector<ChartScene>& scenes, bool jsonl) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write scene file " + path.string());
    if (jsonl) {
        for (const auto& s : scenes) out << scene_to_json(s).dump() << '\n';
    } else {
        out << dump_scenes(scenes) << '\n';
    }
    if (!out) throw Error("failed writing scene file " + path.string());
}

}  // namespace chartgcl
