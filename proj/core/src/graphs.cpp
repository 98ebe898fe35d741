// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartgcl/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <tuple>

namespace chartgcl {

std::string_view to_string(Modality m) { return m == Modality::visual ? "visual" : "textual"; }

int Graph::object_node_count() const {
    return static_cast<int>(std::count_if(nodes.begin(), nodes.end(), [](const GraphNode& n) { return !n.is_ocr(); }));
}

double min_bbox_distance(const BBox& a, const BBox& b) {
    const double dx = std::max(0.0, std::max(a.x0, b.x0) - std::min(a.x1, b.x1));
    const double dy = std::max(0.0, std::max(a.y0, b.y0) - std::min(a.y1, b.y1));
    return std::sqrt(dx * dx + dy * dy);
}

double edge_weight(double d) { return std::exp(-d); }

std::vector<std::vector<int>> knn_neighbors(const std::vector<ChartObject>& objects, int k) {
    const int n = static_cast<int>(objects.size());
    const int kk = std::min(k, n - 1);
    std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
    if (kk <= 0) return out;
    std::vector<std::pair<double, int>> cand;
    for (int i = 0; i < n; ++i) {
        cand.clear();
        for (int j = 0; j < n; ++j) {
            if (j != i) cand.emplace_back(min_bbox_distance(objects[std::size_t(i)].bbox, objects[std::size_t(j)].bbox), j);
        }
        std::partial_sort(cand.begin(), cand.begin() + kk, cand.end(), [&](const auto& a, const auto& b) {
            return std::tie(a.first, objects[std::size_t(a.second)].id) <
                   std::tie(b.first, objects[std::size_t(b.second)].id);
        });
        for (int r = 0; r < kk; ++r) out[std::size_t(i)].push_back(cand[std::size_t(r)].second);
    }
    return out;
}

std::vector<Edge> knn_edges(const std::vector<ChartObject>& objects, int k) {
    std::set<std::pair<int, int>> undirected;
    const auto nbrs = knn_neighbors(objects, k);
    for (int i = 0; i < static_cast<int>(nbrs.size()); ++i) {
        for (int j : nbrs[std::size_t(i)]) undirected.emplace(std::min(i, j), std::max(i, j));
    }
    std::vector<Edge> edges;
    edges.reserve(undirected.size());
    for (const auto& [a, b] : undirected) {
        edges.push_back({a, b, edge_weight(min_bbox_distance(objects[std::size_t(a)].bbox, objects[std::size_t(b)].bbox))});
    }
    return edges;
}

Graph build_visual_graph(const ChartScene& scene, const Matrix& node_feats, int k) {
    const auto n = static_cast<Eigen::Index>(scene.objects.size());
    if (n == 0) throw Error("scene " + scene.scene_id + ": cannot build a visual graph without objects");
    if (node_feats.rows() != n) {
        throw Error("scene " + scene.scene_id + ": visual features have " + std::to_string(node_feats.rows()) +
                    " rows for " + std::to_string(n) + " objects");
    }
    Graph g;
    g.modality = Modality::visual;
    for (int i = 0; i < n; ++i) g.nodes.push_back({i, scene.objects[std::size_t(i)].id, -1});
    g.features = node_feats;
    g.edges = knn_edges(scene.objects, k);
    return g;
}

int ocr_node_count(const ChartScene& scene) {
    int count = 0;
    for (const auto& obj : scene.objects) count += static_cast<int>(obj.ocr_texts.size());
    return count;
}

Graph build_textual_graph(const ChartScene& scene, const Matrix& label_feats, const Matrix& ocr_feats, int k) {
    const auto n = static_cast<Eigen::Index>(scene.objects.size());
    const Eigen::Index n_ocr = ocr_node_count(scene);
    if (n == 0) throw Error("scene " + scene.scene_id + ": cannot build a textual graph without objects");
    if (label_feats.rows() != n) {
        throw Error("scene " + scene.scene_id + ": label features have " + std::to_string(label_feats.rows()) +
                    " rows for " + std::to_string(n) + " objects");
    }
    if (ocr_feats.rows() != n_ocr) {
        throw Error("scene " + scene.scene_id + ": OCR features have " + std::to_string(ocr_feats.rows()) +
                    " rows for " + std::to_string(n_ocr) + " OCR texts");
    }
    if (n_ocr > 0 && ocr_feats.cols() != label_feats.cols()) {
        throw Error("scene " + scene.scene_id + ": label and OCR feature widths differ");
    }

    Graph g;
    g.modality = Modality::textual;
    g.features.resize(n + n_ocr, label_feats.cols());
    g.features.topRows(n) = label_feats;
    if (n_ocr > 0) g.features.bottomRows(n_ocr) = ocr_feats;
    for (int i = 0; i < n; ++i) g.nodes.push_back({i, scene.objects[std::size_t(i)].id, -1});
    g.edges = knn_edges(scene.objects, k);
    int next = static_cast<int>(n);
    for (int i = 0; i < n; ++i) {
        const auto& obj = scene.objects[std::size_t(i)];
        for (int t = 0; t < static_cast<int>(obj.ocr_texts.size()); ++t) {
            g.nodes.push_back({next, obj.id, t});
            g.edges.push_back({i, next, 1.0});
            ++next;
        }
    }
    return g;
}

PairMap make_pair_map(const Graph& visual, const Graph& textual) {
    std::map<int, int> text_label;
    for (const auto& node : textual.nodes) {
        if (!node.is_ocr()) text_label[node.object_id] = node.node_id;
    }
    PairMap map;
    std::set<int> seen;
    for (const auto& node : visual.nodes) {
        if (node.is_ocr()) continue;
        const auto it = text_label.find(node.object_id);
        if (it == text_label.end()) {
            throw Error("object " + std::to_string(node.object_id) + " has no textual label node");
        }
        map.pairs.emplace_back(node.node_id, it->second);
        seen.insert(node.object_id);
    }
    if (seen.size() != text_label.size()) throw Error("textual graph has objects missing from the visual graph");
    return map;
}

Graph drop_edges(const Graph& g, double p, std::uint64_t seed) {
    if (!(p >= 0.0 && p < 1.0)) throw Error("edge drop probability must be in [0, 1)");
    Graph out;
    out.modality = g.modality;
    out.nodes = g.nodes;
    out.features = g.features;
    if (p == 0.0) {
        out.edges = g.edges;
        return out;
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const auto& e : g.edges) {
        if (u(rng) >= p) out.edges.push_back(e);
    }
    return out;
}

Matrix patch_mean_operator(const PatchAlignment& alignment, const std::vector<int>& object_ids, int patch_count) {
    Matrix op = Matrix::Zero(static_cast<Eigen::Index>(object_ids.size()), patch_count);
    for (std::size_t o = 0; o < object_ids.size(); ++o) {
        const auto it = alignment.find(object_ids[o]);
        if (it == alignment.end() || it->second.empty()) {
            throw Error("object " + std::to_string(object_ids[o]) + " covers no patches");
        }
        const double w = 1.0 / static_cast<double>(it->second.size());
        for (int p : it->second) {
            if (p < 0 || p >= patch_count) throw Error("patch index " + std::to_string(p) + " out of range");
            op(static_cast<Eigen::Index>(o), p) += w;
        }
    }
    return op;
}

Matrix init_nodes_patch_mean(const Matrix& patch_hidden, const PatchAlignment& alignment,
                             const std::vector<int>& object_ids) {
    Matrix out(static_cast<Eigen::Index>(object_ids.size()), patch_hidden.cols());
    for (std::size_t o = 0; o < object_ids.size(); ++o) {
        const auto it = alignment.find(object_ids[o]);
        if (it == alignment.end() || it->second.empty()) {
            throw Error("object " + std::to_string(object_ids[o]) + " covers no patches");
        }
        RowVector acc = RowVector::Zero(patch_hidden.cols());
        for (int p : it->second) {
            if (p < 0 || p >= patch_hidden.rows()) throw Error("patch index " + std::to_string(p) + " out of range");
            acc += patch_hidden.row(p);
        }
        out.row(static_cast<Eigen::Index>(o)) = acc / static_cast<double>(it->second.size());
    }
    return out;
}

Matrix init_nodes_direct(const Matrix& object_feats, std::size_t object_count) {
    if (static_cast<std::size_t>(object_feats.rows()) != object_count) {
        throw Error("object features have " + std::to_string(object_feats.rows()) + " rows for " +
                    std::to_string(object_count) + " objects");
    }
    if (object_feats.cols() == 0) throw Error("object features have zero width");
    return object_feats;
}

nlohmann::json graph_debug_json(const Graph& g) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : g.nodes) {
        nodes.push_back({{"id", n.node_id}, {"object_id", n.object_id}, {"dim", g.features.cols()}});
    }
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : g.edges) edges.push_back({e.src, e.dst, e.weight});
    return {{"modality", to_string(g.modality)}, {"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

}  // namespace chartgcl
