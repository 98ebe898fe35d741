// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "chartgcl/common.hpp"
#include "chartgcl/scene.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace chartgcl {

enum class Modality { visual, textual };

std::string_view to_string(Modality m);

struct GraphNode {
    int node_id = 0;
    int object_id = 0;
    // Index into the owner's ocr_texts for OCR nodes, -1 for object nodes.
    int ocr_index = -1;

    bool is_ocr() const { return ocr_index >= 0; }
};

/// Undirected edge, stored once with src < dst.
struct Edge {
    int src = 0;
    int dst = 0;
    double weight = 1.0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

/// Modality-tagged weighted graph. Self-loops are never stored; the GCN adds them.
/// Object nodes come first, in scene order, followed by OCR nodes.
struct Graph {
    Modality modality = Modality::visual;
    std::vector<GraphNode> nodes;
    Matrix features;  // one row per node
    std::vector<Edge> edges;

    int node_count() const { return static_cast<int>(nodes.size()); }
    int object_node_count() const;
};

/// Positive (visual node, textual label node) pairs, one per object.
struct PairMap {
    std::vector<std::pair<int, int>> pairs;

    std::size_t size() const { return pairs.size(); }
};

/// Minimum Euclidean distance between two boxes; 0 when they overlap or touch.
double min_bbox_distance(const BBox& a, const BBox& b);

/// exp(-d), the edge weight for objects at box distance d.
double edge_weight(double d);

/// For every object, the indices of its k nearest objects by min_bbox_distance,
/// ties broken by smaller object id. k is clipped to N-1.
std::vector<std::vector<int>> knn_neighbors(const std::vector<ChartObject>& objects, int k);

/// Union-symmetrized KNN edges between object indices, weighted exp(-d).
std::vector<Edge> knn_edges(const std::vector<ChartObject>& objects, int k);

Graph build_visual_graph(const ChartScene& scene, const Matrix& node_feats, int k = 3);

/// Label node per object (row i of label_feats) plus one OCR node per
/// (object, ocr text) pair in scene order (rows of ocr_feats).
Graph build_textual_graph(const ChartScene& scene, const Matrix& label_feats, const Matrix& ocr_feats,
                          int k = 3);

/// Number of OCR nodes build_textual_graph will create for a scene.
int ocr_node_count(const ChartScene& scene);

PairMap make_pair_map(const Graph& visual, const Graph& textual);

/// Removes each undirected edge independently with probability p.
Graph drop_edges(const Graph& g, double p, std::uint64_t seed);

/// N x P averaging operator; row o has 1/|P_o| on the columns of P_o.
Matrix patch_mean_operator(const PatchAlignment& alignment, const std::vector<int>& object_ids, int patch_count);

/// Row o is the mean of patch_hidden rows indexed by alignment[object_ids[o]].
Matrix init_nodes_patch_mean(const Matrix& patch_hidden, const PatchAlignment& alignment,
                             const std::vector<int>& object_ids);

/// Pass-through for per-object features (ROI-style backbones).
Matrix init_nodes_direct(const Matrix& object_feats, std::size_t object_count);

/// `{modality, nodes:[{id, object_id, dim}], edges:[[src,dst,weight]]}`.
nlohmann::json graph_debug_json(const Graph& g);

}  // namespace chartgcl
