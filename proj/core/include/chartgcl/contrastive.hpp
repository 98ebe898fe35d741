// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "chartgcl/common.hpp"
#include "chartgcl/graphs.hpp"

#include <array>
#include <optional>
#include <random>
#include <string_view>

namespace chartgcl {

enum class Similarity { cosine, cosine_projection };

std::string_view to_string(Similarity s);
Similarity parse_similarity(std::string_view text);

struct SimilarityConfig {
    Similarity theta = Similarity::cosine;
    double tau = 0.5;
    // Average the u->v and v->u directions.
    bool symmetric = true;
    int projection_hidden = 64;
    // Pair visual nodes with the edge-dropped textual representations in the
    // inter-modality term instead of the original ones.
    bool inter_uses_augmented_text = false;

    void validate() const;
};

/// Two-layer map z = relu(h W1 + b1) W2 + b2 shared by all modalities.
struct ProjectionHead {
    Matrix w1;
    RowVector b1;
    Matrix w2;
    RowVector b2;

    static ProjectionHead init(int in_dim, int hidden_dim, int out_dim, std::mt19937_64& rng);
    Matrix forward(const Matrix& h) const;
};

struct ProjectionGrads {
    Matrix w1;
    RowVector b1;
    Matrix w2;
    RowVector b2;
};

struct InfoNceResult {
    double loss = 0;
    Matrix d_anchors;
    Matrix d_positives;
};

/// Mean over anchors of -log softmax of the positive among all positives in
/// the batch, with cosine similarity scaled by 1/tau. Row i of `anchors` is
/// paired with row i of `positives`. No projection is applied here.
double info_nce(const Matrix& anchors, const Matrix& positives, const SimilarityConfig& cfg);
InfoNceResult info_nce_with_grad(const Matrix& anchors, const Matrix& positives, const SimilarityConfig& cfg);

struct ContrastiveBatch {
    Matrix h_v;
    Matrix h_t;
    PairMap pairs;
    std::optional<Matrix> h_v_aug;
    std::optional<Matrix> h_t_aug;
};

struct ContrastiveTerms {
    double intra_visual = 0;
    double intra_textual = 0;
    double inter = 0;

    double total() const { return intra_visual + intra_textual + inter; }
};

struct ContrastiveGrads {
    Matrix h_v;
    Matrix h_t;
    std::optional<Matrix> h_v_aug;
    std::optional<Matrix> h_t_aug;
    std::optional<ProjectionGrads> projection;
};

/// Inter-modality loss over the positive pairs only.
double inter_modal_loss(const ContrastiveBatch& batch, const SimilarityConfig& cfg,
                        const ProjectionHead* projection = nullptr);

/// Intra-visual + intra-textual + inter terms. Requires augmented matrices.
ContrastiveTerms full_loss(const ContrastiveBatch& batch, const SimilarityConfig& cfg,
                           const ProjectionHead* projection = nullptr);

/// Forward pass that keeps what backward needs.
class ContrastiveObjective {
public:
    explicit ContrastiveObjective(SimilarityConfig cfg, const ProjectionHead* projection = nullptr);

    /// intra=false evaluates the inter-modality loss alone.
    ContrastiveTerms forward(const ContrastiveBatch& batch, bool intra);

    /// Gradients of d_loss * total() w.r.t. every input and the projection.
    ContrastiveGrads backward(double d_loss = 1.0) const;

private:
    SimilarityConfig cfg_;
    const ProjectionHead* projection_;
    bool ready_ = false;
    bool intra_ = false;
    ContrastiveBatch batch_;
    // Projected (or raw) representations: visual, textual, visual~, textual~.
    std::array<Matrix, 4> z_;
    std::array<Matrix, 4> hidden_;
    InfoNceResult inter_;
    InfoNceResult intra_v_;
    InfoNceResult intra_t_;
    int inter_text_slot_ = 1;
};

}  // namespace chartgcl
