// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "chartgcl/common.hpp"
#include "chartgcl/graphs.hpp"

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace chartgcl {

enum class Activation { relu, identity };

struct GCNLayer {
    Matrix weight;  // d_in x d_out
    RowVector bias;  // 1 x d_out
};

/// Weights of a graph convolutional encoder. `hidden_activation` is applied
/// after every layer except the last.
struct GCNParams {
    std::vector<GCNLayer> layers;
    Activation hidden_activation = Activation::relu;

    Eigen::Index input_dim() const { return layers.front().weight.rows(); }
    Eigen::Index output_dim() const { return layers.back().weight.cols(); }

    /// Glorot-uniform weights, zero biases. dims = {d_in, h_1, ..., d_out}.
    static GCNParams glorot(const std::vector<int>& dims, std::mt19937_64& rng);

    /// Throws on inconsistent shapes or non-finite values.
    void validate() const;
};

/// D^-1/2 (A + I) D^-1/2 with A holding the edge weights symmetrically.
Matrix normalized_adjacency(const Graph& g);

/// Values kept by gcn_forward for gcn_backward.
struct GCNCache {
    Matrix adjacency;
    std::vector<Matrix> inputs;      // H^l fed to layer l
    std::vector<Matrix> pre_activation;
    bool ready = false;
};

struct GCNGrads {
    std::vector<Matrix> weight;
    std::vector<RowVector> bias;
    Matrix input;
};

/// H^{l+1} = act(Â H^l W_l + b_l). Rows follow node order.
Matrix gcn_forward(const Matrix& adjacency, const Matrix& features, const GCNParams& params,
                   GCNCache* cache = nullptr);
Matrix gcn_forward(const Graph& graph, const GCNParams& params, GCNCache* cache = nullptr);

/// Gradients of a scalar loss given dL/dOutput. Throws if the cache is empty.
GCNGrads gcn_backward(const GCNCache& cache, const GCNParams& params, const Matrix& d_output);

enum class EmbedderBackend { deterministic_stub, external_encoder };

/// Text -> fixed-width feature vector.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual Vector embed(std::string_view text) = 0;
    virtual int dim() const = 0;
    virtual EmbedderBackend backend() const = 0;

    /// One row per text.
    Matrix embed_all(const std::vector<std::string>& texts);
};

/// Unit-norm Gaussian vector seeded by a stable hash of (text, seed).
Vector stub_embed(std::string_view text, int dim, std::uint64_t seed);

class StubEmbedder final : public Embedder {
public:
    StubEmbedder(int dim, std::uint64_t seed);
    Vector embed(std::string_view text) override { return stub_embed(text, dim_, seed_); }
    int dim() const override { return dim_; }
    EmbedderBackend backend() const override { return EmbedderBackend::deterministic_stub; }

private:
    int dim_;
    std::uint64_t seed_;
};

/// Client for a local encoder service: POST `{"texts":[...]}` answered by
/// `{"vectors":[[...]]}`. Results are memoized so a text always maps to the
/// same vector within a run.
class HttpEmbedder final : public Embedder {
public:
    HttpEmbedder(std::string endpoint, int dim, double timeout_seconds = 30.0);
    ~HttpEmbedder() override;

    Vector embed(std::string_view text) override;
    int dim() const override { return dim_; }
    EmbedderBackend backend() const override { return EmbedderBackend::external_encoder; }

    /// Fetches every missing text in one request.
    void prefetch(const std::vector<std::string>& texts);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int dim_;
};

}  // namespace chartgcl
