// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartgcl/encoders.hpp"

#include <cmath>

namespace chartgcl {

GCNParams GCNParams::glorot(const std::vector<int>& dims, std::mt19937_64& rng) {
    if (dims.size() < 2) throw Error("GCN needs at least one layer");
    GCNParams p;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const double limit = std::sqrt(6.0 / double(dims[l] + dims[l + 1]));
        std::uniform_real_distribution<double> u(-limit, limit);
        GCNLayer layer{Matrix(dims[l], dims[l + 1]), RowVector::Zero(dims[l + 1])};
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = u(rng);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

void GCNParams::validate() const {
    if (layers.empty()) throw Error("GCN has no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        if (layer.bias.size() != layer.weight.cols()) throw Error("GCN layer " + std::to_string(l) + ": bias width mismatch");
        if (l > 0 && layer.weight.rows() != layers[l - 1].weight.cols()) {
            throw Error("GCN layer " + std::to_string(l) + ": input width does not chain");
        }
        if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
            throw Error("GCN layer " + std::to_string(l) + ": non-finite parameters");
        }
    }
}

Matrix normalized_adjacency(const Graph& g) {
    const Eigen::Index n = g.node_count();
    Matrix a = Matrix::Identity(n, n);
    for (const auto& e : g.edges) {
        if (e.src == e.dst) continue;
        a(e.src, e.dst) += e.weight;
        a(e.dst, e.src) += e.weight;
    }
    const Vector inv_sqrt = a.rowwise().sum().cwiseSqrt().cwiseInverse();
    return inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
}

Matrix gcn_forward(const Matrix& adjacency, const Matrix& features, const GCNParams& params, GCNCache* cache) {
    params.validate();
    if (features.cols() != params.input_dim()) {
        throw Error("GCN input width " + std::to_string(features.cols()) + " != " + std::to_string(params.input_dim()));
    }
    if (adjacency.rows() != features.rows() || adjacency.cols() != features.rows()) {
        throw Error("GCN adjacency does not match node count");
    }
    if (!features.allFinite()) throw Error("GCN input features contain NaN or Inf");

    if (cache) {
        cache->adjacency = adjacency;
        cache->inputs.clear();
        cache->pre_activation.clear();
        cache->ready = false;
    }
    Matrix h = features;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const auto& layer = params.layers[l];
        Matrix z = adjacency * (h * layer.weight);
        z.rowwise() += layer.bias;
        if (cache) {
            cache->inputs.push_back(h);
            cache->pre_activation.push_back(z);
        }
        const bool last = l + 1 == params.layers.size();
        h = (!last && params.hidden_activation == Activation::relu) ? Matrix(z.cwiseMax(0.0)) : z;
    }
    if (cache) cache->ready = true;
    return h;
}

Matrix gcn_forward(const Graph& graph, const GCNParams& params, GCNCache* cache) {
    return gcn_forward(normalized_adjacency(graph), graph.features, params, cache);
}

GCNGrads gcn_backward(const GCNCache& cache, const GCNParams& params, const Matrix& d_output) {
    if (!cache.ready || cache.inputs.size() != params.layers.size()) {
        throw Error("gcn_backward called before gcn_forward");
    }
    GCNGrads grads;
    grads.weight.resize(params.layers.size());
    grads.bias.resize(params.layers.size());
    Matrix upstream = d_output;
    for (std::size_t l = params.layers.size(); l-- > 0;) {
        const bool last = l + 1 == params.layers.size();
        Matrix dz = upstream;
        if (!last && params.hidden_activation == Activation::relu) {
            dz = dz.cwiseProduct((cache.pre_activation[l].array() > 0.0).cast<double>().matrix());
        }
        grads.bias[l] = dz.colwise().sum();
        // z = Â H W  =>  dW = (Â H)^T dz,  dH = Â^T dz W^T
        const Matrix ah = cache.adjacency * cache.inputs[l];
        grads.weight[l] = ah.transpose() * dz;
        upstream = cache.adjacency.transpose() * (dz * params.layers[l].weight.transpose());
    }
    grads.input = std::move(upstream);
    return grads;
}

}  // namespace chartgcl
