// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "chartgcl/common.hpp"

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

// Minimal reverse-mode differentiation over dense double matrices. A forward
// pass builds a DAG of Nodes; backward() walks it once in reverse topological
// order. Graphs are rebuilt every step, parameters are long-lived leaves.
namespace chartgcl::ad {

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
    Matrix value;
    Matrix grad;  // empty until something flows in
    bool requires_grad = false;
    std::vector<Var> parents;
    std::function<void(Node&)> backward_fn;

    void accumulate(const Matrix& g);
    bool has_grad() const { return grad.size() > 0; }
};

/// While alive, new nodes on this thread record no backward graph.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

Var constant(Matrix value);
Var leaf(Matrix value, bool requires_grad = true);

/// Grad of `root` (seeded with `seed`) into every reachable node.
void backward(const Var& root, double seed = 1.0);

Var matmul(const Var& a, const Var& b);
// a * b^T
Var matmul_nt(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
// x + row broadcast over rows (row is 1 x d)
Var add_row(const Var& x, const Var& row);
Var scale(const Var& x, double s);
Var relu(const Var& x);
Var gelu(const Var& x);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
/// Row softmax. With `causal`, entry (i, j) is masked when j > i.
Var softmax_rows(const Var& x, bool causal = false);
Var slice_rows(const Var& x, Eigen::Index start, Eigen::Index count);
Var slice_cols(const Var& x, Eigen::Index start, Eigen::Index count);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
/// Rows of `table` picked by `ids` (embedding lookup).
Var gather_rows(const Var& table, const std::vector<int>& ids);
/// Mean token cross-entropy over rows whose target is >= 0.
Var cross_entropy(const Var& logits, const std::vector<int>& targets);
Var sum(const Var& x);

/// Node whose backward is supplied by the caller: `grads(g)` returns one
/// matrix per parent (an empty matrix means no contribution).
Var custom(Matrix value, std::vector<Var> parents,
           std::function<std::vector<Matrix>(const Matrix& grad_out)> grads);

/// Named trainable leaves in a fixed declaration order.
class ParamStore {
public:
    Var add(std::string name, Matrix init);
    const Var& at(std::string_view name) const;
    bool contains(std::string_view name) const;

    struct Entry {
        std::string name;
        Var var;
    };
    const std::vector<Entry>& entries() const { return entries_; }

    void zero_grad();
    std::size_t scalar_count() const;
    double grad_norm() const;

private:
    std::vector<Entry> entries_;
};

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    // Global gradient-norm clip; <= 0 disables.
    double clip_norm = 1.0;
};

class AdamW {
public:
    explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

    /// Applies one update to every parameter that received a gradient and
    /// whose name passes `trainable`.
    void step(ParamStore& params, double lr, const std::function<bool(std::string_view)>& trainable = {});

private:
    AdamWConfig cfg_;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
    long t_ = 0;
};

}  // namespace chartgcl::ad
