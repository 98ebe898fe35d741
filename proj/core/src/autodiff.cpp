// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartgcl/autodiff.hpp"

#include <cmath>
#include <numbers>
#include <unordered_set>

namespace chartgcl::ad {

void Node::accumulate(const Matrix& g) {
    if (grad.size() == 0) {
        grad = g;
    } else {
        grad += g;
    }
}

namespace {
thread_local bool g_no_grad = false;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_no_grad) { g_no_grad = true; }
NoGradGuard::~NoGradGuard() { g_no_grad = previous_; }

Var constant(Matrix value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    return n;
}

Var leaf(Matrix value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return n;
}

namespace {

Var make(Matrix value, std::vector<Var> parents, std::function<void(Node&)> fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    if (!g_no_grad) {
        for (const auto& p : parents) n->requires_grad = n->requires_grad || p->requires_grad;
    }
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backward_fn = std::move(fn);
    }
    return n;
}

void require_shape(bool ok, const char* op) {
    if (!ok) throw Error(std::string("autodiff: shape mismatch in ") + op);
}

}  // namespace

void backward(const Var& root, double seed) {
    if (!root->requires_grad) return;
    // Iterative post-order DFS gives a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->accumulate(Matrix::Constant(root->value.rows(), root->value.cols(), seed));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && n->has_grad()) n->backward_fn(*n);
    }
    // Interior grads are no longer needed; leaves keep theirs.
    for (Node* n : order) {
        if (n->backward_fn) n->grad.resize(0, 0);
    }
}

Var matmul(const Var& a, const Var& b) {
    require_shape(a->value.cols() == b->value.rows(), "matmul");
    return make(a->value * b->value, {a, b}, [a, b](Node& self) {
        if (a->requires_grad) a->accumulate(self.grad * b->value.transpose());
        if (b->requires_grad) b->accumulate(a->value.transpose() * self.grad);
    });
}

Var matmul_nt(const Var& a, const Var& b) {
    require_shape(a->value.cols() == b->value.cols(), "matmul_nt");
    return make(a->value * b->value.transpose(), {a, b}, [a, b](Node& self) {
        if (a->requires_grad) a->accumulate(self.grad * b->value);
        if (b->requires_grad) b->accumulate(self.grad.transpose() * a->value);
    });
}

Var add(const Var& a, const Var& b) {
    require_shape(a->value.rows() == b->value.rows() && a->value.cols() == b->value.cols(), "add");
    return make(a->value + b->value, {a, b}, [a, b](Node& self) {
        if (a->requires_grad) a->accumulate(self.grad);
        if (b->requires_grad) b->accumulate(self.grad);
    });
}

Var add_row(const Var& x, const Var& row) {
    require_shape(row->value.rows() == 1 && row->value.cols() == x->value.cols(), "add_row");
    Matrix out = x->value;
    out.rowwise() += row->value.row(0);
    return make(std::move(out), {x, row}, [x, row](Node& self) {
        if (x->requires_grad) x->accumulate(self.grad);
        if (row->requires_grad) row->accumulate(self.grad.colwise().sum());
    });
}

Var scale(const Var& x, double s) {
    return make(x->value * s, {x}, [x, s](Node& self) { x->accumulate(self.grad * s); });
}

Var relu(const Var& x) {
    return make(x->value.cwiseMax(0.0), {x}, [x](Node& self) {
        x->accumulate(self.grad.cwiseProduct((x->value.array() > 0.0).cast<double>().matrix()));
    });
}

Var gelu(const Var& x) {
    // tanh approximation
    static constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
    static constexpr double k = 0.044715;
    const Eigen::ArrayXXd v = x->value.array();
    const Eigen::ArrayXXd t = (c * (v + k * v.cube())).tanh();
    Matrix out = (0.5 * v * (1.0 + t)).matrix();
    return make(std::move(out), {x}, [x, t](Node& self) {
        const Eigen::ArrayXXd v = x->value.array();
        const Eigen::ArrayXXd dt = (1.0 - t.square()) * c * (1.0 + 3.0 * k * v.square());
        const Eigen::ArrayXXd d = 0.5 * (1.0 + t) + 0.5 * v * dt;
        x->accumulate((self.grad.array() * d).matrix());
    });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
    const Eigen::Index d = x->value.cols();
    require_shape(gamma->value.rows() == 1 && gamma->value.cols() == d, "layer_norm gamma");
    require_shape(beta->value.rows() == 1 && beta->value.cols() == d, "layer_norm beta");
    const Vector mean = x->value.rowwise().mean();
    Matrix centered = x->value.colwise() - mean;
    const Vector inv_std = ((centered.array().square().rowwise().sum() / double(d)) + eps).rsqrt().matrix();
    Matrix xhat = centered.array().colwise() * inv_std.array();
    Matrix out = (xhat.array().rowwise() * gamma->value.row(0).array()).matrix();
    out.rowwise() += beta->value.row(0);
    return make(std::move(out), {x, gamma, beta}, [x, gamma, beta, xhat, inv_std, d](Node& self) {
        if (gamma->requires_grad) gamma->accumulate(self.grad.cwiseProduct(xhat).colwise().sum());
        if (beta->requires_grad) beta->accumulate(self.grad.colwise().sum());
        if (x->requires_grad) {
            const Matrix dxhat = (self.grad.array().rowwise() * gamma->value.row(0).array()).matrix();
            const Vector mean_d = dxhat.rowwise().mean();
            const Vector mean_dx = dxhat.cwiseProduct(xhat).rowwise().mean();
            Matrix dx = dxhat;
            dx.colwise() -= mean_d;
            dx -= xhat.cwiseProduct(mean_dx.replicate(1, d));
            dx.array().colwise() *= inv_std.array();
            x->accumulate(dx);
        }
    });
}

Var softmax_rows(const Var& x, bool causal) {
    const Eigen::Index rows = x->value.rows(), cols = x->value.cols();
    Matrix out(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const Eigen::Index valid = causal ? std::min<Eigen::Index>(i + 1, cols) : cols;
        const double mx = x->value.row(i).head(valid).maxCoeff();
        double z = 0;
        for (Eigen::Index j = 0; j < valid; ++j) {
            out(i, j) = std::exp(x->value(i, j) - mx);
            z += out(i, j);
        }
        out.row(i).head(valid) /= z;
        if (valid < cols) out.row(i).tail(cols - valid).setZero();
    }
    return make(out, {x}, [x, out](Node& self) {
        const Vector dot = self.grad.cwiseProduct(out).rowwise().sum();
        Matrix dx = self.grad;
        dx.colwise() -= dot;
        x->accumulate(dx.cwiseProduct(out));
    });
}

Var slice_rows(const Var& x, Eigen::Index start, Eigen::Index count) {
    require_shape(start >= 0 && count >= 0 && start + count <= x->value.rows(), "slice_rows");
    return make(x->value.middleRows(start, count), {x}, [x, start, count](Node& self) {
        Matrix g = Matrix::Zero(x->value.rows(), x->value.cols());
        g.middleRows(start, count) = self.grad;
        x->accumulate(g);
    });
}

Var slice_cols(const Var& x, Eigen::Index start, Eigen::Index count) {
    require_shape(start >= 0 && count >= 0 && start + count <= x->value.cols(), "slice_cols");
    return make(x->value.middleCols(start, count), {x}, [x, start, count](Node& self) {
        Matrix g = Matrix::Zero(x->value.rows(), x->value.cols());
        g.middleCols(start, count) = self.grad;
        x->accumulate(g);
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    require_shape(!parts.empty(), "concat_rows");
    Eigen::Index rows = 0;
    const Eigen::Index cols = parts.front()->value.cols();
    for (const auto& p : parts) {
        require_shape(p->value.cols() == cols, "concat_rows");
        rows += p->value.rows();
    }
    Matrix out(rows, cols);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        out.middleRows(at, p->value.rows()) = p->value;
        at += p->value.rows();
    }
    return make(std::move(out), parts, [parts](Node& self) {
        Eigen::Index at = 0;
        for (const auto& p : parts) {
            if (p->requires_grad) p->accumulate(self.grad.middleRows(at, p->value.rows()));
            at += p->value.rows();
        }
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    require_shape(!parts.empty(), "concat_cols");
    Eigen::Index cols = 0;
    const Eigen::Index rows = parts.front()->value.rows();
    for (const auto& p : parts) {
        require_shape(p->value.rows() == rows, "concat_cols");
        cols += p->value.cols();
    }
    Matrix out(rows, cols);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        out.middleCols(at, p->value.cols()) = p->value;
        at += p->value.cols();
    }
    return make(std::move(out), parts, [parts](Node& self) {
        Eigen::Index at = 0;
        for (const auto& p : parts) {
            if (p->requires_grad) p->accumulate(self.grad.middleCols(at, p->value.cols()));
            at += p->value.cols();
        }
    });
}

Var gather_rows(const Var& table, const std::vector<int>& ids) {
    Matrix out(static_cast<Eigen::Index>(ids.size()), table->value.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= table->value.rows()) throw Error("gather_rows: index out of range");
        out.row(static_cast<Eigen::Index>(i)) = table->value.row(ids[i]);
    }
    return make(std::move(out), {table}, [table, ids](Node& self) {
        Matrix g = Matrix::Zero(table->value.rows(), table->value.cols());
        for (std::size_t i = 0; i < ids.size(); ++i) g.row(ids[i]) += self.grad.row(static_cast<Eigen::Index>(i));
        table->accumulate(g);
    });
}

Var cross_entropy(const Var& logits, const std::vector<int>& targets) {
    require_shape(static_cast<Eigen::Index>(targets.size()) == logits->value.rows(), "cross_entropy");
    const Eigen::Index rows = logits->value.rows();
    Matrix probs(rows, logits->value.cols());
    double total = 0;
    int count = 0;
    for (Eigen::Index i = 0; i < rows; ++i) {
        const double mx = logits->value.row(i).maxCoeff();
        const RowVector e = (logits->value.row(i).array() - mx).exp().matrix();
        const double z = e.sum();
        probs.row(i) = e / z;
        const int t = targets[std::size_t(i)];
        if (t < 0) continue;
        if (t >= logits->value.cols()) throw Error("cross_entropy: target out of range");
        total += mx + std::log(z) - logits->value(i, t);
        ++count;
    }
    if (count == 0) throw Error("cross_entropy: no target rows");
    Matrix out(1, 1);
    out(0, 0) = total / count;
    return make(std::move(out), {logits}, [logits, targets, probs, count](Node& self) {
        Matrix g = Matrix::Zero(probs.rows(), probs.cols());
        for (Eigen::Index i = 0; i < probs.rows(); ++i) {
            const int t = targets[std::size_t(i)];
            if (t < 0) continue;
            g.row(i) = probs.row(i);
            g(i, t) -= 1.0;
        }
        logits->accumulate(g * (self.grad(0, 0) / count));
    });
}

Var sum(const Var& x) {
    Matrix out(1, 1);
    out(0, 0) = x->value.sum();
    return make(std::move(out), {x}, [x](Node& self) {
        x->accumulate(Matrix::Constant(x->value.rows(), x->value.cols(), self.grad(0, 0)));
    });
}

Var custom(Matrix value, std::vector<Var> parents, std::function<std::vector<Matrix>(const Matrix&)> grads) {
    auto captured = parents;
    return make(std::move(value), std::move(parents), [captured, grads = std::move(grads)](Node& self) {
        const auto gs = grads(self.grad);
        for (std::size_t i = 0; i < captured.size() && i < gs.size(); ++i) {
            if (captured[i]->requires_grad && gs[i].size() > 0) captured[i]->accumulate(gs[i]);
        }
    });
}

Var ParamStore::add(std::string name, Matrix init) {
    if (contains(name)) throw Error("duplicate parameter '" + name + "'");
    auto v = leaf(std::move(init), true);
    entries_.push_back({std::move(name), v});
    return v;
}

const Var& ParamStore::at(std::string_view name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return e.var;
    }
    throw Error("unknown parameter '" + std::string(name) + "'");
}

bool ParamStore::contains(std::string_view name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return true;
    }
    return false;
}

void ParamStore::zero_grad() {
    for (auto& e : entries_) e.var->grad.resize(0, 0);
}

std::size_t ParamStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += static_cast<std::size_t>(e.var->value.size());
    return n;
}

double ParamStore::grad_norm() const {
    double sq = 0;
    for (const auto& e : entries_) {
        if (e.var->has_grad()) sq += e.var->grad.squaredNorm();
    }
    return std::sqrt(sq);
}

void AdamW::step(ParamStore& params, double lr, const std::function<bool(std::string_view)>& trainable) {
    const auto& entries = params.entries();
    if (m_.size() != entries.size()) {
        m_.clear();
        v_.clear();
        for (const auto& e : entries) {
            m_.push_back(Matrix::Zero(e.var->value.rows(), e.var->value.cols()));
            v_.push_back(Matrix::Zero(e.var->value.rows(), e.var->value.cols()));
        }
    }
    ++t_;
    double clip = 1.0;
    if (cfg_.clip_norm > 0) {
        const double norm = params.grad_norm();
        if (norm > cfg_.clip_norm) clip = cfg_.clip_norm / norm;
    }
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    for (std::size_t i = 0; i < entries.size(); ++i) {
        auto& node = *entries[i].var;
        if (!node.has_grad()) continue;
        if (trainable && !trainable(entries[i].name)) continue;
        const Matrix g = node.grad * clip;
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
        // Decoupled decay on matrices only; vectors (biases, norms) are exempt.
        if (cfg_.weight_decay > 0 && node.value.rows() > 1) node.value *= (1.0 - lr * cfg_.weight_decay);
        node.value.array() -= lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + cfg_.eps);
    }
}

}  // namespace chartgcl::ad
