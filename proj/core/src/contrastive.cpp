// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartgcl/contrastive.hpp"

#include <cmath>

namespace chartgcl {

std::string_view to_string(Similarity s) { return s == Similarity::cosine ? "cosine" : "cosine-with-projection"; }

Similarity parse_similarity(std::string_view text) {
    if (text == "cosine") return Similarity::cosine;
    if (text == "cosine-with-projection") return Similarity::cosine_projection;
    throw Error("unknown similarity '" + std::string(text) + "'");
}

void SimilarityConfig::validate() const {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw Error("contrastive temperature tau must be > 0");
    if (theta == Similarity::cosine_projection && projection_hidden <= 0) {
        throw Error("projection_hidden must be positive");
    }
}

ProjectionHead ProjectionHead::init(int in_dim, int hidden_dim, int out_dim, std::mt19937_64& rng) {
    const auto glorot = [&](int rows, int cols) {
        const double limit = std::sqrt(6.0 / double(rows + cols));
        std::uniform_real_distribution<double> u(-limit, limit);
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
        return m;
    };
    ProjectionHead p;
    p.w1 = glorot(in_dim, hidden_dim);
    p.b1 = RowVector::Zero(hidden_dim);
    p.w2 = glorot(hidden_dim, out_dim);
    p.b2 = RowVector::Zero(out_dim);
    return p;
}

Matrix ProjectionHead::forward(const Matrix& h) const {
    Matrix a = h * w1;
    a.rowwise() += b1;
    Matrix z = a.cwiseMax(0.0) * w2;
    z.rowwise() += b2;
    return z;
}

namespace {

constexpr double kNormFloor = 1e-12;

struct Normalized {
    Matrix unit;
    Vector norms;
};

Normalized normalize_rows(const Matrix& m) {
    Normalized out{m, m.rowwise().norm().cwiseMax(kNormFloor)};
    out.unit.array().colwise() /= out.norms.array();
    return out;
}

// dL/dx for x_hat = x / |x|.
Matrix unnormalize_grad(const Normalized& n, const Matrix& d_unit) {
    const Vector radial = (n.unit.cwiseProduct(d_unit)).rowwise().sum();
    Matrix d = d_unit - n.unit.cwiseProduct(radial.replicate(1, n.unit.cols()));
    d.array().colwise() /= n.norms.array();
    return d;
}

// Mean over rows of (logsumexp_j S_ij - S_ii), and its gradient w.r.t. S.
double row_loss(const Matrix& s, Matrix* grad) {
    const Eigen::Index m = s.rows();
    double total = 0;
    if (grad) grad->resize(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double mx = s.row(i).maxCoeff();
        const RowVector e = (s.row(i).array() - mx).exp().matrix();
        const double z = e.sum();
        total += mx + std::log(z) - s(i, i);
        if (grad) {
            grad->row(i) = e / z;
            (*grad)(i, i) -= 1.0;
        }
    }
    if (grad) *grad /= double(m);
    return total / double(m);
}

void check_inputs(const Matrix& a, const Matrix& p) {
    if (a.rows() == 0) throw Error("InfoNCE needs at least one pair");
    if (a.rows() != p.rows() || a.cols() != p.cols()) throw Error("InfoNCE anchor/positive shapes differ");
    if (!a.allFinite() || !p.allFinite()) throw Error("InfoNCE inputs contain NaN or Inf");
}

}  // namespace

InfoNceResult info_nce_with_grad(const Matrix& anchors, const Matrix& positives, const SimilarityConfig& cfg) {
    cfg.validate();
    check_inputs(anchors, positives);
    const Normalized u = normalize_rows(anchors);
    const Normalized v = normalize_rows(positives);
    const Matrix s = (u.unit * v.unit.transpose()) / cfg.tau;

    Matrix ds;
    InfoNceResult out;
    out.loss = row_loss(s, &ds);
    if (cfg.symmetric) {
        Matrix ds_t;
        out.loss = 0.5 * (out.loss + row_loss(s.transpose(), &ds_t));
        ds = 0.5 * (ds + ds_t.transpose());
    }
    const Matrix du = ds * v.unit / cfg.tau;
    const Matrix dv = ds.transpose() * u.unit / cfg.tau;
    out.d_anchors = unnormalize_grad(u, du);
    out.d_positives = unnormalize_grad(v, dv);
    return out;
}

double info_nce(const Matrix& anchors, const Matrix& positives, const SimilarityConfig& cfg) {
    cfg.validate();
    check_inputs(anchors, positives);
    const Matrix s = (normalize_rows(anchors).unit * normalize_rows(positives).unit.transpose()) / cfg.tau;
    double loss = row_loss(s, nullptr);
    if (cfg.symmetric) loss = 0.5 * (loss + row_loss(s.transpose(), nullptr));
    return loss;
}

ContrastiveObjective::ContrastiveObjective(SimilarityConfig cfg, const ProjectionHead* projection)
    : cfg_(cfg), projection_(projection) {
    cfg_.validate();
    if (cfg_.theta == Similarity::cosine_projection && !projection_) {
        throw Error("cosine-with-projection similarity requires a projection head");
    }
    if (cfg_.theta == Similarity::cosine) projection_ = nullptr;
}

namespace {

Matrix gather_rows(const Matrix& m, const std::vector<std::pair<int, int>>& pairs, bool second) {
    Matrix out(static_cast<Eigen::Index>(pairs.size()), m.cols());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const int r = second ? pairs[i].second : pairs[i].first;
        if (r < 0 || r >= m.rows()) throw Error("pair index " + std::to_string(r) + " out of range");
        out.row(static_cast<Eigen::Index>(i)) = m.row(r);
    }
    return out;
}

void scatter_rows(Matrix& into, const Matrix& rows, const std::vector<std::pair<int, int>>& pairs, bool second) {
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        into.row(second ? pairs[i].second : pairs[i].first) += rows.row(static_cast<Eigen::Index>(i));
    }
}

}  // namespace

ContrastiveTerms ContrastiveObjective::forward(const ContrastiveBatch& batch, bool intra) {
    ready_ = false;
    if (batch.pairs.size() == 0) throw Error("contrastive batch has no positive pairs");
    const bool need_aug = intra || cfg_.inter_uses_augmented_text;
    if (need_aug && (!batch.h_v_aug || !batch.h_t_aug)) {
        throw Error("contrastive loss needs augmented representations");
    }
    batch_ = batch;
    intra_ = intra;

    const std::array<const Matrix*, 4> inputs = {
        &batch_.h_v, &batch_.h_t, batch_.h_v_aug ? &*batch_.h_v_aug : nullptr,
        batch_.h_t_aug ? &*batch_.h_t_aug : nullptr};
    for (std::size_t k = 0; k < 4; ++k) {
        if (!inputs[k]) continue;
        if (projection_) {
            Matrix a = *inputs[k] * projection_->w1;
            a.rowwise() += projection_->b1;
            hidden_[k] = a;
            z_[k] = projection_->forward(*inputs[k]);
        } else {
            z_[k] = *inputs[k];
        }
    }

    inter_text_slot_ = cfg_.inter_uses_augmented_text ? 3 : 1;
    ContrastiveTerms terms;
    inter_ = info_nce_with_grad(gather_rows(z_[0], batch_.pairs.pairs, false),
                                gather_rows(z_[std::size_t(inter_text_slot_)], batch_.pairs.pairs, true), cfg_);
    terms.inter = inter_.loss;
    if (intra) {
        intra_v_ = info_nce_with_grad(z_[0], z_[2], cfg_);
        intra_t_ = info_nce_with_grad(z_[1], z_[3], cfg_);
        terms.intra_visual = intra_v_.loss;
        terms.intra_textual = intra_t_.loss;
    }
    ready_ = true;
    return terms;
}

ContrastiveGrads ContrastiveObjective::backward(double d_loss) const {
    if (!ready_) throw Error("contrastive backward called before forward");
    std::array<Matrix, 4> dz;
    for (std::size_t k = 0; k < 4; ++k) {
        if (z_[k].size() > 0) dz[k] = Matrix::Zero(z_[k].rows(), z_[k].cols());
    }
    scatter_rows(dz[0], inter_.d_anchors, batch_.pairs.pairs, false);
    scatter_rows(dz[std::size_t(inter_text_slot_)], inter_.d_positives, batch_.pairs.pairs, true);
    if (intra_) {
        dz[0] += intra_v_.d_anchors;
        dz[2] += intra_v_.d_positives;
        dz[1] += intra_t_.d_anchors;
        dz[3] += intra_t_.d_positives;
    }

    const std::array<const Matrix*, 4> inputs = {
        &batch_.h_v, &batch_.h_t, batch_.h_v_aug ? &*batch_.h_v_aug : nullptr,
        batch_.h_t_aug ? &*batch_.h_t_aug : nullptr};
    std::array<Matrix, 4> dh;
    ContrastiveGrads out;
    if (projection_) {
        ProjectionGrads pg{Matrix::Zero(projection_->w1.rows(), projection_->w1.cols()),
                           RowVector::Zero(projection_->b1.size()),
                           Matrix::Zero(projection_->w2.rows(), projection_->w2.cols()),
                           RowVector::Zero(projection_->b2.size())};
        for (std::size_t k = 0; k < 4; ++k) {
            if (!inputs[k]) continue;
            const Matrix g = d_loss * dz[k];
            const Matrix act = hidden_[k].cwiseMax(0.0);
            pg.w2 += act.transpose() * g;
            pg.b2 += g.colwise().sum();
            const Matrix da =
                (g * projection_->w2.transpose()).cwiseProduct((hidden_[k].array() > 0.0).cast<double>().matrix());
            pg.w1 += inputs[k]->transpose() * da;
            pg.b1 += da.colwise().sum();
            dh[k] = da * projection_->w1.transpose();
        }
        out.projection = std::move(pg);
    } else {
        for (std::size_t k = 0; k < 4; ++k) {
            if (inputs[k]) dh[k] = d_loss * dz[k];
        }
    }
    out.h_v = std::move(dh[0]);
    out.h_t = std::move(dh[1]);
    if (inputs[2]) out.h_v_aug = std::move(dh[2]);
    if (inputs[3]) out.h_t_aug = std::move(dh[3]);
    return out;
}

double inter_modal_loss(const ContrastiveBatch& batch, const SimilarityConfig& cfg, const ProjectionHead* projection) {
    ContrastiveObjective obj(cfg, projection);
    return obj.forward(batch, false).inter;
}

ContrastiveTerms full_loss(const ContrastiveBatch& batch, const SimilarityConfig& cfg, const ProjectionHead* projection) {
    if (!batch.h_v_aug || !batch.h_t_aug) throw Error("full contrastive loss needs augmented representations");
    ContrastiveObjective obj(cfg, projection);
    return obj.forward(batch, true);
}

}  // namespace chartgcl
