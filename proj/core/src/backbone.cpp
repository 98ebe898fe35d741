// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartgcl/backbone.hpp"

#include <algorithm>
#include <cmath>

namespace chartgcl {

void BackboneConfig::validate() const {
    if (d_model <= 0 || heads <= 0 || d_model % heads != 0) throw Error("d_model must be a positive multiple of heads");
    if (ffn_dim <= 0) throw Error("ffn_dim must be positive");
    if (encoder_layers < 0 || decoder_layers < 0) throw Error("layer counts must be >= 0");
    if (max_patches <= 0 || max_text_len <= 0) throw Error("max_patches and max_text_len must be positive");
    if (prompt_slots <= 0) throw Error("prompt_slots must be positive");
}

namespace {

constexpr int kSubcells = 4;
const std::vector<std::string> kMarkClasses = {"bar", "line-point", "pie-slice"};

double overlap(double a0, double a1, double b0, double b1) { return std::max(0.0, std::min(a1, b1) - std::max(a0, b0)); }

}  // namespace

int patch_feature_dim(std::size_t class_count) { return static_cast<int>(class_count) + kSubcells * kSubcells; }

Matrix patch_features(const ChartScene& scene, const std::vector<std::string>& classes) {
    const int cols = scene.grid_cols();
    const int rows = scene.grid_rows();
    const double ps = scene.patch_size;
    const double sub = ps / kSubcells;
    const auto n_cls = static_cast<Eigen::Index>(classes.size());
    Matrix out = Matrix::Zero(rows * cols, patch_feature_dim(classes.size()));
    for (const auto& obj : scene.objects) {
        const auto cls_it = std::find(classes.begin(), classes.end(), obj.cls);
        if (cls_it == classes.end()) throw Error("scene " + scene.scene_id + ": unknown class '" + obj.cls + "'");
        const auto channel = static_cast<Eigen::Index>(cls_it - classes.begin());
        const bool mark = std::find(kMarkClasses.begin(), kMarkClasses.end(), obj.cls) != kMarkClasses.end();
        const auto& b = obj.bbox;
        const int c0 = std::max(0, static_cast<int>(std::floor(b.x0 / ps)));
        const int c1 = std::min(cols - 1, static_cast<int>(std::floor(b.x1 / ps)));
        const int r0 = std::max(0, static_cast<int>(std::floor(b.y0 / ps)));
        const int r1 = std::min(rows - 1, static_cast<int>(std::floor(b.y1 / ps)));
        for (int r = r0; r <= r1; ++r) {
            for (int c = c0; c <= c1; ++c) {
                const double px = c * ps, py = r * ps;
                const double area = overlap(b.x0, b.x1, px, px + ps) * overlap(b.y0, b.y1, py, py + ps);
                if (area <= 0) continue;
                const Eigen::Index p = r * cols + c;
                out(p, channel) = std::min(1.0, out(p, channel) + area / (ps * ps));
                if (!mark) continue;
                for (int sr = 0; sr < kSubcells; ++sr) {
                    for (int sc = 0; sc < kSubcells; ++sc) {
                        const double sx = px + sc * sub, sy = py + sr * sub;
                        const double a = overlap(b.x0, b.x1, sx, sx + sub) * overlap(b.y0, b.y1, sy, sy + sub);
                        const Eigen::Index f = n_cls + sr * kSubcells + sc;
                        out(p, f) = std::min(1.0, out(p, f) + a / (sub * sub));
                    }
                }
            }
        }
    }
    return out;
}

namespace {

Matrix normal_init(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, stddev);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

}  // namespace

ToyBackbone::ToyBackbone(const BackboneConfig& cfg, int patch_dim, int vocab_size, ad::ParamStore& store,
                         std::mt19937_64& rng)
    : cfg_(cfg), vocab_size_(vocab_size) {
    cfg_.validate();
    const int d = cfg_.d_model;
    constexpr double kStd = 0.02;
    const auto norm_params = [&](const std::string& name) {
        return Norm{store.add(name + ".gamma", Matrix::Ones(1, d)), store.add(name + ".beta", Matrix::Zero(1, d))};
    };
    const auto attn_params = [&](const std::string& name) {
        return Attention{store.add(name + ".wq", normal_init(d, d, kStd, rng)),
                         store.add(name + ".wk", normal_init(d, d, kStd, rng)),
                         store.add(name + ".wv", normal_init(d, d, kStd, rng)),
                         store.add(name + ".wo", normal_init(d, d, kStd, rng))};
    };
    const auto ff_params = [&](const std::string& name) {
        return FeedForward{store.add(name + ".w1", normal_init(d, cfg_.ffn_dim, kStd, rng)),
                           store.add(name + ".b1", Matrix::Zero(1, cfg_.ffn_dim)),
                           store.add(name + ".w2", normal_init(cfg_.ffn_dim, d, kStd, rng)),
                           store.add(name + ".b2", Matrix::Zero(1, d))};
    };

    patch_w_ = store.add("enc.patch.w", normal_init(patch_dim, d, kStd, rng));
    patch_b_ = store.add("enc.patch.b", Matrix::Zero(1, d));
    enc_pos_ = store.add("enc.pos", normal_init(cfg_.max_patches, d, kStd, rng));
    for (int l = 0; l < cfg_.encoder_layers; ++l) {
        const std::string p = "enc.layer" + std::to_string(l);
        EncoderLayer layer;
        layer.ln1 = norm_params(p + ".ln1");
        layer.attn = attn_params(p + ".attn");
        layer.ln2 = norm_params(p + ".ln2");
        layer.ff = ff_params(p + ".ff");
        encoder_.push_back(std::move(layer));
    }
    enc_final_ = norm_params("enc.ln_final");

    tok_emb_ = store.add("dec.tok_emb", normal_init(vocab_size, d, kStd, rng));
    dec_pos_ = store.add("dec.pos", normal_init(cfg_.prompt_slots + cfg_.max_text_len, d, kStd, rng));
    pad_ = store.add("dec.pad", Matrix::Zero(1, d));
    for (int l = 0; l < cfg_.decoder_layers; ++l) {
        const std::string p = "dec.layer" + std::to_string(l);
        DecoderLayer layer;
        layer.ln1 = norm_params(p + ".ln1");
        layer.self_attn = attn_params(p + ".self");
        layer.ln2 = norm_params(p + ".ln2");
        layer.cross_attn = attn_params(p + ".cross");
        layer.ln3 = norm_params(p + ".ln3");
        layer.ff = ff_params(p + ".ff");
        decoder_.push_back(std::move(layer));
    }
    dec_final_ = norm_params("dec.ln_final");
    out_w_ = store.add("dec.out.w", normal_init(d, vocab_size, kStd, rng));
    out_b_ = store.add("dec.out.b", Matrix::Zero(1, vocab_size));
}

ad::Var ToyBackbone::norm(const Norm& n, const ad::Var& x) { return ad::layer_norm(x, n.gamma, n.beta); }

ad::Var ToyBackbone::attend(const Attention& a, const ad::Var& queries, const ad::Var& keys, bool causal) const {
    const ad::Var q = ad::matmul(queries, a.wq);
    const ad::Var k = ad::matmul(keys, a.wk);
    const ad::Var v = ad::matmul(keys, a.wv);
    const int dh = cfg_.d_model / cfg_.heads;
    const double scale = 1.0 / std::sqrt(double(dh));
    std::vector<ad::Var> heads;
    heads.reserve(std::size_t(cfg_.heads));
    for (int h = 0; h < cfg_.heads; ++h) {
        const auto qh = ad::slice_cols(q, h * dh, dh);
        const auto kh = ad::slice_cols(k, h * dh, dh);
        const auto vh = ad::slice_cols(v, h * dh, dh);
        const auto weights = ad::softmax_rows(ad::scale(ad::matmul_nt(qh, kh), scale), causal);
        heads.push_back(ad::matmul(weights, vh));
    }
    return ad::matmul(cfg_.heads == 1 ? heads.front() : ad::concat_cols(heads), a.wo);
}

ad::Var ToyBackbone::feed_forward(const FeedForward& f, const ad::Var& x) const {
    const auto h = ad::gelu(ad::add_row(ad::matmul(x, f.w1), f.b1));
    return ad::add_row(ad::matmul(h, f.w2), f.b2);
}

ad::Var ToyBackbone::encode(const Matrix& patch_feats) const {
    if (patch_feats.rows() > cfg_.max_patches) {
        throw Error("scene has " + std::to_string(patch_feats.rows()) + " patches, model supports " +
                    std::to_string(cfg_.max_patches));
    }
    if (patch_feats.cols() != patch_w_->value.rows()) throw Error("patch feature width does not match the model");
    ad::Var x = ad::add_row(ad::matmul(ad::constant(patch_feats), patch_w_), patch_b_);
    x = ad::add(x, ad::slice_rows(enc_pos_, 0, patch_feats.rows()));
    for (const auto& layer : encoder_) {
        const auto h = norm(layer.ln1, x);
        x = ad::add(x, attend(layer.attn, h, h, false));
        x = ad::add(x, feed_forward(layer.ff, norm(layer.ln2, x)));
    }
    return norm(enc_final_, x);
}

ad::Var ToyBackbone::decode(const ad::Var& prompt, const std::vector<int>& tokens,
                            const ad::Var& encoder_states) const {
    if (prompt->value.rows() != cfg_.prompt_slots || prompt->value.cols() != cfg_.d_model) {
        throw Error("soft prompt must be " + std::to_string(cfg_.prompt_slots) + " x " + std::to_string(cfg_.d_model));
    }
    if (tokens.empty()) throw Error("decoder needs at least one token");
    if (static_cast<int>(tokens.size()) > cfg_.max_text_len) {
        throw Error("decoder input of " + std::to_string(tokens.size()) + " tokens exceeds max_text_len " +
                    std::to_string(cfg_.max_text_len));
    }
    for (int t : tokens) {
        if (t < 0 || t >= vocab_size_) throw Error("token id " + std::to_string(t) + " outside the vocabulary");
    }
    ad::Var x = ad::concat_rows({prompt, ad::gather_rows(tok_emb_, tokens)});
    const auto length = x->value.rows();
    if (length != cfg_.prompt_slots + static_cast<Eigen::Index>(tokens.size())) {
        throw Error("decoder input length invariant violated");
    }
    x = ad::add(x, ad::slice_rows(dec_pos_, 0, length));
    for (const auto& layer : decoder_) {
        const auto h = norm(layer.ln1, x);
        x = ad::add(x, attend(layer.self_attn, h, h, true));
        x = ad::add(x, attend(layer.cross_attn, norm(layer.ln2, x), encoder_states, false));
        x = ad::add(x, feed_forward(layer.ff, norm(layer.ln3, x)));
    }
    return ad::add_row(ad::matmul(norm(dec_final_, x), out_w_), out_b_);
}

}  // namespace chartgcl
