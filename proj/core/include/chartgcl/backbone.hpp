// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "chartgcl/autodiff.hpp"
#include "chartgcl/scene.hpp"

#include <random>
#include <string>
#include <vector>

namespace chartgcl {

struct BackboneConfig {
    int d_model = 128;
    int heads = 4;
    int ffn_dim = 256;
    int encoder_layers = 2;
    int decoder_layers = 2;
    int max_patches = 64;
    int max_text_len = 64;
    int prompt_slots = 36;

    void validate() const;
};

/// Width of the per-patch raster: one coverage channel per class plus a 4x4
/// sub-cell occupancy map of data marks.
int patch_feature_dim(std::size_t class_count);

/// Coarse raster of the scene layout, one row per patch (row-major grid).
/// Text is not rendered; only box geometry and class reach the encoder.
Matrix patch_features(const ChartScene& scene, const std::vector<std::string>& classes);

/// Pre-LN transformer: a patch encoder and a causal text decoder with
/// cross-attention over the encoder states. Parameters live in the caller's
/// ParamStore under the "enc." and "dec." prefixes.
class ToyBackbone {
public:
    ToyBackbone(const BackboneConfig& cfg, int patch_dim, int vocab_size, ad::ParamStore& store,
                std::mt19937_64& rng);

    /// Final encoder hidden states, one row per patch.
    ad::Var encode(const Matrix& patch_feats) const;

    /// Logits over [prompt rows ++ token embeddings]; one row per position.
    /// The prompt must have exactly prompt_slots rows.
    ad::Var decode(const ad::Var& prompt, const std::vector<int>& tokens, const ad::Var& encoder_states) const;

    const ad::Var& pad_vector() const { return pad_; }
    const BackboneConfig& config() const { return cfg_; }
    int vocab_size() const { return vocab_size_; }

private:
    struct Norm {
        ad::Var gamma, beta;
    };
    struct Attention {
        ad::Var wq, wk, wv, wo;
    };
    struct FeedForward {
        ad::Var w1, b1, w2, b2;
    };
    struct EncoderLayer {
        Norm ln1;
        Attention attn;
        Norm ln2;
        FeedForward ff;
    };
    struct DecoderLayer {
        Norm ln1;
        Attention self_attn;
        Norm ln2;
        Attention cross_attn;
        Norm ln3;
        FeedForward ff;
    };

    ad::Var attend(const Attention& a, const ad::Var& queries, const ad::Var& keys, bool causal) const;
    ad::Var feed_forward(const FeedForward& f, const ad::Var& x) const;
    static ad::Var norm(const Norm& n, const ad::Var& x);

    BackboneConfig cfg_;
    int vocab_size_;
    ad::Var patch_w_, patch_b_, enc_pos_;
    std::vector<EncoderLayer> encoder_;
    Norm enc_final_;
    ad::Var tok_emb_, dec_pos_, pad_;
    std::vector<DecoderLayer> decoder_;
    Norm dec_final_;
    ad::Var out_w_, out_b_;
};

}  // namespace chartgcl
