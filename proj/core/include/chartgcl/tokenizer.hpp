// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "chartgcl/scene.hpp"

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace chartgcl {

/// Greedy longest-match word-piece tokenizer. The vocabulary holds the
/// special tokens, every whole word seen in the corpus that contains no
/// digit, and every character both as a word start and as a "##" piece, so
/// numbers always split into digits and any corpus string round-trips.
class Tokenizer {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kSep = 2;
    static constexpr int kEos = 3;

    Tokenizer();
    explicit Tokenizer(std::vector<std::string> vocab);

    /// Vocabulary over questions, answers and OCR texts of the scenes.
    static Tokenizer build(const std::vector<ChartScene>& scenes);

    std::vector<int> encode(std::string_view text) const;
    std::string decode(const std::vector<int>& ids) const;

    int size() const { return static_cast<int>(vocab_.size()); }
    const std::vector<std::string>& vocab() const { return vocab_; }
    int id_of(std::string_view piece) const;

private:
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, int> index_;
};

}  // namespace chartgcl
