// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartgcl/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace chartgcl {

namespace {

const std::vector<std::string> kSpecials = {"[PAD]", "[UNK]", "[SEP]", "[EOS]"};

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::string current;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!current.empty()) words.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

bool has_digit(std::string_view w) {
    return std::any_of(w.begin(), w.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

// Trailing punctuation is split off so "Apple?" shares the "Apple" token.
std::string strip_punct(const std::string& w) {
    std::size_t end = w.size();
    while (end > 0 && std::ispunct(static_cast<unsigned char>(w[end - 1]))) --end;
    return w.substr(0, end);
}

}  // namespace

Tokenizer::Tokenizer() : Tokenizer(kSpecials) {}

Tokenizer::Tokenizer(std::vector<std::string> vocab) : vocab_(std::move(vocab)) {
    if (vocab_.size() < kSpecials.size() || !std::equal(kSpecials.begin(), kSpecials.end(), vocab_.begin())) {
        throw Error("tokenizer vocabulary must start with the special tokens");
    }
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
        if (!index_.emplace(vocab_[i], static_cast<int>(i)).second) {
            throw Error("duplicate vocabulary entry '" + vocab_[i] + "'");
        }
    }
}

Tokenizer Tokenizer::build(const std::vector<ChartScene>& scenes) {
    std::set<std::string> words;
    std::set<char> chars;
    const auto visit = [&](std::string_view text) {
        for (const auto& w : split_words(text)) {
            for (char c : w) chars.insert(c);
            const std::string core = strip_punct(w);
            if (!core.empty() && !has_digit(core)) words.insert(core);
        }
    };
    for (const auto& s : scenes) {
        for (const auto& q : s.qa) {
            visit(q.question);
            visit(q.answer);
        }
        for (const auto& o : s.objects) {
            for (const auto& t : o.ocr_texts) visit(t);
        }
    }
    for (char c = '0'; c <= '9'; ++c) chars.insert(c);
    chars.insert('.');
    chars.insert('-');

    std::vector<std::string> vocab = kSpecials;
    std::set<std::string> seen(vocab.begin(), vocab.end());
    const auto push = [&](std::string piece) {
        if (seen.insert(piece).second) vocab.push_back(std::move(piece));
    };
    for (const auto& w : words) push(w);
    for (char c : chars) push(std::string(1, c));
    for (char c : chars) push("##" + std::string(1, c));
    return Tokenizer(std::move(vocab));
}

int Tokenizer::id_of(std::string_view piece) const {
    const auto it = index_.find(std::string(piece));
    return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
    std::vector<int> ids;
    for (const auto& word : split_words(text)) {
        std::size_t start = 0;
        while (start < word.size()) {
            std::size_t end = word.size();
            int found = -1;
            while (end > start) {
                std::string piece = word.substr(start, end - start);
                if (start > 0) piece = "##" + piece;
                const auto it = index_.find(piece);
                if (it != index_.end()) {
                    found = it->second;
                    break;
                }
                --end;
            }
            if (found < 0) {
                ids.push_back(kUnk);
                ++start;
            } else {
                ids.push_back(found);
                start = end;
            }
        }
    }
    return ids;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        if (id == kPad || id == kSep) continue;
        if (id == kEos) break;
        if (id < 0 || id >= size()) continue;
        const std::string& piece = vocab_[std::size_t(id)];
        if (piece.rfind("##", 0) == 0) {
            out += piece.substr(2);
        } else {
            if (!out.empty()) out += ' ';
            out += id == kUnk ? "[UNK]" : piece;
        }
    }
    return out;
}

}  // namespace chartgcl
