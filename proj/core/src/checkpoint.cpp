// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartgcl/promptfuse.hpp"

#include <array>
#include <cstring>
#include <fstream>

namespace chartgcl {
namespace {

constexpr std::array<char, 8> kMagic = {'C', 'G', 'C', 'L', 'C', 'K', 'P', '1'};
constexpr int kFormatVersion = 1;

void put_u64(std::ostream& os, std::uint64_t v) {
    std::array<char, 8> b{};
    for (int i = 0; i < 8; ++i) b[std::size_t(i)] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b.data(), b.size());
}

std::uint64_t get_u64(std::istream& is) {
    std::array<unsigned char, 8> b{};
    is.read(reinterpret_cast<char*>(b.data()), b.size());
    if (!is) throw LoadError("checkpoint truncated in header length");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[std::size_t(i)];
    return v;
}

void put_f32(std::ostream& os, double value) {
    const auto f = static_cast<float>(value);
    std::uint32_t bits = 0;
    std::memcpy(&bits, &f, sizeof bits);
    std::array<char, 4> b{};
    for (int i = 0; i < 4; ++i) b[std::size_t(i)] = static_cast<char>((bits >> (8 * i)) & 0xff);
    os.write(b.data(), b.size());
}

}  // namespace

void save_checkpoint(const GraphPromptModel& model, const std::filesystem::path& path) {
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& e : model.params().entries()) {
        tensors.push_back({{"name", e.name}, {"rows", e.var->value.rows()}, {"cols", e.var->value.cols()}});
    }
    const nlohmann::json header = {
        {"format", "chartgcl-checkpoint"},
        {"version", kFormatVersion},
        {"dtype", "float32"},
        {"layout", "row-major"},
        {"model_config", to_json(model.config())},
        {"vocab", model.tokenizer().vocab()},
        {"tensors", tensors},
    };
    const std::string text = header.dump();

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write checkpoint " + path.string());
    os.write(kMagic.data(), kMagic.size());
    put_u64(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& e : model.params().entries()) {
        const Matrix& m = e.var->value;
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) put_f32(os, m(r, c));
        }
    }
    if (!os) throw Error("failed writing checkpoint " + path.string());
}

GraphPromptModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw LoadError("cannot open checkpoint " + path.string());
    std::array<char, 8> magic{};
    is.read(magic.data(), magic.size());
    if (!is || magic != kMagic) throw LoadError(path.string() + " is not a chartgcl checkpoint");
    const std::uint64_t header_len = get_u64(is);
    if (header_len > (std::uint64_t{1} << 30)) throw LoadError("checkpoint header length is implausible");
    std::string text(header_len, '\0');
    is.read(text.data(), static_cast<std::streamsize>(header_len));
    if (!is) throw LoadError("checkpoint truncated in header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("checkpoint header: ") + e.what());
    }
    if (header.value("format", "") != "chartgcl-checkpoint" || header.value("version", 0) != kFormatVersion) {
        throw LoadError("unsupported checkpoint format or version");
    }
    GraphPromptModel model(model_config_from_json(header.at("model_config")),
                           Tokenizer(header.at("vocab").get<std::vector<std::string>>()), 0);

    const auto& entries = model.params().entries();
    const auto& table = header.at("tensors");
    if (table.size() != entries.size()) {
        throw LoadError("checkpoint has " + std::to_string(table.size()) + " tensors, model expects " +
                        std::to_string(entries.size()));
    }
    std::vector<unsigned char> buf;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& t = table[i];
        Matrix& m = entries[i].var->value;
        if (t.at("name").get<std::string>() != entries[i].name || t.at("rows").get<Eigen::Index>() != m.rows() ||
            t.at("cols").get<Eigen::Index>() != m.cols()) {
            throw LoadError("checkpoint tensor " + std::to_string(i) + " ('" + t.at("name").get<std::string>() +
                            "') does not match model parameter '" + entries[i].name + "'");
        }
        buf.resize(std::size_t(m.size()) * 4);
        is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!is) throw LoadError("checkpoint truncated in tensor '" + entries[i].name + "'");
        std::size_t k = 0;
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c, k += 4) {
                const std::uint32_t bits = std::uint32_t(buf[k]) | (std::uint32_t(buf[k + 1]) << 8) |
                                           (std::uint32_t(buf[k + 2]) << 16) | (std::uint32_t(buf[k + 3]) << 24);
                float f = 0;
                std::memcpy(&f, &bits, sizeof f);
                m(r, c) = f;
            }
        }
    }
    if (is.peek() != std::char_traits<char>::eof()) throw LoadError("checkpoint has trailing bytes");
    return model;
}

}  // namespace chartgcl
