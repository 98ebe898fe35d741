// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartgcl/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace chartgcl {
namespace {

std::uint32_t crc32(const unsigned char* data, std::size_t n, std::uint32_t crc = 0) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    crc = ~crc;
    for (std::size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
    return ~crc;
}

void put_be32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<unsigned char>((v >> s) & 0xff));
}

void put_chunk(std::vector<unsigned char>& out, const char* type, const std::vector<unsigned char>& data) {
    put_be32(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    put_be32(out, crc32(out.data() + start, out.size() - start));
}

std::array<unsigned char, 3> class_colour(const std::string& cls) {
    if (cls == "title") return {40, 40, 40};
    if (cls == "axis-title") return {90, 90, 90};
    if (cls == "tick-label") return {140, 140, 140};
    if (cls == "bar") return {31, 119, 180};
    if (cls == "line-point") return {214, 39, 40};
    if (cls == "pie-slice") return {44, 160, 44};
    if (cls == "legend-item") return {255, 127, 14};
    return {148, 103, 189};
}

}  // namespace

std::vector<unsigned char> encode_png_rgb(int width, int height, const std::vector<unsigned char>& rgb) {
    if (width <= 0 || height <= 0 || rgb.size() != std::size_t(width) * std::size_t(height) * 3) {
        throw Error("encode_png_rgb: buffer does not match dimensions");
    }
    std::vector<unsigned char> raw;
    raw.reserve(std::size_t(height) * (std::size_t(width) * 3 + 1));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);
        const auto row = rgb.begin() + std::ptrdiff_t(y) * width * 3;
        raw.insert(raw.end(), row, row + std::ptrdiff_t(width) * 3);
    }

    std::vector<unsigned char> z = {0x78, 0x01};
    for (std::size_t pos = 0; pos < raw.size() || pos == 0;) {
        const std::size_t len = std::min<std::size_t>(65535, raw.size() - pos);
        const bool last = pos + len == raw.size();
        z.push_back(last ? 1 : 0);
        z.push_back(static_cast<unsigned char>(len & 0xff));
        z.push_back(static_cast<unsigned char>(len >> 8));
        z.push_back(static_cast<unsigned char>(~len & 0xff));
        z.push_back(static_cast<unsigned char>((~len >> 8) & 0xff));
        z.insert(z.end(), raw.begin() + std::ptrdiff_t(pos), raw.begin() + std::ptrdiff_t(pos + len));
        pos += len;
        if (last) break;
    }
    std::uint32_t a = 1, b = 0;
    for (unsigned char c : raw) {
        a = (a + c) % 65521;
        b = (b + a) % 65521;
    }
    put_be32(z, (b << 16) | a);

    std::vector<unsigned char> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::vector<unsigned char> ihdr;
    put_be32(ihdr, std::uint32_t(width));
    put_be32(ihdr, std::uint32_t(height));
    ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", z);
    put_chunk(out, "IEND", {});
    return out;
}

std::vector<unsigned char> render_scene_png(const ChartScene& scene) {
    const int w = scene.width, h = scene.height;
    std::vector<unsigned char> rgb(std::size_t(w) * std::size_t(h) * 3, 255);
    for (const auto& obj : scene.objects) {
        const auto colour = class_colour(obj.cls);
        // Points and hairlines get a 3 px footprint so they stay visible.
        const int x0 = std::clamp(int(std::floor(obj.bbox.x0)) - (obj.bbox.x1 - obj.bbox.x0 < 2 ? 1 : 0), 0, w - 1);
        const int x1 = std::clamp(int(std::ceil(obj.bbox.x1)) + (obj.bbox.x1 - obj.bbox.x0 < 2 ? 1 : 0), 0, w - 1);
        const int y0 = std::clamp(int(std::floor(obj.bbox.y0)) - (obj.bbox.y1 - obj.bbox.y0 < 2 ? 1 : 0), 0, h - 1);
        const int y1 = std::clamp(int(std::ceil(obj.bbox.y1)) + (obj.bbox.y1 - obj.bbox.y0 < 2 ? 1 : 0), 0, h - 1);
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                std::copy(colour.begin(), colour.end(), rgb.begin() + (std::ptrdiff_t(y) * w + x) * 3);
            }
        }
    }
    return encode_png_rgb(w, h, rgb);
}

}  // namespace chartgcl
