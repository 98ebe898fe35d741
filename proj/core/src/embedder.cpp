// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartgcl/encoders.hpp"

#include "http_util.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <mutex>
#include <unordered_map>

namespace chartgcl {

namespace {

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

Matrix Embedder::embed_all(const std::vector<std::string>& texts) {
    Matrix out(static_cast<Eigen::Index>(texts.size()), dim());
    for (std::size_t i = 0; i < texts.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = embed(texts[i]).transpose();
    return out;
}

Vector stub_embed(std::string_view text, int dim, std::uint64_t seed) {
    if (dim <= 0) throw Error("embedding dim must be positive");
    std::mt19937_64 rng(splitmix64(fnv1a(text) ^ splitmix64(seed)));
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector v(dim);
    for (int i = 0; i < dim; ++i) v[i] = normal(rng);
    const double norm = v.norm();
    // All-zero draw: fall back to e_0.
    if (norm == 0.0) {
        v.setZero();
        v[0] = 1.0;
        return v;
    }
    return v / norm;
}

StubEmbedder::StubEmbedder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim <= 0) throw Error("embedding dim must be positive");
}

struct HttpEmbedder::Impl {
    detail::SplitUrl url;
    double timeout = 30.0;
    std::mutex mu;
    std::unordered_map<std::string, Vector> cache;
};

HttpEmbedder::HttpEmbedder(std::string endpoint, int dim, double timeout_seconds)
    : impl_(std::make_unique<Impl>()), dim_(dim) {
    if (dim <= 0) throw Error("embedding dim must be positive");
    impl_->url = detail::split_url(endpoint);
    impl_->timeout = timeout_seconds;
}

HttpEmbedder::~HttpEmbedder() = default;

void HttpEmbedder::prefetch(const std::vector<std::string>& texts) {
    std::vector<std::string> missing;
    {
        std::lock_guard lock(impl_->mu);
        for (const auto& t : texts) {
            if (!impl_->cache.count(t)) missing.push_back(t);
        }
    }
    if (missing.empty()) return;

    httplib::Client client(impl_->url.origin);
    const auto secs = static_cast<time_t>(impl_->timeout);
    client.set_read_timeout(secs, 0);
    client.set_connection_timeout(secs, 0);
    const nlohmann::json request = {{"texts", missing}};
    auto res = client.Post(impl_->url.path, request.dump(), "application/json");
    if (!res) throw Error("encoder request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw Error("encoder returned HTTP " + std::to_string(res->status));
    const auto body = nlohmann::json::parse(res->body, nullptr, false);
    if (body.is_discarded() || !body.contains("vectors") || !body["vectors"].is_array() ||
        body["vectors"].size() != missing.size()) {
        throw Error("encoder response must carry one vector per text under 'vectors'");
    }
    std::lock_guard lock(impl_->mu);
    for (std::size_t i = 0; i < missing.size(); ++i) {
        const auto values = body["vectors"][i].get<std::vector<double>>();
        if (static_cast<int>(values.size()) != dim_) {
            throw Error("encoder returned width " + std::to_string(values.size()) + ", expected " + std::to_string(dim_));
        }
        impl_->cache.emplace(missing[i], Eigen::Map<const Vector>(values.data(), dim_));
    }
}

Vector HttpEmbedder::embed(std::string_view text) {
    const std::string key(text);
    {
        std::lock_guard lock(impl_->mu);
        if (auto it = impl_->cache.find(key); it != impl_->cache.end()) return it->second;
    }
    prefetch({key});
    std::lock_guard lock(impl_->mu);
    return impl_->cache.at(key);
}

}  // namespace chartgcl
