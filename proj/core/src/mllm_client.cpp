// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartgcl/cot.hpp"

#include "http_util.hpp"

#include <httplib.h>
#include <openssl/evp.h>

namespace chartgcl {

std::string base64_encode(const std::vector<unsigned char>& bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(std::size_t(n));
    return out;
}

OpenAIChatClient::OpenAIChatClient(ChatClientConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.endpoint.empty()) throw Error("chat client needs an endpoint");
    if (cfg_.model.empty()) throw Error("chat client needs a model name");
    detail::split_url(cfg_.endpoint);
}

nlohmann::json OpenAIChatClient::request_body(const ImageData& image, const std::string& text) const {
    const std::string url = "data:" + image.media_type + ";base64," + base64_encode(image.bytes);
    return {
        {"model", cfg_.model},
        {"messages",
         nlohmann::json::array({{{"role", "user"},
                                 {"content", nlohmann::json::array({{{"type", "image_url"}, {"image_url", {{"url", url}}}},
                                                                    {{"type", "text"}, {"text", text}}})}}})},
        {"max_tokens", cfg_.max_tokens},
        {"temperature", cfg_.temperature},
    };
}

std::string OpenAIChatClient::ask(const ImageData& image, const std::string& text) {
    auto url = detail::split_url(cfg_.endpoint);
    while (url.path.size() > 1 && url.path.back() == '/') url.path.pop_back();
    const std::string path = (url.path == "/" ? std::string() : url.path) + "/chat/completions";

    httplib::Client client(url.origin);
    const auto timeout = std::chrono::duration<double>(cfg_.timeout_seconds);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    httplib::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

    const auto res = client.Post(path, headers, request_body(image, text).dump(), "application/json");
    if (!res) throw TransientError("chat request failed: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500) {
        throw TransientError("chat endpoint returned HTTP " + std::to_string(res->status));
    }
    if (res->status != 200) {
        throw Error("chat endpoint returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    }
    try {
        const auto j = nlohmann::json::parse(res->body);
        const auto& content = j.at("choices").at(0).at("message").at("content");
        if (content.is_string()) return content.get<std::string>();
        std::string joined;
        for (const auto& part : content) {
            if (part.value("type", "") == "text") joined += part.at("text").get<std::string>();
        }
        return joined;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed chat response: ") + e.what());
    }
}

}  // namespace chartgcl
