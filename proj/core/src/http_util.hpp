// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "chartgcl/common.hpp"

#include <string>

namespace chartgcl::detail {

// "http://host:8080/v1/embed" -> {"http://host:8080", "/v1/embed"}
struct SplitUrl {
    std::string origin;
    std::string path;
};

inline SplitUrl split_url(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) throw Error("endpoint '" + url + "' lacks a scheme (http:// or https://)");
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace chartgcl::detail
