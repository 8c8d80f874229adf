#pragma once

#include <chrono>
#include <functional>
#include <string>

namespace grapher {

struct HttpReply {
    int status = 0;
    std::string body;
};

/// Sends one JSON POST body and returns the reply. Throws TransportError when no reply
/// could be obtained at all (connection refused, timeout).
using HttpPost = std::function<HttpReply(const std::string& body)>;

/// POST client for `url` (http:// or, when built with OpenSSL, https://). A non-empty
/// `bearer_token` is sent as `Authorization: Bearer <token>`.
HttpPost make_http_post(const std::string& url, const std::string& bearer_token = {},
                        std::chrono::seconds timeout = std::chrono::seconds(60));

/// Value of an environment variable, or empty.
std::string env_or_empty(const char* name);

}  // namespace grapher
