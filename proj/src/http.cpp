#include "grapher/http.hpp"

#include <cstdlib>

#include <httplib.h>

#include "grapher/errors.hpp"

namespace grapher {

namespace {

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

ParsedUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("endpoint must be an absolute http(s) URL: '" + url + "'");
    }
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpPost make_http_post(const std::string& url, const std::string& bearer_token,
                        std::chrono::seconds timeout) {
    auto parsed = split_url(url);
    if (!httplib::Client(parsed.origin).is_valid()) {
        throw ConfigError("unsupported endpoint (https requires OpenSSL): '" + url + "'");
    }
    httplib::Headers headers;
    if (!bearer_token.empty()) {
        headers.emplace("Authorization", "Bearer " + bearer_token);
    }
    // A client per request: calls may come from several extractor threads at once.
    return [origin = parsed.origin, path = parsed.path, headers, timeout,
            url](const std::string& body) {
        httplib::Client client(origin);
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        auto result = client.Post(path, headers, body, "application/json");
        if (!result) {
            throw TransportError("POST " + url + " failed: " + httplib::to_string(result.error()));
        }
        return HttpReply{result->status, result->body};
    };
}

std::string env_or_empty(const char* name) {
    const char* value = std::getenv(name);
    return value ? std::string(value) : std::string();
}

}  // namespace grapher
