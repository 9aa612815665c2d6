#include "cream/transport.hpp"

#include <thread>

#include <httplib.h>

namespace cream {

ParsedUrl parse_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw TransportFailure("endpoint is not a URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

json post_json(const std::string& url, const json& body, const TransportOptions& options) {
    const auto parsed = parse_url(url);
    httplib::Client client(parsed.base);
    client.set_connection_timeout(options.timeout);
    client.set_read_timeout(options.timeout);
    httplib::Headers headers;
    for (const auto& [k, v] : options.headers) headers.emplace(k, v);

    const std::string payload = body.dump();
    auto backoff = options.initial_backoff;
    std::string last_error = "no attempt made";
    int last_status = 0;
    for (int attempt = 0; attempt < std::max(1, options.attempts); ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        auto res = client.Post(parsed.path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            last_status = 0;
            continue;
        }
        if (res->status >= 500) {
            last_error = "server error " + std::to_string(res->status) + ": " + res->body;
            last_status = res->status;
            continue;
        }
        if (res->status >= 400) {
            throw TransportFailure("request rejected " + std::to_string(res->status) + ": " + res->body,
                                   res->status);
        }
        try {
            return json::parse(res->body);
        } catch (const json::parse_error& e) {
            throw TransportFailure(std::string("malformed response body: ") + e.what(), res->status);
        }
    }
    throw TransportFailure(last_error, last_status);
}

}  // namespace cream
