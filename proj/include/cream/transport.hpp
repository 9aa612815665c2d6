#pragma once

#include <chrono>
#include <map>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace cream {

using json = nlohmann::json;

/// Raised by post_json when no usable response was obtained.
class TransportFailure : public std::runtime_error {
public:
    TransportFailure(std::string message, int status = 0)
        : std::runtime_error(std::move(message)), status_(status) {}
    /// HTTP status when the server answered, 0 for connection-level failures.
    int status() const noexcept { return status_; }

private:
    int status_;
};

struct TransportOptions {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{100};
    std::chrono::seconds timeout{30};
    std::map<std::string, std::string> headers;
};

/// POSTs a JSON body to an `http://host[:port]/path` URL and returns the parsed
/// JSON reply. Connection errors and 5xx replies are retried with exponential
/// backoff; 4xx replies fail immediately.
json post_json(const std::string& url, const json& body, const TransportOptions& options = {});

/// Splits an endpoint URL into scheme+authority and path.
struct ParsedUrl {
    std::string base;
    std::string path;
};
ParsedUrl parse_url(const std::string& url);

}  // namespace cream
