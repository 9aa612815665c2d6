#pragma once

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "cream/corpus.hpp"
#include "cream/transport.hpp"

namespace cream {

struct ProviderRef {
    std::string provider_id;
    std::string model_id;
    int max_response_tokens = 200;
    /// `stub`, `replay:<file>` or an http(s) URL.
    std::string endpoint = "stub";
    /// FLAN-style providers get the trailing completion cue in Type-2 prompts.
    bool completion_stub = false;

    void validate() const;
    json to_json() const;
    static ProviderRef from_json(const json& j);
};

struct Explanation {
    std::string tweet_id;
    std::string text;
    ProviderRef provider;
    std::string prompt_digest;
    Instant created_at;
};

/// Parsed answer to a Type-1 prompt; `t1_wins` is empty on abstention.
struct Verdict {
    std::optional<bool> t1_wins;
    std::string raw;

    bool abstained() const { return !t1_wins.has_value(); }
};

std::string render_compare_prompt(std::string_view t1_text, std::string_view t2_text);
std::string render_engaging_prompt(std::string_view text, bool with_completion_stub);
/// Never throws. Matches the first alphabetic token case-insensitively.
Verdict parse_verdict(std::string_view raw);

std::string prompt_digest(std::string_view provider_id, std::string_view model_id, std::string_view prompt);

struct ProviderRequest {
    std::string model_id;
    std::string prompt;
    int max_tokens = 200;
};

/// A generative backend. Implementations throw Error with ProviderUnavailable
/// for transport failures and ProviderRefusal when the model declines.
class Provider {
public:
    virtual ~Provider() = default;
    virtual std::string complete(const ProviderRequest& request) = 0;
};

class StubProvider : public Provider {
public:
    using Fn = std::function<std::string(const ProviderRequest&)>;
    explicit StubProvider(Fn fn) : fn_(std::move(fn)) {}

    /// Answers Type-2 prompts with "mentions <first three words>" and Type-1
    /// prompts with `compare_answer`.
    static std::shared_ptr<StubProvider> echo(std::string compare_answer = "yes");

    std::string complete(const ProviderRequest& request) override;
    std::size_t calls() const { return calls_.load(); }

private:
    Fn fn_;
    std::atomic<std::size_t> calls_{0};
};

/// Serves recorded responses keyed by prompt text. Unknown prompts fail with
/// ProviderUnavailable.
class ReplayProvider : public Provider {
public:
    explicit ReplayProvider(std::map<std::string, std::string> responses) : responses_(std::move(responses)) {}
    /// File: {"responses": [{"prompt": ..., "text": ...}, ...]}.
    static std::shared_ptr<ReplayProvider> from_file(const std::filesystem::path& path);
    std::string complete(const ProviderRequest& request) override;

private:
    std::map<std::string, std::string> responses_;
};

/// Wire format: request {model_id, prompt, max_tokens}; response {text} or
/// {refusal}.
class HttpProvider : public Provider {
public:
    explicit HttpProvider(std::string url, TransportOptions options = {});
    std::string complete(const ProviderRequest& request) override;

private:
    std::string url_;
    TransportOptions options_;
};

/// Builds a provider for the endpoint forms `stub`, `replay:<path>` and URLs.
std::shared_ptr<Provider> make_provider(const ProviderRef& ref, TransportOptions options = {});

struct CacheEntry {
    std::string digest;
    std::string response;
    std::string provider_id;
    std::string model_id;
    Instant created_at;
};

/// Content-addressed response store: `<digest>.response` holds the raw text,
/// `<digest>.meta.json` the provenance. Entries are write-once; writes go
/// through a temporary file and a rename. An empty directory path keeps the
/// cache in memory.
class ResponseCache {
public:
    ResponseCache() = default;
    explicit ResponseCache(std::filesystem::path directory);

    std::optional<CacheEntry> get(const std::string& digest) const;
    /// Stores unless present; returns the entry that ends up cached.
    CacheEntry put(const CacheEntry& entry);
    const std::filesystem::path& directory() const { return directory_; }

private:
    std::filesystem::path directory_;
    mutable std::mutex mutex_;
    mutable std::map<std::string, CacheEntry> memory_;
};

/// Routes prompts through the cache to registered providers. At most one
/// request per digest is in flight, and at most `parallelism` requests run
/// at once.
class Generator {
public:
    Generator(std::shared_ptr<ResponseCache> cache, std::size_t parallelism = 4);

    void register_provider(const std::string& provider_id, std::shared_ptr<Provider> provider);
    bool has_provider(const std::string& provider_id) const;

    Explanation explain(const Tweet& tweet, const ProviderRef& provider);
    Explanation explain_text(const std::string& text, const ProviderRef& provider, std::string tweet_id = {});
    /// Explains many texts concurrently; results are in input order.
    std::vector<Explanation> explain_batch(const std::vector<std::pair<std::string, std::string>>& id_and_text,
                                           const ProviderRef& provider);

    /// Type-1 comparison. A refusal is recorded as an abstaining verdict.
    Verdict zero_shot_compare(const Tweet& t1, const Tweet& t2, const ProviderRef& provider);

    /// Number of requests actually sent to providers.
    std::size_t provider_requests() const { return requests_.load(); }
    ResponseCache& cache() { return *cache_; }

private:
    CacheEntry complete(const std::string& prompt, const ProviderRef& provider);
    std::shared_ptr<Provider> provider_for(const ProviderRef& ref);

    std::shared_ptr<ResponseCache> cache_;
    std::size_t parallelism_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Provider>> providers_;
    std::map<std::string, std::shared_future<CacheEntry>> in_flight_;
    std::mutex slots_mutex_;
    std::condition_variable slots_cv_;
    std::size_t active_ = 0;
    std::atomic<std::size_t> requests_{0};
};

}  // namespace cream
