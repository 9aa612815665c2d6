#include "cream/generator.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <thread>

#include "cream/hashing.hpp"

namespace cream {

namespace {

constexpr std::string_view kEngagingQuestion = "Why is the following text so engaging?";
constexpr std::string_view kCompletionCue = "The text is engaging because";

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::string first_words(std::string_view text, int n) {
    std::istringstream is{std::string(text)};
    std::string word, out;
    for (int i = 0; i < n && is >> word; ++i) {
        if (!out.empty()) out += ' ';
        out += word;
    }
    return out;
}

}  // namespace

void ProviderRef::validate() const {
    if (provider_id.empty()) throw Error(ErrorCode::InvalidConfig, "provider_id must be non-empty");
    if (max_response_tokens <= 0) throw Error(ErrorCode::InvalidConfig, "max_response_tokens must be > 0");
}

json ProviderRef::to_json() const {
    return {{"provider_id", provider_id},
            {"model_id", model_id},
            {"max_response_tokens", max_response_tokens},
            {"endpoint", endpoint},
            {"completion_stub", completion_stub}};
}

ProviderRef ProviderRef::from_json(const json& j) {
    ProviderRef r;
    r.provider_id = j.value("provider_id", std::string());
    r.model_id = j.value("model_id", std::string());
    r.max_response_tokens = j.value("max_response_tokens", r.max_response_tokens);
    r.endpoint = j.value("endpoint", r.endpoint);
    r.completion_stub = j.value("completion_stub", r.completion_stub);
    r.validate();
    return r;
}

std::string render_compare_prompt(std::string_view t1_text, std::string_view t2_text) {
    if (blank(t1_text) || blank(t2_text)) throw Error(ErrorCode::EmptyText, "comparison texts must be non-empty");
    std::string out;
    out.append("text-1: ").append(t1_text).append("\n");
    out.append("text-2: ").append(t2_text).append("\n");
    out.append("Will text-1 receive more reactions than text-2. Answer me with \"yes\", \"no\", just one word.");
    return out;
}

std::string render_engaging_prompt(std::string_view text, bool with_completion_stub) {
    if (blank(text)) throw Error(ErrorCode::EmptyText, "text must be non-empty");
    std::string out;
    out.append(kEngagingQuestion).append("\nText: ").append(text);
    if (with_completion_stub) out.append("\n").append(kCompletionCue);
    return out;
}

Verdict parse_verdict(std::string_view raw) {
    Verdict v;
    v.raw = std::string(raw);
    std::size_t i = 0;
    while (i < raw.size() && !std::isalpha(static_cast<unsigned char>(raw[i]))) ++i;
    std::string token;
    while (i < raw.size() && std::isalpha(static_cast<unsigned char>(raw[i]))) {
        token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(raw[i]))));
        ++i;
    }
    if (token == "yes") v.t1_wins = true;
    else if (token == "no") v.t1_wins = false;
    return v;
}

std::string prompt_digest(std::string_view provider_id, std::string_view model_id, std::string_view prompt) {
    return digest_fields({provider_id, model_id, prompt});
}

std::shared_ptr<StubProvider> StubProvider::echo(std::string compare_answer) {
    return std::make_shared<StubProvider>([answer = std::move(compare_answer)](const ProviderRequest& req) {
        std::string_view prompt = req.prompt;
        if (prompt.starts_with(kEngagingQuestion)) {
            const auto at = prompt.find("\nText: ");
            auto rest = prompt.substr(at + 7);
            rest = rest.substr(0, rest.find('\n'));
            return "mentions " + first_words(rest, 3);
        }
        return answer;
    });
}

std::string StubProvider::complete(const ProviderRequest& request) {
    ++calls_;
    return fn_(request);
}

std::shared_ptr<ReplayProvider> ReplayProvider::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open provider replay file " + path.string());
    std::map<std::string, std::string> table;
    try {
        const json j = json::parse(in);
        for (const auto& row : j.at("responses")) {
            table[row.at("prompt").get<std::string>()] = row.at("text").get<std::string>();
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, "malformed provider replay file " + path.string() + ": " + e.what());
    }
    return std::make_shared<ReplayProvider>(std::move(table));
}

std::string ReplayProvider::complete(const ProviderRequest& request) {
    auto it = responses_.find(request.prompt);
    if (it == responses_.end()) throw Error(ErrorCode::ProviderUnavailable, "no recorded response for prompt");
    return it->second;
}

HttpProvider::HttpProvider(std::string url, TransportOptions options)
    : url_(std::move(url)), options_(std::move(options)) {}

std::string HttpProvider::complete(const ProviderRequest& request) {
    json reply;
    try {
        reply = post_json(url_, {{"model_id", request.model_id}, {"prompt", request.prompt}, {"max_tokens", request.max_tokens}},
                          options_);
    } catch (const TransportFailure& e) {
        throw Error(ErrorCode::ProviderUnavailable, e.what());
    }
    if (reply.contains("refusal") && reply["refusal"].is_string()) {
        throw Error(ErrorCode::ProviderRefusal, "provider refused the prompt", reply["refusal"].get<std::string>());
    }
    if (!reply.contains("text") || !reply["text"].is_string()) {
        throw Error(ErrorCode::ProviderUnavailable, "provider reply lacks 'text'", reply.dump());
    }
    return reply["text"].get<std::string>();
}

std::shared_ptr<Provider> make_provider(const ProviderRef& ref, TransportOptions options) {
    if (ref.endpoint == "stub") return StubProvider::echo();
    if (ref.endpoint.starts_with("replay:")) return ReplayProvider::from_file(ref.endpoint.substr(7));
    if (ref.endpoint.starts_with("http://") || ref.endpoint.starts_with("https://")) {
        return std::make_shared<HttpProvider>(ref.endpoint, std::move(options));
    }
    throw Error(ErrorCode::InvalidConfig, "unsupported provider endpoint '" + ref.endpoint + "'");
}

ResponseCache::ResponseCache(std::filesystem::path directory) : directory_(std::move(directory)) {
    if (!directory_.empty()) std::filesystem::create_directories(directory_);
}

std::optional<CacheEntry> ResponseCache::get(const std::string& digest) const {
    std::lock_guard lock(mutex_);
    if (auto it = memory_.find(digest); it != memory_.end()) return it->second;
    if (directory_.empty()) return std::nullopt;

    const auto body_path = directory_ / (digest + ".response");
    const auto meta_path = directory_ / (digest + ".meta.json");
    std::ifstream body(body_path, std::ios::binary);
    std::ifstream meta(meta_path);
    if (!body || !meta) return std::nullopt;
    CacheEntry e;
    e.digest = digest;
    e.response.assign(std::istreambuf_iterator<char>(body), {});
    try {
        const json m = json::parse(meta);
        e.provider_id = m.at("provider_id").get<std::string>();
        e.model_id = m.at("model_id").get<std::string>();
        e.created_at = parse_rfc3339(m.at("created_at").get<std::string>()).value_or(Instant{});
    } catch (const json::exception&) {
        return std::nullopt;
    }
    memory_[digest] = e;
    return e;
}

CacheEntry ResponseCache::put(const CacheEntry& entry) {
    if (auto existing = get(entry.digest)) return *existing;
    std::lock_guard lock(mutex_);
    if (!directory_.empty()) {
        namespace fs = std::filesystem;
        const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
        auto write_atomic = [&](const fs::path& final_path, const std::string& bytes) {
            const fs::path tmp = final_path.string() + ".tmp." + std::to_string(tid);
            {
                std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
                if (!out) throw Error(ErrorCode::Io, "cannot write cache file " + tmp.string());
                out << bytes;
            }
            fs::rename(tmp, final_path);
        };
        const json meta = {{"digest", entry.digest},
                           {"provider_id", entry.provider_id},
                           {"model_id", entry.model_id},
                           {"created_at", format_rfc3339_utc(entry.created_at)}};
        // Body first: an entry is visible only once its sidecar exists.
        write_atomic(directory_ / (entry.digest + ".response"), entry.response);
        write_atomic(directory_ / (entry.digest + ".meta.json"), meta.dump(2) + "\n");
    }
    memory_[entry.digest] = entry;
    return entry;
}

Generator::Generator(std::shared_ptr<ResponseCache> cache, std::size_t parallelism)
    : cache_(cache ? std::move(cache) : std::make_shared<ResponseCache>()), parallelism_(std::max<std::size_t>(1, parallelism)) {}

void Generator::register_provider(const std::string& provider_id, std::shared_ptr<Provider> provider) {
    std::lock_guard lock(mutex_);
    providers_[provider_id] = std::move(provider);
}

bool Generator::has_provider(const std::string& provider_id) const {
    std::lock_guard lock(mutex_);
    return providers_.count(provider_id) > 0;
}

std::shared_ptr<Provider> Generator::provider_for(const ProviderRef& ref) {
    std::lock_guard lock(mutex_);
    auto& slot = providers_[ref.provider_id];
    if (!slot) slot = make_provider(ref);
    return slot;
}

CacheEntry Generator::complete(const std::string& prompt, const ProviderRef& ref) {
    ref.validate();
    const auto digest = prompt_digest(ref.provider_id, ref.model_id, prompt);
    if (auto hit = cache_->get(digest)) return *hit;

    std::promise<CacheEntry> promise;
    std::shared_future<CacheEntry> future;
    bool owner = false;
    {
        std::lock_guard lock(mutex_);
        if (auto it = in_flight_.find(digest); it != in_flight_.end()) {
            future = it->second;
        } else {
            future = promise.get_future().share();
            in_flight_.emplace(digest, future);
            owner = true;
        }
    }
    if (!owner) return future.get();

    try {
        // Another caller may have finished between the cache probe and registration.
        if (auto hit = cache_->get(digest)) {
            promise.set_value(*hit);
        } else {
            auto provider = provider_for(ref);
            std::string response;
            {
                std::unique_lock slots(slots_mutex_);
                slots_cv_.wait(slots, [&] { return active_ < parallelism_; });
                ++active_;
            }
            try {
                ++requests_;
                response = provider->complete({ref.model_id, prompt, ref.max_response_tokens});
            } catch (...) {
                std::lock_guard slots(slots_mutex_);
                --active_;
                slots_cv_.notify_one();
                throw;
            }
            {
                std::lock_guard slots(slots_mutex_);
                --active_;
                slots_cv_.notify_one();
            }
            if (blank(response)) {
                throw Error(ErrorCode::EmptyResponse, "provider '" + ref.provider_id + "' returned an empty response");
            }
            promise.set_value(cache_->put({digest, response, ref.provider_id, ref.model_id, now_instant()}));
        }
    } catch (...) {
        promise.set_exception(std::current_exception());
    }
    {
        std::lock_guard lock(mutex_);
        in_flight_.erase(digest);
    }
    return future.get();
}

Explanation Generator::explain(const Tweet& tweet, const ProviderRef& provider) {
    return explain_text(tweet.text, provider, tweet.id);
}

Explanation Generator::explain_text(const std::string& text, const ProviderRef& provider, std::string tweet_id) {
    const auto prompt = render_engaging_prompt(text, provider.completion_stub);
    auto entry = complete(prompt, provider);
    return {std::move(tweet_id), entry.response, provider, entry.digest, entry.created_at};
}

std::vector<Explanation> Generator::explain_batch(const std::vector<std::pair<std::string, std::string>>& id_and_text,
                                                  const ProviderRef& provider) {
    std::vector<std::future<Explanation>> futures;
    futures.reserve(id_and_text.size());
    std::vector<Explanation> out;
    out.reserve(id_and_text.size());
    // Launch in windows of `parallelism_`; the slot gate bounds provider concurrency anyway.
    for (std::size_t start = 0; start < id_and_text.size(); start += parallelism_) {
        const auto end = std::min(id_and_text.size(), start + parallelism_);
        for (std::size_t i = start; i < end; ++i) {
            futures.push_back(std::async(std::launch::async, [this, &id_and_text, &provider, i] {
                return explain_text(id_and_text[i].second, provider, id_and_text[i].first);
            }));
        }
        for (std::size_t i = start; i < end; ++i) out.push_back(futures[i].get());
    }
    return out;
}

Verdict Generator::zero_shot_compare(const Tweet& t1, const Tweet& t2, const ProviderRef& provider) {
    const auto prompt = render_compare_prompt(t1.text, t2.text);
    try {
        return parse_verdict(complete(prompt, provider).response);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::ProviderRefusal) throw;
        Verdict v;
        v.raw = e.detail().empty() ? std::string(e.what()) : e.detail();
        return v;
    }
}

}  // namespace cream
