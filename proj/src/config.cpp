#include "cream/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>

#include "cream/hashing.hpp"

namespace cream {

namespace {

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return base / p;
}

std::string resolve_endpoint(const std::string& endpoint, const std::filesystem::path& base) {
    for (const char* prefix : {"replay:", "fixture:"}) {
        const std::string_view pre(prefix);
        if (endpoint.starts_with(pre)) {
            return std::string(pre) + resolve(endpoint.substr(pre.size()), base).string();
        }
    }
    return endpoint;
}

ProviderRef default_stub_provider() {
    ProviderRef r;
    r.provider_id = "stub";
    r.model_id = "echo";
    r.endpoint = "stub";
    return r;
}

}  // namespace

EngineConfig::EngineConfig() { providers.emplace("stub", default_stub_provider()); }

EngineConfig EngineConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
    EngineConfig c;
    try {
        c.reference_timezone = j.value("reference_timezone", c.reference_timezone);
        c.topic_vocabulary = j.value("topic_vocabulary", c.topic_vocabulary);
        if (j.contains("pairing")) c.pairing = PairingConfig::from_json(j["pairing"]);
        c.split_date = j.value("split_date", c.split_date);
        if (j.contains("train")) c.train = TrainConfig::from_json(j["train"]);
        if (j.contains("assembly_mode")) c.assembly_mode = parse_assembly_mode(j["assembly_mode"].get<std::string>());
        if (j.contains("providers")) {
            for (auto it = j["providers"].begin(); it != j["providers"].end(); ++it) {
                json p = it.value();
                if (!p.contains("provider_id")) p["provider_id"] = it.key();
                auto ref = ProviderRef::from_json(p);
                ref.endpoint = resolve_endpoint(ref.endpoint, base_dir);
                c.providers[it.key()] = ref;
            }
        }
        c.explainer = j.value("explainer", c.explainer);
        c.tagger = resolve_endpoint(j.value("tagger", c.tagger), base_dir);
        c.paraphraser = resolve_endpoint(j.value("paraphraser", c.paraphraser), base_dir);
        if (j.contains("paraphrase")) c.paraphrase = ParaphraseConfig::from_json(j["paraphrase"]);
        c.scorer = resolve_endpoint(j.value("scorer", c.scorer), base_dir);
        c.cache_dir = resolve(j.value("cache_dir", c.cache_dir.string()), base_dir);
        c.model_path = resolve(j.value("model_path", c.model_path.string()), base_dir);
        c.state_dir = resolve(j.value("state_dir", c.state_dir.string()), base_dir);
        c.parallelism = j.value("parallelism", c.parallelism);
        if (j.contains("buckets")) c.buckets.boundaries = j["buckets"].get<std::vector<double>>();
        c.significance_iterations = j.value("significance_iterations", c.significance_iterations);
        c.significance_seed = j.value("significance_seed", c.significance_seed);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("malformed engine config: ") + e.what());
    }
    c.validate();
    return c;
}

json EngineConfig::to_json() const {
    json providers_json = json::object();
    for (const auto& [name, ref] : providers) providers_json[name] = ref.to_json();
    return {{"reference_timezone", reference_timezone},
            {"topic_vocabulary", topic_vocabulary},
            {"pairing", pairing.to_json()},
            {"split_date", split_date},
            {"train", train.to_json()},
            {"assembly_mode", std::string(to_string(assembly_mode))},
            {"providers", providers_json},
            {"explainer", explainer},
            {"tagger", tagger},
            {"paraphraser", paraphraser},
            {"paraphrase", paraphrase.to_json()},
            {"scorer", scorer},
            {"cache_dir", cache_dir.string()},
            {"model_path", model_path.string()},
            {"state_dir", state_dir.string()},
            {"parallelism", parallelism},
            {"buckets", buckets.boundaries},
            {"significance_iterations", significance_iterations},
            {"significance_seed", significance_seed}};
}

std::string EngineConfig::digest() const { return sha256_hex(to_json().dump()); }

void EngineConfig::validate() const {
    TimeZone::load(reference_timezone);
    if (!parse_date(split_date)) throw Error(ErrorCode::InvalidConfig, "split_date must be YYYY-MM-DD");
    if (topic_vocabulary.empty()) throw Error(ErrorCode::InvalidConfig, "topic_vocabulary must not be empty");
    pairing.validate();
    train.validate();
    paraphrase.validate();
    buckets.validate();
    std::vector<std::string> ids;
    for (const auto& [name, ref] : providers) {
        ref.validate();
        ids.push_back(ref.provider_id);
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
        throw Error(ErrorCode::InvalidConfig, "provider ids must be unique");
    }
    if (parallelism == 0) throw Error(ErrorCode::InvalidConfig, "parallelism must be >= 1");
}

const ProviderRef& EngineConfig::provider(const std::string& name) const {
    auto it = providers.find(name);
    if (it == providers.end()) throw Error(ErrorCode::InvalidConfig, "no provider named '" + name + "'");
    return it->second;
}

IngestConfig EngineConfig::ingest_config(bool strict) const {
    IngestConfig ic;
    ic.reference_timezone = TimeZone::load(reference_timezone);
    ic.vocabulary = TopicVocabulary(topic_vocabulary);
    ic.strict = strict;
    return ic;
}

EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        if (const char* v = std::getenv(name.c_str())) return std::string(v);
        return std::nullopt;
    };
}

void apply_env_overrides(EngineConfig& config, const EnvLookup& env) {
    if (auto v = env("CREAM_CACHE_DIR")) config.cache_dir = *v;
    if (auto v = env("CREAM_MODEL_PATH")) config.model_path = *v;
    if (auto v = env("CREAM_STATE_DIR")) config.state_dir = *v;
    if (auto v = env("CREAM_TIMEZONE")) config.reference_timezone = *v;
    if (auto v = env("CREAM_EXPLAINER")) config.explainer = *v;
    if (auto v = env("CREAM_SCORER")) config.scorer = *v;
    if (auto v = env("CREAM_PARAPHRASER")) config.paraphraser = *v;
}

EngineConfig load_engine_config(const std::optional<std::filesystem::path>& path, const EnvLookup& env) {
    std::optional<std::filesystem::path> file = path;
    if (!file) {
        if (auto v = env("CREAM_CONFIG")) file = *v;
    }
    EngineConfig config;
    if (file) {
        std::ifstream in(*file);
        if (!in) throw Error(ErrorCode::Io, "cannot open config " + file->string());
        json j;
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw Error(ErrorCode::InvalidConfig, "config " + file->string() + ": " + e.what());
        }
        config = EngineConfig::from_json(j, file->parent_path());
    }
    apply_env_overrides(config, env);
    config.validate();
    return config;
}

TransportOptions provider_transport(const std::string& provider_name, const EnvLookup& env) {
    TransportOptions options;
    std::string key = "CREAM_PROVIDER_TOKEN_";
    for (char c : provider_name) key.push_back(std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : '_');
    if (auto token = env(key)) options.headers["Authorization"] = "Bearer " + *token;
    return options;
}

}  // namespace cream
