#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cream/eval.hpp"
#include "cream/generator.hpp"
#include "cream/pairing.hpp"
#include "cream/scorer.hpp"
#include "cream/tournament.hpp"

namespace cream {

/// Everything the CLI and the service need. Precedence: file < environment
/// overrides < command-line flags (flags are applied by the caller).
struct EngineConfig {
    std::string reference_timezone = "America/New_York";
    std::vector<std::string> topic_vocabulary = TopicVocabulary::default_labels();
    PairingConfig pairing;
    std::string split_date = "2022-05-01";
    TrainConfig train;
    AssemblyMode assembly_mode = AssemblyMode::PairPlusExplanations;

    std::map<std::string, ProviderRef> providers;
    /// Provider used for Type-2 explanations.
    std::string explainer = "stub";
    /// Empty (topics must be pre-annotated), `fixture:<path>` or a URL.
    std::string tagger;
    /// `stub`, `replay:<path>` or a URL.
    std::string paraphraser = "stub";
    ParaphraseConfig paraphrase;
    /// `linear` (model_path), `replay:<path>` or a URL.
    std::string scorer = "linear";

    std::filesystem::path cache_dir = ".cream/cache";
    std::filesystem::path model_path = ".cream/model.bin";
    std::filesystem::path state_dir = ".cream";
    std::size_t parallelism = 4;

    BucketSpec buckets;
    std::size_t significance_iterations = 10000;
    std::uint64_t significance_seed = 0;

    EngineConfig();

    /// Relative paths (including `replay:`/`fixture:` endpoints) resolve against `base_dir`.
    static EngineConfig from_json(const json& j, const std::filesystem::path& base_dir = {});
    json to_json() const;
    /// SHA-256 of the canonical JSON form.
    std::string digest() const;
    void validate() const;

    const ProviderRef& provider(const std::string& name) const;
    IngestConfig ingest_config(bool strict = false) const;
    TimeZone timezone() const { return TimeZone::load(reference_timezone); }
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

/// Applies CREAM_CACHE_DIR, CREAM_MODEL_PATH, CREAM_STATE_DIR, CREAM_TIMEZONE,
/// CREAM_EXPLAINER, CREAM_SCORER and CREAM_PARAPHRASER.
void apply_env_overrides(EngineConfig& config, const EnvLookup& env);

/// Reads `path` (or $CREAM_CONFIG when empty; defaults when neither is set)
/// and applies environment overrides.
EngineConfig load_engine_config(const std::optional<std::filesystem::path>& path, const EnvLookup& env);

/// Transport options for a provider, with a bearer token taken from
/// CREAM_PROVIDER_TOKEN_<NAME> when present.
TransportOptions provider_transport(const std::string& provider_name, const EnvLookup& env);

}  // namespace cream
