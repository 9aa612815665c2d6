#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "cream/config.hpp"
#include "cream/generator.hpp"
#include "cream/run_log.hpp"
#include "cream/scorer.hpp"
#include "cream/tournament.hpp"

namespace httplib {
class Server;
}

namespace cream {

/// Shared state behind the CLI and the /v1 service: configuration, the
/// cached generator, the current scorer and the paraphraser. The scorer is
/// swapped atomically on reload; readers keep whatever instance they grabbed.
class Engine {
public:
    explicit Engine(EngineConfig config, const EnvLookup& env = process_env());

    const EngineConfig& config() const { return config_; }
    Generator& generator() { return *generator_; }
    RunLog& run_log() { return run_log_; }

    /// Null when no model is loaded.
    std::shared_ptr<Scorer> scorer() const;
    void set_scorer(std::shared_ptr<Scorer> scorer, AssemblyMode mode);
    /// Re-reads the configured scorer (for `linear`, the model file). Returns
    /// false when the model file does not exist.
    bool reload_scorer();
    AssemblyMode mode() const;

    std::shared_ptr<Paraphraser> paraphraser() const;
    void set_paraphraser(std::shared_ptr<Paraphraser> paraphraser);

    /// Explanation for `text` from the configured explainer, via the cache.
    std::string explain(const std::string& text);

    /// {t1_text, t2_text, with_explanations?} -> {p_t1, verdict, mode, assembled_text, explanations?}
    json assess(const json& request);
    /// {draft, n_candidates?, strategy?, check_order?} -> tournament projection
    json compose(const json& request);
    /// {text} or {texts: [...]}, optional {provider} -> {explanations: [...]}
    json explain_request(const json& request);
    json runs() const;
    json health() const;

private:
    std::shared_ptr<Scorer> require_scorer(AssemblyMode& mode) const;

    EngineConfig config_;
    std::shared_ptr<Generator> generator_;
    RunLog run_log_;
    mutable std::mutex mutex_;
    std::shared_ptr<Scorer> scorer_;
    AssemblyMode mode_;
    std::shared_ptr<Paraphraser> paraphraser_;
};

/// HTTP status for an engine error code.
int http_status(ErrorCode code);
/// {code, message, detail[, field, index]}
json error_body(const Error& e);

/// POST /v1/assess, /v1/compose, /v1/explain; GET /v1/runs, /v1/health.
/// assess and compose append a RunRecord whose outputs are stored as
/// content-addressed artifacts.
class Service {
public:
    explicit Service(Engine& engine);
    ~Service();

    /// Binds (port 0 picks a free port) and serves on a background thread.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    /// Serves on the calling thread until stop().
    void listen(const std::string& host, int port);
    void stop();

private:
    void install_routes();

    Engine& engine_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
};

}  // namespace cream
