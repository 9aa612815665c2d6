#include "cream/engine.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>

#include "cream/hashing.hpp"

namespace cream {

namespace {

std::string require_text(const json& request, const char* field) {
    if (!request.contains(field)) {
        throw Error(ErrorCode::ValidationError, std::string("missing field '") + field + "'").at(field);
    }
    const auto& v = request[field];
    if (!v.is_string()) throw Error(ErrorCode::ValidationError, std::string("'") + field + "' must be a string").at(field);
    auto s = v.get<std::string>();
    if (std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); })) {
        throw Error(ErrorCode::ValidationError, std::string("'") + field + "' must not be empty").at(field);
    }
    return s;
}

std::shared_ptr<Scorer> build_scorer(const EngineConfig& config, AssemblyMode& mode) {
    const auto& s = config.scorer;
    mode = config.assembly_mode;
    if (s == "linear") {
        if (!std::filesystem::exists(config.model_path)) return nullptr;
        auto model = std::make_shared<const PairwiseModel>(PairwiseModel::load(config.model_path));
        mode = model->mode;
        return std::make_shared<LinearScorer>(model);
    }
    if (s.starts_with("replay:")) return ReplayScorer::from_file(s.substr(7));
    if (s.starts_with("http://") || s.starts_with("https://")) return std::make_shared<RemoteScorer>(s);
    throw Error(ErrorCode::InvalidConfig, "unsupported scorer '" + s + "'");
}

}  // namespace

Engine::Engine(EngineConfig config, const EnvLookup& env)
    : config_(std::move(config)),
      generator_(std::make_shared<Generator>(std::make_shared<ResponseCache>(config_.cache_dir), config_.parallelism)),
      run_log_(config_.state_dir),
      mode_(config_.assembly_mode) {
    config_.validate();
    for (const auto& [name, ref] : config_.providers) {
        generator_->register_provider(ref.provider_id, make_provider(ref, provider_transport(name, env)));
    }
    paraphraser_ = make_paraphraser(config_.paraphraser);
    reload_scorer();
}

std::shared_ptr<Scorer> Engine::scorer() const {
    std::lock_guard lock(mutex_);
    return scorer_;
}

AssemblyMode Engine::mode() const {
    std::lock_guard lock(mutex_);
    return mode_;
}

void Engine::set_scorer(std::shared_ptr<Scorer> scorer, AssemblyMode mode) {
    std::lock_guard lock(mutex_);
    scorer_ = std::move(scorer);
    mode_ = mode;
}

bool Engine::reload_scorer() {
    AssemblyMode mode;
    auto s = build_scorer(config_, mode);
    if (!s) return false;
    set_scorer(std::move(s), mode);
    return true;
}

std::shared_ptr<Paraphraser> Engine::paraphraser() const {
    std::lock_guard lock(mutex_);
    return paraphraser_;
}

void Engine::set_paraphraser(std::shared_ptr<Paraphraser> paraphraser) {
    std::lock_guard lock(mutex_);
    paraphraser_ = std::move(paraphraser);
}

std::shared_ptr<Scorer> Engine::require_scorer(AssemblyMode& mode) const {
    std::lock_guard lock(mutex_);
    if (!scorer_) {
        throw Error(ErrorCode::ModelNotLoaded, "no model loaded", "expected " + config_.model_path.string());
    }
    mode = mode_;
    return scorer_;
}

std::string Engine::explain(const std::string& text) {
    return generator_->explain_text(text, config_.provider(config_.explainer)).text;
}

json Engine::assess(const json& request) {
    if (!request.is_object()) throw Error(ErrorCode::ValidationError, "request body must be an object");
    const auto t1 = require_text(request, "t1_text");
    const auto t2 = require_text(request, "t2_text");
    bool with_explanations = false;
    if (request.contains("with_explanations")) {
        if (!request["with_explanations"].is_boolean()) {
            throw Error(ErrorCode::ValidationError, "'with_explanations' must be a boolean").at("with_explanations");
        }
        with_explanations = request["with_explanations"].get<bool>();
    }
    AssemblyMode mode;
    auto scorer = require_scorer(mode);

    PairTexts texts{t1, t2, std::nullopt, std::nullopt};
    const bool fetch = with_explanations || needs_explanations(mode);
    if (fetch) {
        auto batch = generator_->explain_batch({{"t1", t1}, {"t2", t2}}, config_.provider(config_.explainer));
        texts.e1 = batch[0].text;
        texts.e2 = batch[1].text;
    }
    const auto scored = scorer->predict(texts, mode);
    json reply{{"p_t1", scored.p_t1},
               {"verdict", scored.verdict ? "t1" : "t2"},
               {"t1_wins", scored.verdict},
               {"mode", std::string(to_string(mode))},
               {"assembled_text", scored.assembled.text}};
    if (fetch) reply["explanations"] = {{"t1", *texts.e1}, {"t2", *texts.e2}};
    return reply;
}

json Engine::compose(const json& request) {
    if (!request.is_object()) throw Error(ErrorCode::ValidationError, "request body must be an object");
    if (!request.contains("draft") || !request["draft"].is_string()) {
        throw Error(ErrorCode::ValidationError, "missing string field 'draft'").at("draft");
    }
    const auto draft = request["draft"].get<std::string>();
    ParaphraseConfig pc = config_.paraphrase;
    if (request.contains("n_candidates")) {
        const auto& n = request["n_candidates"];
        if (!n.is_number_integer() || n.get<int>() < 1) {
            throw Error(ErrorCode::ValidationError, "'n_candidates' must be a positive integer").at("n_candidates");
        }
        pc.num_return_sequences = n.get<int>();
    }
    auto strategy = TournamentStrategy::Champion;
    if (request.contains("strategy")) {
        const auto name = request["strategy"].is_string() ? request["strategy"].get<std::string>() : std::string();
        if (name == "round_robin") strategy = TournamentStrategy::RoundRobin;
        else if (name != "champion") throw Error(ErrorCode::ValidationError, "unknown strategy").at("strategy");
    }
    bool check_order = false;
    if (request.contains("check_order")) {
        if (!request["check_order"].is_boolean()) {
            throw Error(ErrorCode::ValidationError, "'check_order' must be a boolean").at("check_order");
        }
        check_order = request["check_order"].get<bool>();
    }
    if (std::all_of(draft.begin(), draft.end(), [](unsigned char c) { return std::isspace(c); })) {
        throw Error(ErrorCode::EmptyDraft, "draft is empty").at("draft");
    }
    AssemblyMode mode;
    auto scorer = require_scorer(mode);
    auto candidates = generate_candidates(draft, *paraphraser(), pc);
    auto result = select_best(candidates, *scorer, [this](const std::string& t) { return explain(t); }, mode, strategy);
    json reply = result.to_json();
    reply["mode"] = std::string(to_string(mode));
    reply["draft"] = draft;
    if (check_order) {
        // The scorer need not be transitive, so the winner can depend on candidate order.
        std::vector<std::string> reversed(candidates.rbegin(), candidates.rend());
        const auto again = select_best(reversed, *scorer, [this](const std::string& t) { return explain(t); }, mode, strategy);
        reply["order_check"] = {{"reversed_winner", again.winner}, {"order_sensitive", again.winner != result.winner}};
    }
    return reply;
}

json Engine::explain_request(const json& request) {
    if (!request.is_object()) throw Error(ErrorCode::ValidationError, "request body must be an object");
    std::vector<std::pair<std::string, std::string>> items;
    if (request.contains("texts")) {
        if (!request["texts"].is_array() || request["texts"].empty()) {
            throw Error(ErrorCode::ValidationError, "'texts' must be a non-empty array").at("texts");
        }
        for (std::size_t i = 0; i < request["texts"].size(); ++i) {
            const auto& t = request["texts"][i];
            if (!t.is_string() || t.get<std::string>().empty()) {
                throw Error(ErrorCode::ValidationError, "'texts' entries must be non-empty strings").at("texts", i);
            }
            items.emplace_back(std::to_string(i), t.get<std::string>());
        }
    } else {
        items.emplace_back("0", require_text(request, "text"));
    }
    const std::string name = request.value("provider", config_.explainer);
    if (!config_.providers.count(name)) {
        throw Error(ErrorCode::ValidationError, "unknown provider '" + name + "'").at("provider");
    }
    const auto& ref = config_.provider(name);
    auto batch = generator_->explain_batch(items, ref);
    json out = json::array();
    for (std::size_t i = 0; i < batch.size(); ++i) {
        out.push_back({{"text", items[i].second},
                       {"explanation", batch[i].text},
                       {"prompt_digest", batch[i].prompt_digest},
                       {"provider_id", ref.provider_id},
                       {"model_id", ref.model_id}});
    }
    return {{"explanations", out}};
}

json Engine::runs() const {
    json out = json::array();
    for (const auto& r : run_log_.list()) out.push_back(r.to_json());
    return {{"runs", out}};
}

json Engine::health() const {
    const bool loaded = scorer() != nullptr;
    return {{"status", loaded ? "ok" : "degraded"},
            {"model_loaded", loaded},
            {"scorer", config_.scorer},
            {"mode", std::string(to_string(mode()))},
            {"explainer", config_.explainer},
            {"paraphraser", config_.paraphraser},
            {"config_digest", config_.digest()}};
}

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::ValidationError:
        case ErrorCode::EmptyDraft:
        case ErrorCode::EmptyText:
        case ErrorCode::MissingExplanation:
        case ErrorCode::EmptyCandidateList:
            return 400;
        case ErrorCode::Conflict:
            return 409;
        case ErrorCode::ProviderUnavailable:
        case ErrorCode::ProviderRefusal:
        case ErrorCode::EmptyResponse:
        case ErrorCode::ParaphraserUnavailable:
        case ErrorCode::RemoteScorerUnavailable:
            return 502;
        case ErrorCode::ModelNotLoaded:
            return 503;
        default:
            return 500;
    }
}

json error_body(const Error& e) {
    json j{{"code", std::string(to_string(e.code()))}, {"message", e.what()}, {"detail", e.detail()}};
    if (e.field()) j["field"] = *e.field();
    if (e.index()) j["index"] = *e.index();
    return j;
}

Service::Service(Engine& engine) : engine_(engine), server_(std::make_unique<httplib::Server>()) { install_routes(); }

Service::~Service() { stop(); }

void Service::install_routes() {
    auto send = [](httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    };
    auto guarded = [this, send](auto handler, std::string kind) {
        return [this, send, handler, kind](const httplib::Request& req, httplib::Response& res) {
            std::optional<RunRecord> run;
            try {
                json body;
                if (req.method == "POST") {
                    try {
                        body = json::parse(req.body.empty() ? std::string("{}") : req.body);
                    } catch (const json::parse_error& e) {
                        throw Error(ErrorCode::ValidationError, "request body is not valid JSON", e.what());
                    }
                }
                if (!kind.empty()) run = engine_.run_log().begin(kind, engine_.config().digest(), sha256_hex(body.dump()));
                json reply = handler(body);
                if (run) {
                    const auto text = reply.dump();
                    const auto dir = engine_.config().state_dir / "artifacts";
                    run->outputs_digest = store_artifact(dir, text);
                    run->outputs_location = (dir / (run->outputs_digest + ".json")).string();
                    run->status = RunStatus::Succeeded;
                    engine_.run_log().finish(*run);
                    reply["run_id"] = run->run_id;
                }
                send(res, 200, reply);
            } catch (const Error& e) {
                if (run) {
                    run->status = RunStatus::Failed;
                    run->error = std::string(to_string(e.code())) + ": " + e.what();
                    engine_.run_log().finish(*run);
                }
                send(res, http_status(e.code()), error_body(e));
            } catch (const std::exception& e) {
                if (run) {
                    run->status = RunStatus::Failed;
                    run->error = e.what();
                    engine_.run_log().finish(*run);
                }
                send(res, 500, {{"code", "Internal"}, {"message", e.what()}, {"detail", ""}});
            }
        };
    };
    server_->Post("/v1/assess", guarded([this](const json& b) { return engine_.assess(b); }, "assess"));
    server_->Post("/v1/compose", guarded([this](const json& b) { return engine_.compose(b); }, "compose"));
    server_->Post("/v1/explain", guarded([this](const json& b) { return engine_.explain_request(b); }, ""));
    server_->Get("/v1/runs", guarded([this](const json&) { return engine_.runs(); }, ""));
    server_->Get("/v1/health", guarded([this](const json&) { return engine_.health(); }, ""));
}

int Service::start(const std::string& host, int port) {
    int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return bound;
}

void Service::listen(const std::string& host, int port) {
    if (!server_->listen(host, port)) throw Error(ErrorCode::Io, "cannot listen on " + host + ":" + std::to_string(port));
}

void Service::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace cream
