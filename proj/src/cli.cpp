#include "cream/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "cream/engine.hpp"
#include "cream/eval.hpp"
#include "cream/hashing.hpp"
#include "cream/run_log.hpp"

namespace cream {

namespace fs = std::filesystem;

int exit_code(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingField:
        case ErrorCode::MalformedTimestamp:
        case ErrorCode::NegativeCount:
        case ErrorCode::EmptyText:
        case ErrorCode::InvalidField:
        case ErrorCode::MalformedRecord:
        case ErrorCode::DuplicateId:
        case ErrorCode::UnknownTopic:
        case ErrorCode::MissingAnnotation:
        case ErrorCode::InvalidConfig:
        case ErrorCode::MissingExplanation:
        case ErrorCode::EmptyTrainingSet:
        case ErrorCode::ModelFormat:
        case ErrorCode::EmptyDraft:
        case ErrorCode::EmptyCandidateList:
        case ErrorCode::LengthMismatch:
        case ErrorCode::EmptySet:
        case ErrorCode::ValidationError:
        case ErrorCode::Io:
            return 3;
        case ErrorCode::TaggerUnavailable:
        case ErrorCode::ProviderUnavailable:
        case ErrorCode::ProviderRefusal:
        case ErrorCode::EmptyResponse:
        case ErrorCode::RemoteScorerUnavailable:
        case ErrorCode::ParaphraserUnavailable:
            return 4;
        case ErrorCode::UnmatchedPairId:
        case ErrorCode::MissingPrediction:
        case ErrorCode::CoverageMismatch:
            return 5;
        case ErrorCode::ModelNotLoaded:
            return 6;
        case ErrorCode::Conflict:
            return 7;
    }
    return 1;
}

ExplanationMap read_explanations(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open explanations file " + path.string());
    try {
        return json::parse(in).get<ExplanationMap>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedRecord, "explanations file " + path.string() + ": " + e.what());
    }
}

void write_explanations(const fs::path& path, const ExplanationMap& explanations) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << json(explanations).dump(2) << '\n';
}

namespace {

struct Outputs {
    std::string location;
    std::string digest;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << text;
}

std::string file_digest_or_empty(const std::string& path) {
    if (path.empty()) return {};
    if (!fs::exists(path)) throw Error(ErrorCode::Io, "no such file: " + path);
    return sha256_file(path);
}

std::vector<std::pair<std::string, std::string>> unique_tweets(const std::vector<LabeledPair>& pairs) {
    std::map<std::string, std::string> by_id;
    for (const auto& p : pairs) {
        by_id.emplace(p.t1.id, p.t1.text);
        by_id.emplace(p.t2.id, p.t2.text);
    }
    return {by_id.begin(), by_id.end()};
}

ExplanationMap generate_explanations(Engine& engine, const std::vector<LabeledPair>& pairs, const std::string& provider) {
    const auto items = unique_tweets(pairs);
    const auto batch = engine.generator().explain_batch(items, engine.config().provider(provider));
    ExplanationMap out;
    for (std::size_t i = 0; i < items.size(); ++i) out[items[i].first] = batch[i].text;
    return out;
}

std::unique_ptr<TopicTagger> make_tagger(const std::string& endpoint) {
    if (endpoint.starts_with("fixture:")) {
        return std::make_unique<FixtureTagger>(FixtureTagger::from_file(endpoint.substr(8)));
    }
    if (endpoint.starts_with("http://") || endpoint.starts_with("https://")) {
        return std::make_unique<HttpTagger>(endpoint);
    }
    throw Error(ErrorCode::InvalidConfig, "unsupported tagger endpoint '" + endpoint + "'");
}

bool non_empty_dir(const std::string& location) {
    std::error_code ec;
    if (location.empty() || !fs::exists(location, ec)) return false;
    if (!fs::is_directory(location, ec)) return true;
    return fs::directory_iterator(location, ec) != fs::directory_iterator();
}

}  // namespace

namespace {

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const EnvLookup& env) {
    CLI::App app{"Crowd reaction assessment: dataset builder, pairwise scorer and paraphrase tournament", "cream"};
    app.require_subcommand(1);

    std::string config_path, state_dir, cache_dir, model_path, timezone;
    app.add_option("--config", config_path, "Engine config JSON (default: $CREAM_CONFIG)");
    app.add_option("--state-dir", state_dir, "Run log and artifact directory");
    app.add_option("--cache-dir", cache_dir, "Provider response cache");
    app.add_option("--model", model_path, "Model file");
    app.add_option("--timezone", timezone, "Reference IANA time zone");

    // cred build
    auto* cred = app.add_subcommand("cred", "Dataset construction");
    cred->require_subcommand(1);
    auto* build = cred->add_subcommand("build", "Ingest, annotate, pair, split and summarize a tweet dump");
    std::string tweets_path, out_dir, tagger, split_date;
    std::optional<std::uint64_t> seed;
    bool strict = false;
    build->add_option("--tweets", tweets_path, "Line-delimited tweet records")->required();
    build->add_option("--out", out_dir, "Output directory")->required();
    build->add_option("--tagger", tagger, "Topic tagger endpoint (fixture:<path> or URL)");
    build->add_option("--split-date", split_date, "First local date of the validation split");
    build->add_option("--seed", seed, "Presentation-order seed");
    build->add_flag("--strict", strict, "Abort on the first malformed record");

    auto* ggea = app.add_subcommand("ggea", "Generator-guided pairwise scorer");
    ggea->require_subcommand(1);

    // ggea explain
    auto* explain = ggea->add_subcommand("explain", "Generate and cache explanations for every tweet in a pairs file");
    std::string pairs_path, provider_name, out_path;
    explain->add_option("--pairs", pairs_path, "Pairs file")->required();
    explain->add_option("--provider", provider_name, "Provider name (default: configured explainer)");
    explain->add_option("--out", out_path, "Explanations JSON to write")->required();

    // ggea train
    auto* train_cmd = ggea->add_subcommand("train", "Fit the pairwise model");
    std::string train_path, explanations_path, mode_name;
    std::optional<int> epochs;
    std::optional<double> lr;
    train_cmd->add_option("--train", train_path, "Training pairs file")->required();
    train_cmd->add_option("--explanations", explanations_path, "Explanations JSON (generated when absent)");
    train_cmd->add_option("--mode", mode_name, "PAIR_ONLY, PAIR_PLUS_EXPLANATIONS or EXPLANATIONS_ONLY");
    train_cmd->add_option("--seed", seed, "Shuffle seed");
    train_cmd->add_option("--epochs", epochs);
    train_cmd->add_option("--lr", lr);
    train_cmd->add_option("--out", out_path, "Model path (default: configured model path)");

    // ggea predict
    auto* predict = ggea->add_subcommand("predict", "Write predictions for a pairs file");
    std::string system_id, constant;
    bool zero_shot = false;
    predict->add_option("--pairs", pairs_path, "Pairs file")->required();
    predict->add_option("--out", out_path, "Predictions file")->required();
    predict->add_option("--explanations", explanations_path, "Explanations JSON (generated when absent)");
    predict->add_option("--system-id", system_id);
    predict->add_flag("--zero-shot", zero_shot, "Ask the provider directly with the comparison prompt");
    predict->add_option("--provider", provider_name, "Provider for --zero-shot (default: configured explainer)");
    predict->add_option("--constant", constant, "Constant verdict baseline")->check(CLI::IsMember({"true", "false"}));

    // ggea eval
    auto* eval_cmd = ggea->add_subcommand("eval", "Accuracy, F1, per-topic and per-bucket report");
    std::string predictions_path, baseline_path;
    std::optional<std::size_t> iterations;
    eval_cmd->add_option("--pairs", pairs_path, "Gold pairs file")->required();
    eval_cmd->add_option("--predictions", predictions_path, "Predictions file")->required();
    eval_cmd->add_option("--baseline", baseline_path, "Baseline predictions for the significance test");
    eval_cmd->add_option("--out", out_dir, "Directory for report.txt and report.json");
    eval_cmd->add_option("--iterations", iterations);
    eval_cmd->add_option("--seed", seed);

    // ggea assess
    auto* assess = ggea->add_subcommand("assess", "Score one pair of texts");
    std::string t1, t2;
    bool with_explanations = false;
    assess->add_option("--t1", t1)->required();
    assess->add_option("--t2", t2)->required();
    assess->add_flag("--with-explanations", with_explanations);

    // compose
    auto* compose = app.add_subcommand("compose", "Paraphrase a draft and pick the candidate expected to do best");
    std::string draft, draft_file;
    std::optional<int> n_candidates;
    bool round_robin = false, check_order = false;
    compose->add_option("--draft", draft);
    compose->add_option("--draft-file", draft_file);
    compose->add_option("--n", n_candidates, "Paraphrases to request");
    compose->add_flag("--round-robin", round_robin, "Compare every pair instead of the champion sweep");
    compose->add_flag("--check-order", check_order, "Re-run on the reversed candidate list and report whether the winner changes");
    compose->add_option("--out", out_path, "Write the result JSON here as well");

    // serve
    auto* serve = app.add_subcommand("serve", "Run the /v1 HTTP service");
    std::string host = "127.0.0.1";
    int port = 8080;
    serve->add_option("--host", host);
    serve->add_option("--port", port);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(std::move(reversed));
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    EngineConfig config;
    try {
        std::optional<fs::path> cfg_path;
        if (!config_path.empty()) cfg_path = config_path;
        config = load_engine_config(cfg_path, env);
        if (!state_dir.empty()) config.state_dir = state_dir;
        if (!cache_dir.empty()) config.cache_dir = cache_dir;
        if (!model_path.empty()) config.model_path = model_path;
        if (!timezone.empty()) config.reference_timezone = timezone;
        config.validate();
    } catch (const Error& e) {
        err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return exit_code(e.code());
    }

    RunLog log(config.state_dir);
    std::unique_ptr<Engine> engine;
    auto get_engine = [&]() -> Engine& {
        if (!engine) engine = std::make_unique<Engine>(config, env);
        return *engine;
    };

    auto tracked = [&](const std::string& kind, const json& inputs, const std::string& location,
                       const std::function<Outputs()>& body) -> int {
        RunRecord run;
        try {
            run = log.begin(kind, config.digest(), sha256_hex(inputs.dump()));
        } catch (const Error& e) {
            err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
            return exit_code(e.code());
        }
        run.outputs_location = location;
        try {
            auto o = body();
            if (!o.location.empty()) run.outputs_location = o.location;
            run.outputs_digest = o.digest;
            run.status = RunStatus::Succeeded;
            log.finish(run);
            return 0;
        } catch (const Error& e) {
            run.status = RunStatus::Failed;
            run.error = std::string(to_string(e.code())) + ": " + e.what();
            run.partial_outputs = non_empty_dir(run.outputs_location);
            log.finish(run);
            err << "error: " << to_string(e.code()) << ": " << e.what();
            if (!e.detail().empty()) err << " (" << e.detail() << ')';
            err << '\n';
            return exit_code(e.code());
        } catch (const std::exception& e) {
            run.status = RunStatus::Failed;
            run.error = e.what();
            run.partial_outputs = non_empty_dir(run.outputs_location);
            log.finish(run);
            err << "error: " << e.what() << '\n';
            return 1;
        }
    };

    if (build->parsed()) {
        json inputs{{"tweets", file_digest_or_empty(tweets_path)},
                    {"tagger", tagger},
                    {"split_date", split_date},
                    {"seed", seed ? json(*seed) : json(nullptr)},
                    {"strict", strict}};
        return tracked("build", inputs, out_dir, [&]() -> Outputs {
            const auto ic = config.ingest_config(strict);
            auto ingest = ingest_file(tweets_path, ic);
            Corpus corpus = std::move(ingest.corpus);
            const std::string tagger_endpoint = tagger.empty() ? config.tagger : tagger;
            if (!tagger_endpoint.empty()) {
                auto t = make_tagger(tagger_endpoint);
                corpus = annotate_topics(corpus, *t, ic.vocabulary);
            }
            PairingConfig pc = config.pairing;
            if (seed) pc.order_seed = *seed;
            const auto pairs = build_pairs(corpus, pc);
            const auto date_text = split_date.empty() ? config.split_date : split_date;
            const auto date = parse_date(date_text);
            if (!date) throw Error(ErrorCode::InvalidConfig, "split date must be YYYY-MM-DD");
            const auto& tz = corpus.reference_timezone();
            const auto split = temporal_split(pairs, *date, tz);

            fs::create_directories(out_dir);
            const fs::path dir(out_dir);
            auto write_pair_file = [&](const char* name, const std::vector<LabeledPair>& ps) {
                std::ostringstream s;
                write_pairs(s, ps, tz);
                write_text(dir / name, s.str());
            };
            write_pair_file("pairs.jsonl", pairs);
            write_pair_file("train.jsonl", split.train);
            write_pair_file("valid.jsonl", split.valid);
            const auto stats = corpus_stats(pairs);
            write_text(dir / "stats.txt", stats.to_text());
            write_text(dir / "stats.json", stats.to_json().dump(2) + "\n");
            write_text(dir / "ingest_report.json", ingest.report.to_json().dump(2) + "\n");

            out << "accepted " << ingest.report.accepted << " of " << ingest.report.records_seen << " records; "
                << pairs.size() << " pairs (" << split.train.size() << " train, " << split.valid.size()
                << " valid)\n"
                << stats.to_text();
            return {out_dir, directory_digest(dir)};
        });
    }

    if (explain->parsed()) {
        json inputs{{"pairs", file_digest_or_empty(pairs_path)}, {"provider", provider_name}};
        return tracked("explain", inputs, out_path, [&]() -> Outputs {
            const auto pairs = read_pairs_file(pairs_path, config.ingest_config());
            auto& eng = get_engine();
            const auto before = eng.generator().provider_requests();
            const auto map = generate_explanations(eng, pairs, provider_name.empty() ? config.explainer : provider_name);
            write_explanations(out_path, map);
            out << map.size() << " explanations (" << eng.generator().provider_requests() - before
                << " provider requests)\n";
            return {out_path, sha256_file(out_path)};
        });
    }

    if (train_cmd->parsed()) {
        const std::string model_out = out_path.empty() ? config.model_path.string() : out_path;
        json inputs{{"train", file_digest_or_empty(train_path)},
                    {"explanations", file_digest_or_empty(explanations_path)},
                    {"mode", mode_name},
                    {"seed", seed ? json(*seed) : json(nullptr)},
                    {"epochs", epochs ? json(*epochs) : json(nullptr)},
                    {"lr", lr ? json(*lr) : json(nullptr)}};
        return tracked("train", inputs, model_out, [&]() -> Outputs {
            LockFile lock(config.state_dir / "train.lock", "train");
            const auto pairs = read_pairs_file(train_path, config.ingest_config());
            const AssemblyMode mode = mode_name.empty() ? config.assembly_mode : parse_assembly_mode(mode_name);
            ExplanationMap explanations;
            if (needs_explanations(mode)) {
                explanations = explanations_path.empty() ? generate_explanations(get_engine(), pairs, config.explainer)
                                                         : read_explanations(explanations_path);
            }
            TrainConfig tc = config.train;
            if (seed) tc.seed = *seed;
            if (epochs) tc.epochs = *epochs;
            if (lr) tc.learning_rate = *lr;
            const auto result = cream::train(pairs, explanations, tc, mode);
            result.model.save(model_out);
            json train_log{{"pairs", pairs.size()},
                           {"mode", std::string(to_string(mode))},
                           {"initial_loss", result.initial_loss},
                           {"epoch_loss", result.epoch_loss},
                           {"train_accuracy", result.train_accuracy}};
            write_text(model_out + ".train_log.json", train_log.dump(2) + "\n");
            out << "trained on " << pairs.size() << " pairs (" << to_string(mode) << "); loss "
                << result.initial_loss << " -> " << (result.epoch_loss.empty() ? result.initial_loss : result.epoch_loss.back())
                << "; train accuracy " << result.train_accuracy << '\n';
            return {model_out, sha256_file(model_out)};
        });
    }

    if (predict->parsed()) {
        json inputs{{"pairs", file_digest_or_empty(pairs_path)},
                    {"explanations", file_digest_or_empty(explanations_path)},
                    {"zero_shot", zero_shot},
                    {"constant", constant},
                    {"provider", provider_name},
                    {"model", zero_shot || !constant.empty() || !fs::exists(config.model_path)
                                  ? std::string()
                                  : sha256_file(config.model_path)}};
        return tracked("predict", inputs, out_path, [&]() -> Outputs {
            const auto pairs = read_pairs_file(pairs_path, config.ingest_config());
            PredictionSet set;
            if (!constant.empty()) {
                const bool v = constant == "true";
                set.system_id = system_id.empty() ? "constant-" + constant : system_id;
                for (const auto& p : pairs) set.entries.push_back({p.pair_id, v, std::nullopt});
            } else if (zero_shot) {
                auto& eng = get_engine();
                const auto& ref = config.provider(provider_name.empty() ? config.explainer : provider_name);
                set.system_id = system_id.empty() ? "zero-shot:" + ref.provider_id : system_id;
                for (const auto& p : pairs) {
                    const auto v = eng.generator().zero_shot_compare(p.t1, p.t2, ref);
                    if (v.abstained()) set.abstained.push_back(p.pair_id);
                    else set.entries.push_back({p.pair_id, *v.t1_wins, std::nullopt});
                }
            } else {
                auto& eng = get_engine();
                auto scorer = eng.scorer();
                if (!scorer) throw Error(ErrorCode::ModelNotLoaded, "no model at " + config.model_path.string());
                const auto mode = eng.mode();
                ExplanationMap explanations;
                if (needs_explanations(mode)) {
                    explanations = explanations_path.empty() ? generate_explanations(eng, pairs, config.explainer)
                                                             : read_explanations(explanations_path);
                }
                set.system_id = system_id.empty() ? "ggea" : system_id;
                for (const auto& p : pairs) {
                    PairTexts texts{p.t1.text, p.t2.text, std::nullopt, std::nullopt};
                    if (needs_explanations(mode)) {
                        auto e1 = explanations.find(p.t1.id), e2 = explanations.find(p.t2.id);
                        if (e1 == explanations.end() || e2 == explanations.end()) {
                            throw Error(ErrorCode::MissingExplanation, "no explanation for pair " + p.pair_id);
                        }
                        texts.e1 = e1->second;
                        texts.e2 = e2->second;
                    }
                    const auto scored = scorer->predict(texts, mode);
                    set.entries.push_back({p.pair_id, scored.verdict, scored.p_t1});
                }
            }
            if (fs::path(out_path).has_parent_path()) fs::create_directories(fs::path(out_path).parent_path());
            std::ofstream f(out_path, std::ios::trunc);
            if (!f) throw Error(ErrorCode::Io, "cannot write " + out_path);
            write_predictions(f, set);
            f.close();
            out << set.entries.size() << " predictions, " << set.abstained.size() << " abstained\n";
            return {out_path, sha256_file(out_path)};
        });
    }

    if (eval_cmd->parsed()) {
        json inputs{{"pairs", file_digest_or_empty(pairs_path)},
                    {"predictions", file_digest_or_empty(predictions_path)},
                    {"baseline", file_digest_or_empty(baseline_path)},
                    {"iterations", iterations ? json(*iterations) : json(nullptr)},
                    {"seed", seed ? json(*seed) : json(nullptr)}};
        return tracked("eval", inputs, out_dir, [&]() -> Outputs {
            const auto pairs = read_pairs_file(pairs_path, config.ingest_config());
            const auto preds = read_predictions_file(predictions_path);
            auto report = evaluate(preds, pairs, config.buckets, config.topic_vocabulary);
            if (!baseline_path.empty()) {
                const auto base = read_predictions_file(baseline_path);
                report.significance = significance(preds, base, pairs, iterations.value_or(config.significance_iterations),
                                                   seed.value_or(config.significance_seed));
            }
            const auto text = report.to_text();
            out << text;
            if (out_dir.empty()) return {{}, sha256_hex(report.to_json().dump())};
            fs::create_directories(out_dir);
            write_text(fs::path(out_dir) / "report.txt", text);
            write_text(fs::path(out_dir) / "report.json", report.to_json().dump(2) + "\n");
            return {out_dir, directory_digest(out_dir)};
        });
    }

    if (assess->parsed()) {
        json request{{"t1_text", t1}, {"t2_text", t2}, {"with_explanations", with_explanations}};
        return tracked("assess", request, {}, [&]() -> Outputs {
            const auto reply = get_engine().assess(request);
            const auto text = reply.dump(2);
            out << text << '\n';
            return {{}, sha256_hex(reply.dump())};
        });
    }

    if (compose->parsed()) {
        if (!draft_file.empty()) {
            std::ifstream f(draft_file);
            if (!f) {
                err << "error: cannot open " << draft_file << '\n';
                return 3;
            }
            draft.assign(std::istreambuf_iterator<char>(f), {});
            while (!draft.empty() && (draft.back() == '\n' || draft.back() == '\r')) draft.pop_back();
        }
        json request{{"draft", draft}, {"strategy", round_robin ? "round_robin" : "champion"}};
        if (n_candidates) request["n_candidates"] = *n_candidates;
        if (check_order) request["check_order"] = true;
        return tracked("compose", request, out_path, [&]() -> Outputs {
            const auto reply = get_engine().compose(request);
            const auto text = reply.dump(2);
            out << text << '\n';
            if (!out_path.empty()) {
                write_text(out_path, text + "\n");
                return {out_path, sha256_file(out_path)};
            }
            return {{}, sha256_hex(reply.dump())};
        });
    }

    if (serve->parsed()) {
        json inputs{{"host", host}, {"port", port}};
        return tracked("serve", inputs, {}, [&]() -> Outputs {
            Service service(get_engine());
            out << "serving /v1 on http://" << host << ':' << port << std::endl;
            service.listen(host, port);
            return {};
        });
    }

    err << app.help();
    return 2;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const EnvLookup& env) {
    try {
        return dispatch(args, out, err, env);
    } catch (const Error& e) {
        // Raised while hashing inputs, before a run record exists.
        err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return exit_code(e.code());
    }
}

}  // namespace cream
