#include "cream/tournament.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

namespace cream {

void ParaphraseConfig::validate() const {
    if (num_return_sequences < 1) throw Error(ErrorCode::InvalidConfig, "num_return_sequences must be >= 1");
    if (num_beams < 1 || num_beam_groups < 1 || max_length < 1) {
        throw Error(ErrorCode::InvalidConfig, "beam settings and max_length must be >= 1");
    }
    if (temperature < 0 || repetition_penalty < 0 || diversity_penalty < 0 || no_repeat_ngram_size < 0) {
        throw Error(ErrorCode::InvalidConfig, "temperature and penalties must be >= 0");
    }
}

json ParaphraseConfig::to_json() const {
    return {{"num_return_sequences", num_return_sequences},
            {"num_beams", num_beams},
            {"max_length", max_length},
            {"temperature", temperature},
            {"num_beam_groups", num_beam_groups},
            {"repetition_penalty", repetition_penalty},
            {"diversity_penalty", diversity_penalty},
            {"no_repeat_ngram_size", no_repeat_ngram_size}};
}

ParaphraseConfig ParaphraseConfig::from_json(const json& j) {
    ParaphraseConfig c;
    c.num_return_sequences = j.value("num_return_sequences", c.num_return_sequences);
    c.num_beams = j.value("num_beams", c.num_beams);
    c.max_length = j.value("max_length", c.max_length);
    c.temperature = j.value("temperature", c.temperature);
    c.num_beam_groups = j.value("num_beam_groups", c.num_beam_groups);
    c.repetition_penalty = j.value("repetition_penalty", c.repetition_penalty);
    c.diversity_penalty = j.value("diversity_penalty", c.diversity_penalty);
    c.no_repeat_ngram_size = j.value("no_repeat_ngram_size", c.no_repeat_ngram_size);
    c.validate();
    return c;
}

HttpParaphraser::HttpParaphraser(std::string url, TransportOptions options)
    : url_(std::move(url)), options_(std::move(options)) {}

std::vector<std::string> HttpParaphraser::paraphrase(const std::string& text, const ParaphraseConfig& config) {
    json req = config.to_json();
    req["text"] = text;
    json reply;
    try {
        reply = post_json(url_, req, options_);
    } catch (const TransportFailure& e) {
        throw Error(ErrorCode::ParaphraserUnavailable, e.what());
    }
    if (!reply.contains("paraphrases") || !reply["paraphrases"].is_array()) {
        throw Error(ErrorCode::ParaphraserUnavailable, "paraphraser reply lacks 'paraphrases'", reply.dump());
    }
    std::vector<std::string> out;
    for (const auto& p : reply["paraphrases"]) {
        if (!p.is_string()) throw Error(ErrorCode::ParaphraserUnavailable, "non-string paraphrase in reply");
        out.push_back(p.get<std::string>());
    }
    return out;
}

std::shared_ptr<ReplayParaphraser> ReplayParaphraser::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open paraphraser replay file " + path.string());
    std::map<std::string, std::vector<std::string>> table;
    try {
        const json j = json::parse(in);
        for (const auto& row : j.at("recordings")) {
            table[row.at("text").get<std::string>()] = row.at("paraphrases").get<std::vector<std::string>>();
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, "malformed paraphraser replay file " + path.string() + ": " + e.what());
    }
    return std::make_shared<ReplayParaphraser>(std::move(table));
}

std::vector<std::string> ReplayParaphraser::paraphrase(const std::string& text, const ParaphraseConfig&) {
    auto it = table_.find(text);
    if (it == table_.end()) throw Error(ErrorCode::ParaphraserUnavailable, "no recorded paraphrases for this draft");
    return it->second;
}

std::shared_ptr<Paraphraser> make_paraphraser(const std::string& endpoint, TransportOptions options) {
    if (endpoint == "stub") {
        return std::make_shared<FunctionParaphraser>(
            [](const std::string&, const ParaphraseConfig&) { return std::vector<std::string>{}; });
    }
    if (endpoint.starts_with("replay:")) return ReplayParaphraser::from_file(endpoint.substr(7));
    if (endpoint.starts_with("http://") || endpoint.starts_with("https://")) {
        return std::make_shared<HttpParaphraser>(endpoint, std::move(options));
    }
    throw Error(ErrorCode::InvalidConfig, "unsupported paraphraser endpoint '" + endpoint + "'");
}

std::vector<std::string> generate_candidates(const std::string& draft, Paraphraser& paraphraser,
                                             const ParaphraseConfig& config) {
    config.validate();
    if (std::all_of(draft.begin(), draft.end(), [](unsigned char c) { return std::isspace(c); })) {
        throw Error(ErrorCode::EmptyDraft, "draft is empty");
    }
    auto raw = paraphraser.paraphrase(draft, config);
    std::vector<std::string> out{draft};
    std::set<std::string> seen{draft};
    for (auto& p : raw) {
        if (out.size() > static_cast<std::size_t>(config.num_return_sequences)) break;
        if (p.empty() || !seen.insert(p).second) continue;
        out.push_back(std::move(p));
    }
    return out;
}

json TournamentResult::to_json() const {
    json comps = json::array();
    for (const auto& c : comparisons) {
        comps.push_back({{"first", c.first},
                         {"second", c.second},
                         {"p_first", c.scored.p_t1},
                         {"first_wins", c.scored.verdict},
                         {"mode", std::string(to_string(c.scored.assembled.mode))}});
    }
    json expl = json::object();
    for (const auto& [i, e] : explanations) expl[std::to_string(i)] = e;
    return {{"winner", winner},
            {"winner_index", winner_index},
            {"candidates", candidates},
            {"comparisons", comps},
            {"champion_path", champion_path},
            {"explanations", expl}};
}

TournamentResult select_best(const std::vector<std::string>& candidates, Scorer& scorer,
                             const ExplanationSource& explanations, AssemblyMode mode, TournamentStrategy strategy) {
    if (candidates.empty()) throw Error(ErrorCode::EmptyCandidateList, "no candidates to compare");
    TournamentResult r;
    r.candidates = candidates;

    if (needs_explanations(mode)) {
        if (!explanations) throw Error(ErrorCode::MissingExplanation, "assembly mode needs an explanation source");
        if (candidates.size() > 1) {
            for (std::size_t i = 0; i < candidates.size(); ++i) r.explanations[i] = explanations(candidates[i]);
        }
    }

    auto compare = [&](std::size_t a, std::size_t b) -> const Comparison& {
        PairTexts texts{candidates[a], candidates[b], std::nullopt, std::nullopt};
        if (needs_explanations(mode)) {
            texts.e1 = r.explanations.at(a);
            texts.e2 = r.explanations.at(b);
        }
        try {
            r.comparisons.push_back({a, b, scorer.predict(texts, mode)});
        } catch (const Error& e) {
            throw TournamentError(e, r.comparisons);
        }
        return r.comparisons.back();
    };

    if (strategy == TournamentStrategy::Champion) {
        std::size_t champion = 0;
        r.champion_path.push_back(0);
        for (std::size_t c = 1; c < candidates.size(); ++c) {
            const auto& cmp = compare(champion, c);
            if (cmp.scored.p_t1 < 0.5) {
                champion = c;
                r.champion_path.push_back(c);
            }
        }
        r.winner_index = champion;
    } else {
        std::vector<std::size_t> wins(candidates.size(), 0);
        for (std::size_t a = 0; a < candidates.size(); ++a) {
            for (std::size_t b = a + 1; b < candidates.size(); ++b) {
                const auto& cmp = compare(a, b);
                ++wins[cmp.scored.p_t1 < 0.5 ? b : a];
            }
        }
        r.winner_index = static_cast<std::size_t>(std::max_element(wins.begin(), wins.end()) - wins.begin());
        r.champion_path.push_back(0);
        if (r.winner_index != 0) r.champion_path.push_back(r.winner_index);
    }
    r.winner = candidates[r.winner_index];
    return r;
}

}  // namespace cream
