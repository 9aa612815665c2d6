#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cream/scorer.hpp"
#include "cream/transport.hpp"

namespace cream {

struct ParaphraseConfig {
    int num_return_sequences = 5;
    int num_beams = 5;
    int max_length = 128;
    double temperature = 0.7;
    int num_beam_groups = 5;
    double repetition_penalty = 10.0;
    double diversity_penalty = 3.0;
    int no_repeat_ngram_size = 2;

    void validate() const;
    json to_json() const;
    static ParaphraseConfig from_json(const json& j);
};

class Paraphraser {
public:
    virtual ~Paraphraser() = default;
    /// Throws Error(ParaphraserUnavailable) on failure.
    virtual std::vector<std::string> paraphrase(const std::string& text, const ParaphraseConfig& config) = 0;
};

/// Wire format: request {text, <every ParaphraseConfig field>}; response {paraphrases}.
class HttpParaphraser : public Paraphraser {
public:
    explicit HttpParaphraser(std::string url, TransportOptions options = {});
    std::vector<std::string> paraphrase(const std::string& text, const ParaphraseConfig& config) override;

private:
    std::string url_;
    TransportOptions options_;
};

/// Recorded outputs keyed by input text.
class ReplayParaphraser : public Paraphraser {
public:
    explicit ReplayParaphraser(std::map<std::string, std::vector<std::string>> table) : table_(std::move(table)) {}
    /// File: {"recordings": [{"text": ..., "paraphrases": [...]}, ...]}.
    static std::shared_ptr<ReplayParaphraser> from_file(const std::filesystem::path& path);
    std::vector<std::string> paraphrase(const std::string& text, const ParaphraseConfig& config) override;

private:
    std::map<std::string, std::vector<std::string>> table_;
};

class FunctionParaphraser : public Paraphraser {
public:
    using Fn = std::function<std::vector<std::string>(const std::string&, const ParaphraseConfig&)>;
    explicit FunctionParaphraser(Fn fn) : fn_(std::move(fn)) {}
    std::vector<std::string> paraphrase(const std::string& text, const ParaphraseConfig& config) override {
        return fn_(text, config);
    }

private:
    Fn fn_;
};

/// `stub` (returns nothing), `replay:<path>` or a URL.
std::shared_ptr<Paraphraser> make_paraphraser(const std::string& endpoint, TransportOptions options = {});

/// Draft first, then up to num_return_sequences distinct paraphrases; exact
/// duplicates and copies of the draft are dropped.
std::vector<std::string> generate_candidates(const std::string& draft, Paraphraser& paraphraser,
                                             const ParaphraseConfig& config);

enum class TournamentStrategy {
    /// Incumbent versus each challenger in order; N - 1 comparisons.
    Champion,
    /// Every unordered pair once; most wins, ties to the lower index.
    RoundRobin,
};

struct Comparison {
    std::size_t first = 0;
    std::size_t second = 0;
    ScoredComparison scored;
};

struct TournamentResult {
    std::string winner;
    std::size_t winner_index = 0;
    std::vector<std::string> candidates;
    std::vector<Comparison> comparisons;
    std::vector<std::size_t> champion_path;
    /// Explanation used per candidate index, when the mode needs them.
    std::map<std::size_t, std::string> explanations;

    json to_json() const;
};

/// Maps a candidate text to its explanation (typically a cached generator call).
using ExplanationSource = std::function<std::string(const std::string&)>;

/// Raised when the scorer fails mid-tournament; carries the comparisons made so far.
class TournamentError : public Error {
public:
    TournamentError(const Error& cause, std::vector<Comparison> partial)
        : Error(cause.code(), cause.what(), cause.detail()), partial_(std::move(partial)) {}
    const std::vector<Comparison>& partial() const { return partial_; }

private:
    std::vector<Comparison> partial_;
};

/// Champion strategy: the champion starts as candidates[0] and is replaced by
/// a challenger only when the champion's probability of winning is below one
/// half, so ties keep the incumbent.
TournamentResult select_best(const std::vector<std::string>& candidates, Scorer& scorer,
                             const ExplanationSource& explanations, AssemblyMode mode,
                             TournamentStrategy strategy = TournamentStrategy::Champion);

}  // namespace cream
