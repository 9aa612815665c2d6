#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cream/corpus.hpp"

namespace cream {

struct PairingConfig {
    /// Minimum retweet difference as a fraction of the smaller count.
    double margin_fraction = 0.10;
    int max_gap_days = 10;
    double max_time_of_day_gap_hours = 5.0;
    double topic_prob_threshold = 0.8;
    bool weekdays_only = true;
    /// Seeds the per-pair coin deciding which tweet is presented as t1.
    std::uint64_t order_seed = 0;

    void validate() const;
    json to_json() const;
    static PairingConfig from_json(const json& j);
};

struct LabeledPair {
    std::string pair_id;
    Tweet t1;
    Tweet t2;
    /// True iff t1 has strictly more retweets than t2.
    bool label = false;
    std::string topic;
    double rel_diff_pct = 0.0;
    Instant max_created_at;

    bool operator==(const LabeledPair&) const = default;
};

/// Relative retweet difference in percent. A zero minimum is replaced by 1
/// so the value stays finite.
double relative_difference_pct(std::int64_t rt1, std::int64_t rt2);

/// Order-independent pair identity.
std::string make_pair_id(std::string_view id_a, std::string_view id_b);

bool passes_weekday(const Tweet& t, const TimeZone& tz);
bool margin_ok(std::int64_t rt1, std::int64_t rt2, double margin_fraction);
/// Calendar-day gap within max_gap_days and circular time-of-day distance
/// within max_time_of_day_gap_hours, both measured in `tz`.
bool temporally_compatible(const Tweet& t1, const Tweet& t2, const PairingConfig& config, const TimeZone& tz);
/// Throws MissingAnnotation if either tweet lacks a topic.
bool topically_compatible(const Tweet& t1, const Tweet& t2, double threshold);

/// Builds the labeled pair for two compatible tweets, choosing presentation
/// order from the seeded coin of their unordered identity.
LabeledPair make_pair(const Tweet& a, const Tweet& b, std::uint64_t order_seed);

/// All unordered pairs passing the four retention conditions, sorted by
/// (max_created_at, pair_id). Throws MissingAnnotation listing how many
/// tweets are unannotated.
std::vector<LabeledPair> build_pairs(const Corpus& corpus, const PairingConfig& config);

struct SplitResult {
    std::vector<LabeledPair> train;
    std::vector<LabeledPair> valid;
};

/// Pairs whose latest tweet is strictly before `boundary` go to train.
SplitResult temporal_split(const std::vector<LabeledPair>& pairs, Instant boundary);
/// `split_date` is interpreted as local midnight in `tz`.
SplitResult temporal_split(const std::vector<LabeledPair>& pairs, std::chrono::year_month_day split_date,
                           const TimeZone& tz);

struct TopicRow {
    std::string topic;
    double avg_retweets = 0.0;
    std::size_t pair_count = 0;
};

struct StatsReport {
    std::vector<TopicRow> rows;
    std::size_t total_pairs = 0;
    double label_balance = 0.0;

    json to_json() const;
    /// Plain-text table with columns Topic, Avg. RT, Pairs.
    std::string to_text() const;
};

/// Per-topic averages run over tweet occurrences in that topic's pairs.
/// Rows are ordered by descending pair count, then topic.
StatsReport corpus_stats(const std::vector<LabeledPair>& pairs);

json pair_to_json(const LabeledPair& pair, const TimeZone& tz);
LabeledPair pair_from_json(const json& j, const IngestConfig& config);
void write_pairs(std::ostream& out, const std::vector<LabeledPair>& pairs, const TimeZone& tz);
std::vector<LabeledPair> read_pairs(std::istream& in, const IngestConfig& config);
std::vector<LabeledPair> read_pairs_file(const std::filesystem::path& path, const IngestConfig& config);

}  // namespace cream
