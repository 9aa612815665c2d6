#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cream/pairing.hpp"

namespace cream {

struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::size_t n() const { return tp + fp + tn + fn; }
    double accuracy() const;
    /// 2TP / (2TP + FP + FN), or 0 when the denominator is 0.
    double f1_positive() const;
};

Confusion confusion(const std::vector<bool>& preds, const std::vector<bool>& gold);
double accuracy(const std::vector<bool>& preds, const std::vector<bool>& gold);
double f1_positive(const std::vector<bool>& preds, const std::vector<bool>& gold);

struct PredictionEntry {
    std::string pair_id;
    bool verdict = false;
    std::optional<double> p_t1;
};

struct PredictionSet {
    std::string system_id;
    std::vector<PredictionEntry> entries;
    /// Pairs the system abstained on (e.g. zero-shot refusals), excluded from entries.
    std::vector<std::string> abstained;

    /// Throws ValidationError on duplicate pair ids.
    void validate() const;
};

/// Line-delimited {pair_id, verdict, p_t1?, system_id}.
PredictionSet read_predictions(std::istream& in);
PredictionSet read_predictions_file(const std::filesystem::path& path);
void write_predictions(std::ostream& out, const PredictionSet& set);

struct BucketSpec {
    std::vector<double> boundaries{10.0, 60.0, 141.3, 311.5};
    void validate() const;
};

/// Index k such that the value lies in [b_k, b_{k+1}), with b_0 = 0 and the
/// last bucket unbounded above.
std::size_t assign_bucket(double rel_diff_pct, const BucketSpec& spec);
std::string bucket_label(std::size_t index);
/// Human-readable interval, e.g. "141.3%<=diff<311.5%".
std::string bucket_bounds(std::size_t index, const BucketSpec& spec);

struct MetricRow {
    std::string name;
    std::size_t n = 0;
    double accuracy = 0.0;
    double f1 = 0.0;
};

struct BucketRow {
    std::string label;
    double lower = 0.0;
    std::optional<double> upper;
    std::size_t n = 0;
    std::optional<double> accuracy;
    std::optional<double> f1;
};

struct SignificanceResult {
    std::string system_id;
    std::string baseline_id;
    std::string test_name;
    double observed_diff = 0.0;
    double p_value = 1.0;
    std::size_t iterations = 0;
    std::uint64_t seed = 0;

    json to_json() const;
};

struct EvalReport {
    std::string system_id;
    MetricRow overall;
    std::vector<MetricRow> per_topic;
    std::vector<std::string> omitted_topics;
    std::vector<BucketRow> per_bucket;
    std::optional<SignificanceResult> significance;
    std::size_t abstained = 0;

    json to_json() const;
    std::string to_text() const;
};

/// Every prediction must match a pair and every pair needs a prediction.
/// `vocabulary` only feeds the footnote listing zero-instance topics.
EvalReport evaluate(const PredictionSet& preds, const std::vector<LabeledPair>& pairs, const BucketSpec& buckets = {},
                    const std::vector<std::string>& vocabulary = {});

inline constexpr const char* kSignificanceTestName = "paired approximate randomization on accuracy (two-sided)";

/// Two-sided paired approximate randomization. Each iteration swaps the
/// systems' correctness on every pair with probability 1/2; the p-value is
/// add-one smoothed. Iteration i draws from a stream seeded by (seed, i).
SignificanceResult significance(const PredictionSet& a, const PredictionSet& b, const std::vector<LabeledPair>& pairs,
                                std::size_t iterations, std::uint64_t seed);

/// Core of significance() on precomputed correctness indicators.
double approximate_randomization_p(const std::vector<bool>& correct_a, const std::vector<bool>& correct_b,
                                   std::size_t iterations, std::uint64_t seed);

}  // namespace cream
