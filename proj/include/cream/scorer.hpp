#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cream/pairing.hpp"
#include "cream/transport.hpp"

namespace cream {

enum class AssemblyMode : std::uint32_t {
    PairOnly = 0,
    PairPlusExplanations = 1,
    ExplanationsOnly = 2,
};

std::string_view to_string(AssemblyMode mode);
/// Accepts `PAIR_ONLY`, `PAIR_PLUS_EXPLANATIONS`, `EXPLANATIONS_ONLY`.
AssemblyMode parse_assembly_mode(std::string_view name);
bool needs_explanations(AssemblyMode mode);

inline constexpr std::string_view kMarkerT1 = "[T1]";
inline constexpr std::string_view kMarkerT2 = "[T2]";
inline constexpr std::string_view kMarkerE1 = "[E1]";
inline constexpr std::string_view kMarkerE2 = "[E2]";
inline constexpr std::string_view kMarkerSep = "[SEP]";
/// Explanations are clipped to this many code points before assembly.
inline constexpr std::size_t kMaxExplanationChars = 1000;

struct AssembledInput {
    std::string text;
    AssemblyMode mode = AssemblyMode::PairOnly;

    bool operator==(const AssembledInput&) const = default;
};

std::string truncate_code_points(std::string_view text, std::size_t max_code_points);

/// `[T1] t1 [SEP] [T2] t2 [SEP] [E1] e1 [SEP] [E2] e2`, with segments the
/// mode does not use dropped. Throws EmptyText or MissingExplanation.
AssembledInput assemble_input(std::string_view t1, std::string_view t2, std::optional<std::string_view> e1,
                              std::optional<std::string_view> e2, AssemblyMode mode);

struct TrainConfig {
    int epochs = 20;
    int batch_size = 16;
    /// Linear-model scale; transformer fine-tuning used 2e-5.
    double learning_rate = 0.05;
    double weight_decay = 0.01;
    std::uint64_t seed = 0;
    std::uint32_t feature_dim = 1u << 18;
    std::vector<std::uint32_t> word_ngram_orders{1, 2};
    std::vector<std::uint32_t> char_ngram_orders{3, 4};

    void validate() const;
    json to_json() const;
    static TrainConfig from_json(const json& j);
};

/// Sorted, duplicate-free sparse vector.
struct SparseVector {
    std::vector<std::uint32_t> indices;
    std::vector<double> values;

    std::size_t nnz() const { return indices.size(); }
    double dot(std::span<const double> dense) const;
    bool operator==(const SparseVector&) const = default;
};

/// Hashed bag of word and character n-grams, L2-normalized. Each n-gram is
/// namespaced by the assembly segment ([T1], [T2], [E1], [E2]) it falls in,
/// so the same words on either side of the pair map to different features.
SparseVector featurize(std::string_view text, const TrainConfig& config);

inline constexpr std::string_view kModelMagic = "CREAMPWM";
inline constexpr std::uint32_t kModelFormatVersion = 1;

struct PairwiseModel {
    std::vector<double> weights;
    double bias = 0.0;
    TrainConfig config;
    AssemblyMode mode = AssemblyMode::PairOnly;
    std::uint32_t version = kModelFormatVersion;

    static PairwiseModel zeros(const TrainConfig& config, AssemblyMode mode);

    double p_t1(const SparseVector& x) const;
    double p_t1(std::string_view assembled_text) const;

    /// Little-endian binary: magic, version, feature_dim, mode, word orders,
    /// char orders, weights (f64) and bias (f64).
    std::string serialize() const;
    static PairwiseModel deserialize(std::string_view bytes);
    /// Writes the binary file plus `<path>.manifest.json`.
    void save(const std::filesystem::path& path) const;
    static PairwiseModel load(const std::filesystem::path& path);
    json manifest() const;
};

double sigmoid(double z);

/// tweet id -> explanation text
using ExplanationMap = std::map<std::string, std::string>;

struct TrainResult {
    PairwiseModel model;
    double initial_loss = 0.0;
    std::vector<double> epoch_loss;
    double train_accuracy = 0.0;
};

/// Mini-batch logistic regression with AdamW (decoupled weight decay) and
/// seeded shuffling. Single-threaded, so equal inputs give equal bytes.
TrainResult train(const std::vector<LabeledPair>& pairs, const ExplanationMap& explanations, const TrainConfig& config,
                  AssemblyMode mode);

/// Assembles the model input for a labeled pair.
AssembledInput assemble_pair(const LabeledPair& pair, const ExplanationMap& explanations, AssemblyMode mode);

struct ScoredComparison {
    double p_t1 = 0.5;
    bool verdict = false;
    AssembledInput assembled;
};

/// t1 wins only when strictly above one half.
inline bool verdict_from_probability(double p) { return p > 0.5; }

struct PairTexts {
    std::string t1;
    std::string t2;
    std::optional<std::string> e1;
    std::optional<std::string> e2;
};

/// Produces P(t1 out-reacts t2).
class Scorer {
public:
    virtual ~Scorer() = default;
    virtual double probability(const PairTexts& texts, const AssembledInput& input) = 0;

    ScoredComparison predict(const PairTexts& texts, AssemblyMode mode);
};

class LinearScorer : public Scorer {
public:
    explicit LinearScorer(std::shared_ptr<const PairwiseModel> model);
    double probability(const PairTexts& texts, const AssembledInput& input) override;
    const PairwiseModel& model() const { return *model_; }

private:
    std::shared_ptr<const PairwiseModel> model_;
};

/// Wire format: request {assembled_text, t1, t2, e1, e2, mode}; response {p_t1}.
class RemoteScorer : public Scorer {
public:
    explicit RemoteScorer(std::string url, TransportOptions options = {});
    double probability(const PairTexts& texts, const AssembledInput& input) override;

private:
    std::string url_;
    TransportOptions options_;
};

/// Recorded comparisons keyed by (t1, t2); a reversed hit yields 1 - p.
class ReplayScorer : public Scorer {
public:
    explicit ReplayScorer(std::map<std::pair<std::string, std::string>, double> table) : table_(std::move(table)) {}
    /// File: {"comparisons": [{"t1": ..., "t2": ..., "p_t1": ...}, ...]}.
    static std::shared_ptr<ReplayScorer> from_file(const std::filesystem::path& path);
    double probability(const PairTexts& texts, const AssembledInput& input) override;

private:
    std::map<std::pair<std::string, std::string>, double> table_;
};

class FunctionScorer : public Scorer {
public:
    using Fn = std::function<double(const PairTexts&, const AssembledInput&)>;
    explicit FunctionScorer(Fn fn) : fn_(std::move(fn)) {}
    double probability(const PairTexts& texts, const AssembledInput& input) override;
    std::size_t calls() const { return calls_; }

private:
    Fn fn_;
    std::size_t calls_ = 0;
};

}  // namespace cream
