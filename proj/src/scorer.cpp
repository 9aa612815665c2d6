#include "cream/scorer.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "cream/hashing.hpp"

namespace cream {

namespace {

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

bool is_word_byte(unsigned char c) { return c >= 0x80 || std::isalnum(c) || c == '#' || c == '@' || c == '\''; }

std::string normalize_token(std::string_view raw) {
    std::size_t b = 0, e = raw.size();
    while (b < e && !is_word_byte(static_cast<unsigned char>(raw[b]))) ++b;
    while (e > b && !is_word_byte(static_cast<unsigned char>(raw[e - 1]))) --e;
    std::string out(raw.substr(b, e - b));
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string_view segment_tag(std::string_view token) {
    if (token == kMarkerT1) return "T1";
    if (token == kMarkerT2) return "T2";
    if (token == kMarkerE1) return "E1";
    if (token == kMarkerE2) return "E2";
    if (token == kMarkerSep) return "";
    return {};
}

bool is_marker(std::string_view token) {
    return token == kMarkerT1 || token == kMarkerT2 || token == kMarkerE1 || token == kMarkerE2 || token == kMarkerSep;
}

class FeatureAccumulator {
public:
    FeatureAccumulator(const TrainConfig& config) : config_(config), mask_(config.feature_dim - 1) {}

    void add_segment(std::string_view tag, const std::vector<std::string>& words) {
        if (words.empty()) return;
        for (auto order : config_.word_ngram_orders) {
            if (order == 0 || words.size() < order) continue;
            for (std::size_t i = 0; i + order <= words.size(); ++i) {
                std::string gram = words[i];
                for (std::size_t k = 1; k < order; ++k) gram.append(" ").append(words[i + k]);
                bump('w', tag, order, gram);
            }
        }
        std::string joined = " ";
        for (const auto& w : words) joined.append(w).append(" ");
        for (auto order : config_.char_ngram_orders) {
            if (order == 0 || joined.size() < order) continue;
            for (std::size_t i = 0; i + order <= joined.size(); ++i) bump('c', tag, order, std::string_view(joined).substr(i, order));
        }
    }

    SparseVector finish() {
        SparseVector v;
        std::vector<std::pair<std::uint32_t, double>> items(counts_.begin(), counts_.end());
        std::sort(items.begin(), items.end());
        double norm2 = 0.0;
        for (const auto& [_, c] : items) norm2 += c * c;
        const double inv = norm2 > 0 ? 1.0 / std::sqrt(norm2) : 0.0;
        v.indices.reserve(items.size());
        v.values.reserve(items.size());
        for (const auto& [i, c] : items) {
            v.indices.push_back(i);
            v.values.push_back(c * inv);
        }
        return v;
    }

private:
    void bump(char kind, std::string_view tag, std::uint32_t order, std::string_view gram) {
        std::uint64_t h = fnv1a64(std::string_view(&kind, 1));
        h = fnv1a64(tag, h);
        const char sep[2] = {'\x1f', static_cast<char>('0' + order % 10)};
        h = fnv1a64(std::string_view(sep, 2), h);
        h = fnv1a64(gram, h);
        counts_[static_cast<std::uint32_t>(h & mask_)] += 1.0;
    }

    const TrainConfig& config_;
    std::uint64_t mask_;
    std::unordered_map<std::uint32_t, double> counts_;
};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return std::bit_cast<double>(v);
    }
    std::string_view take(std::size_t n) {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size()) throw Error(ErrorCode::ModelFormat, "model file truncated");
    }
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

json orders_json(const std::vector<std::uint32_t>& v) { return json(v); }

}  // namespace

std::string_view to_string(AssemblyMode mode) {
    switch (mode) {
        case AssemblyMode::PairOnly: return "PAIR_ONLY";
        case AssemblyMode::PairPlusExplanations: return "PAIR_PLUS_EXPLANATIONS";
        case AssemblyMode::ExplanationsOnly: return "EXPLANATIONS_ONLY";
    }
    return "PAIR_ONLY";
}

AssemblyMode parse_assembly_mode(std::string_view name) {
    if (name == "PAIR_ONLY") return AssemblyMode::PairOnly;
    if (name == "PAIR_PLUS_EXPLANATIONS") return AssemblyMode::PairPlusExplanations;
    if (name == "EXPLANATIONS_ONLY") return AssemblyMode::ExplanationsOnly;
    throw Error(ErrorCode::InvalidConfig, "unknown assembly mode '" + std::string(name) + "'");
}

bool needs_explanations(AssemblyMode mode) { return mode != AssemblyMode::PairOnly; }

std::string truncate_code_points(std::string_view text, std::size_t max_code_points) {
    std::size_t seen = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) {
            if (seen == max_code_points) return std::string(text.substr(0, i));
            ++seen;
        }
    }
    return std::string(text);
}

AssembledInput assemble_input(std::string_view t1, std::string_view t2, std::optional<std::string_view> e1,
                              std::optional<std::string_view> e2, AssemblyMode mode) {
    if (blank(t1) || blank(t2)) throw Error(ErrorCode::EmptyText, "pair texts must be non-empty");
    const bool want_pair = mode != AssemblyMode::ExplanationsOnly;
    const bool want_expl = needs_explanations(mode);
    if (want_expl && (!e1 || !e2 || blank(*e1) || blank(*e2))) {
        throw Error(ErrorCode::MissingExplanation, std::string("assembly mode ") + std::string(to_string(mode)) +
                                                       " needs explanations for both texts");
    }
    std::vector<std::string> parts;
    auto segment = [](std::string_view marker, std::string_view body) {
        std::string s(marker);
        s.append(" ").append(body);
        return s;
    };
    if (want_pair) {
        parts.push_back(segment(kMarkerT1, t1));
        parts.push_back(segment(kMarkerT2, t2));
    }
    if (want_expl) {
        parts.push_back(segment(kMarkerE1, truncate_code_points(*e1, kMaxExplanationChars)));
        parts.push_back(segment(kMarkerE2, truncate_code_points(*e2, kMaxExplanationChars)));
    }
    AssembledInput out;
    out.mode = mode;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.text.append(" ").append(kMarkerSep).append(" ");
        out.text.append(parts[i]);
    }
    return out;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw Error(ErrorCode::InvalidConfig, "epochs must be >= 1");
    if (batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidConfig, "learning_rate must be > 0");
    if (!(weight_decay >= 0.0)) throw Error(ErrorCode::InvalidConfig, "weight_decay must be >= 0");
    if (feature_dim == 0 || !std::has_single_bit(feature_dim)) {
        throw Error(ErrorCode::InvalidConfig, "feature_dim must be a power of two");
    }
    if (word_ngram_orders.empty() && char_ngram_orders.empty()) {
        throw Error(ErrorCode::InvalidConfig, "at least one n-gram order is required");
    }
}

json TrainConfig::to_json() const {
    return {{"epochs", epochs},
            {"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"weight_decay", weight_decay},
            {"seed", seed},
            {"feature_dim", feature_dim},
            {"word_ngram_orders", orders_json(word_ngram_orders)},
            {"char_ngram_orders", orders_json(char_ngram_orders)}};
}

TrainConfig TrainConfig::from_json(const json& j) {
    TrainConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.seed = j.value("seed", c.seed);
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.word_ngram_orders = j.value("word_ngram_orders", c.word_ngram_orders);
    c.char_ngram_orders = j.value("char_ngram_orders", c.char_ngram_orders);
    c.validate();
    return c;
}

double SparseVector::dot(std::span<const double> dense) const {
    double s = 0.0;
    for (std::size_t k = 0; k < indices.size(); ++k) s += dense[indices[k]] * values[k];
    return s;
}

SparseVector featurize(std::string_view text, const TrainConfig& config) {
    FeatureAccumulator acc(config);
    std::string_view tag;
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        const auto start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (start == i) break;
        const auto token = text.substr(start, i - start);
        if (is_marker(token)) {
            acc.add_segment(tag, words);
            words.clear();
            tag = segment_tag(token);
            continue;
        }
        auto w = normalize_token(token);
        if (!w.empty()) words.push_back(std::move(w));
    }
    acc.add_segment(tag, words);
    return acc.finish();
}

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

PairwiseModel PairwiseModel::zeros(const TrainConfig& config, AssemblyMode mode) {
    config.validate();
    PairwiseModel m;
    m.weights.assign(config.feature_dim, 0.0);
    m.config = config;
    m.mode = mode;
    return m;
}

double PairwiseModel::p_t1(const SparseVector& x) const { return sigmoid(x.dot(weights) + bias); }

double PairwiseModel::p_t1(std::string_view assembled_text) const { return p_t1(featurize(assembled_text, config)); }

std::string PairwiseModel::serialize() const {
    std::string out;
    out.reserve(64 + weights.size() * 8);
    out.append(kModelMagic);
    put_u32(out, version);
    put_u32(out, static_cast<std::uint32_t>(weights.size()));
    put_u32(out, static_cast<std::uint32_t>(mode));
    put_u32(out, static_cast<std::uint32_t>(config.word_ngram_orders.size()));
    for (auto o : config.word_ngram_orders) put_u32(out, o);
    put_u32(out, static_cast<std::uint32_t>(config.char_ngram_orders.size()));
    for (auto o : config.char_ngram_orders) put_u32(out, o);
    for (double w : weights) put_f64(out, w);
    put_f64(out, bias);
    return out;
}

PairwiseModel PairwiseModel::deserialize(std::string_view bytes) {
    Reader r(bytes);
    if (r.take(kModelMagic.size()) != kModelMagic) throw Error(ErrorCode::ModelFormat, "not a pairwise model file");
    PairwiseModel m;
    m.version = r.u32();
    if (m.version != kModelFormatVersion) {
        throw Error(ErrorCode::ModelFormat, "unsupported model format version " + std::to_string(m.version));
    }
    m.config.feature_dim = r.u32();
    const auto mode = r.u32();
    if (mode > 2) throw Error(ErrorCode::ModelFormat, "unknown assembly mode in model file");
    m.mode = static_cast<AssemblyMode>(mode);
    m.config.word_ngram_orders.resize(r.u32());
    for (auto& o : m.config.word_ngram_orders) o = r.u32();
    m.config.char_ngram_orders.resize(r.u32());
    for (auto& o : m.config.char_ngram_orders) o = r.u32();
    if (m.config.feature_dim == 0 || !std::has_single_bit(m.config.feature_dim)) {
        throw Error(ErrorCode::ModelFormat, "feature_dim in model file is not a power of two");
    }
    m.weights.resize(m.config.feature_dim);
    for (auto& w : m.weights) w = r.f64();
    m.bias = r.f64();
    if (!r.done()) throw Error(ErrorCode::ModelFormat, "trailing bytes after model payload");
    if (!std::all_of(m.weights.begin(), m.weights.end(), [](double w) { return std::isfinite(w); }) ||
        !std::isfinite(m.bias)) {
        throw Error(ErrorCode::ModelFormat, "model contains non-finite weights");
    }
    return m;
}

json PairwiseModel::manifest() const {
    return {{"format", std::string(kModelMagic)},
            {"version", version},
            {"mode", std::string(to_string(mode))},
            {"train_config", config.to_json()},
            {"payload_sha256", sha256_hex(serialize())}};
}

void PairwiseModel::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write model " + path.string());
        const auto bytes = serialize();
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    std::ofstream man(path.string() + ".manifest.json", std::ios::trunc);
    man << manifest().dump(2) << '\n';
}

PairwiseModel PairwiseModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open model " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), {});
    auto m = deserialize(bytes);
    std::ifstream man(path.string() + ".manifest.json");
    if (man) {
        try {
            const auto j = json::parse(man);
            if (j.contains("train_config")) {
                auto c = TrainConfig::from_json(j["train_config"]);
                c.feature_dim = m.config.feature_dim;
                c.word_ngram_orders = m.config.word_ngram_orders;
                c.char_ngram_orders = m.config.char_ngram_orders;
                m.config = c;
            }
        } catch (const std::exception&) {
            // The binary header is authoritative; a damaged manifest only loses the config echo.
        }
    }
    return m;
}

AssembledInput assemble_pair(const LabeledPair& pair, const ExplanationMap& explanations, AssemblyMode mode) {
    std::optional<std::string_view> e1, e2;
    if (needs_explanations(mode)) {
        auto i1 = explanations.find(pair.t1.id);
        auto i2 = explanations.find(pair.t2.id);
        if (i1 == explanations.end() || i2 == explanations.end()) {
            throw Error(ErrorCode::MissingExplanation,
                        "no explanation for tweet " + (i1 == explanations.end() ? pair.t1.id : pair.t2.id));
        }
        e1 = i1->second;
        e2 = i2->second;
    }
    return assemble_input(pair.t1.text, pair.t2.text, e1, e2, mode);
}

TrainResult train(const std::vector<LabeledPair>& pairs, const ExplanationMap& explanations, const TrainConfig& config,
                  AssemblyMode mode) {
    config.validate();
    if (pairs.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no training pairs");

    std::vector<SparseVector> xs;
    std::vector<double> ys;
    xs.reserve(pairs.size());
    ys.reserve(pairs.size());
    for (const auto& p : pairs) {
        xs.push_back(featurize(assemble_pair(p, explanations, mode).text, config));
        ys.push_back(p.label ? 1.0 : 0.0);
    }

    auto model = PairwiseModel::zeros(config, mode);
    auto& w = model.weights;
    double& b = model.bias;

    auto log_loss = [](double p, double y) {
        constexpr double eps = 1e-12;
        return -(y * std::log(std::max(p, eps)) + (1.0 - y) * std::log(std::max(1.0 - p, eps)));
    };

    TrainResult result;
    {
        double total = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) total += log_loss(model.p_t1(xs[i]), ys[i]);
        result.initial_loss = total / static_cast<double>(xs.size());
    }

    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    const double lr = config.learning_rate;
    std::vector<double> m1(w.size(), 0.0), m2(w.size(), 0.0), grad(w.size(), 0.0);
    double mb1 = 0.0, mb2 = 0.0;
    std::vector<std::uint32_t> touched;
    std::vector<std::size_t> order(xs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::uint64_t step = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        SplitMix64 rng(splitmix64(config.seed) ^ static_cast<std::uint64_t>(epoch));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const auto end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            const double inv_n = 1.0 / static_cast<double>(end - start);
            double grad_b = 0.0;
            for (std::size_t k = start; k < end; ++k) {
                const auto& x = xs[order[k]];
                const double p = model.p_t1(x);
                epoch_loss += log_loss(p, ys[order[k]]);
                const double g = (p - ys[order[k]]) * inv_n;
                for (std::size_t n = 0; n < x.nnz(); ++n) {
                    if (grad[x.indices[n]] == 0.0) touched.push_back(x.indices[n]);
                    grad[x.indices[n]] += g * x.values[n];
                }
                grad_b += g;
            }

            ++step;
            const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            for (std::size_t i = 0; i < w.size(); ++i) {
                const double g = grad[i];
                m1[i] = beta1 * m1[i] + (1.0 - beta1) * g;
                m2[i] = beta2 * m2[i] + (1.0 - beta2) * g * g;
                w[i] -= lr * config.weight_decay * w[i];
                w[i] -= lr * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + eps);
            }
            mb1 = beta1 * mb1 + (1.0 - beta1) * grad_b;
            mb2 = beta2 * mb2 + (1.0 - beta2) * grad_b * grad_b;
            b -= lr * (mb1 / c1) / (std::sqrt(mb2 / c2) + eps);

            for (auto idx : touched) grad[idx] = 0.0;
            touched.clear();
        }
        result.epoch_loss.push_back(epoch_loss / static_cast<double>(xs.size()));
    }

    if (!std::all_of(w.begin(), w.end(), [](double v) { return std::isfinite(v); }) || !std::isfinite(b)) {
        throw Error(ErrorCode::ModelFormat, "training diverged: non-finite weights");
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (verdict_from_probability(model.p_t1(xs[i])) == (ys[i] > 0.5)) ++correct;
    }
    result.train_accuracy = static_cast<double>(correct) / static_cast<double>(xs.size());
    result.model = std::move(model);
    return result;
}

ScoredComparison Scorer::predict(const PairTexts& texts, AssemblyMode mode) {
    std::optional<std::string_view> e1, e2;
    if (texts.e1) e1 = *texts.e1;
    if (texts.e2) e2 = *texts.e2;
    ScoredComparison out;
    out.assembled = assemble_input(texts.t1, texts.t2, e1, e2, mode);
    const double p = probability(texts, out.assembled);
    if (!(p >= 0.0 && p <= 1.0)) {
        throw Error(ErrorCode::RemoteScorerUnavailable, "scorer returned a probability outside [0, 1]");
    }
    out.p_t1 = p;
    out.verdict = verdict_from_probability(p);
    return out;
}

LinearScorer::LinearScorer(std::shared_ptr<const PairwiseModel> model) : model_(std::move(model)) {
    if (!model_) throw Error(ErrorCode::ModelNotLoaded, "no model loaded");
}

double LinearScorer::probability(const PairTexts&, const AssembledInput& input) { return model_->p_t1(input.text); }

RemoteScorer::RemoteScorer(std::string url, TransportOptions options)
    : url_(std::move(url)), options_(std::move(options)) {}

double RemoteScorer::probability(const PairTexts& texts, const AssembledInput& input) {
    json req = {{"assembled_text", input.text},
                {"t1", texts.t1},
                {"t2", texts.t2},
                {"e1", texts.e1 ? json(*texts.e1) : json(nullptr)},
                {"e2", texts.e2 ? json(*texts.e2) : json(nullptr)},
                {"mode", std::string(to_string(input.mode))}};
    json reply;
    try {
        reply = post_json(url_, req, options_);
    } catch (const TransportFailure& e) {
        throw Error(ErrorCode::RemoteScorerUnavailable, e.what());
    }
    if (!reply.contains("p_t1") || !reply["p_t1"].is_number()) {
        throw Error(ErrorCode::RemoteScorerUnavailable, "scorer reply lacks p_t1", reply.dump());
    }
    return reply["p_t1"].get<double>();
}

std::shared_ptr<ReplayScorer> ReplayScorer::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open scorer replay file " + path.string());
    std::map<std::pair<std::string, std::string>, double> table;
    try {
        const json j = json::parse(in);
        for (const auto& row : j.at("comparisons")) {
            table[{row.at("t1").get<std::string>(), row.at("t2").get<std::string>()}] = row.at("p_t1").get<double>();
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, "malformed scorer replay file " + path.string() + ": " + e.what());
    }
    return std::make_shared<ReplayScorer>(std::move(table));
}

double ReplayScorer::probability(const PairTexts& texts, const AssembledInput&) {
    if (auto it = table_.find({texts.t1, texts.t2}); it != table_.end()) return it->second;
    if (auto it = table_.find({texts.t2, texts.t1}); it != table_.end()) return 1.0 - it->second;
    throw Error(ErrorCode::RemoteScorerUnavailable, "no recorded comparison for this pair");
}

double FunctionScorer::probability(const PairTexts& texts, const AssembledInput& input) {
    ++calls_;
    return fn_(texts, input);
}

}  // namespace cream
