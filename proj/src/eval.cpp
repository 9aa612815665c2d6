#include "cream/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "cream/hashing.hpp"

namespace cream {

namespace {

void check_lengths(const std::vector<bool>& preds, const std::vector<bool>& gold) {
    if (preds.size() != gold.size()) {
        throw Error(ErrorCode::LengthMismatch, "predictions and gold labels differ in length (" +
                                                   std::to_string(preds.size()) + " vs " + std::to_string(gold.size()) + ")");
    }
    if (preds.empty()) throw Error(ErrorCode::EmptySet, "no instances to evaluate");
}

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * v);
    return buf;
}

std::string fmt_bound(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

double Confusion::accuracy() const {
    return n() == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(n());
}

double Confusion::f1_positive() const {
    const auto denom = 2 * tp + fp + fn;
    return denom == 0 ? 0.0 : static_cast<double>(2 * tp) / static_cast<double>(denom);
}

Confusion confusion(const std::vector<bool>& preds, const std::vector<bool>& gold) {
    check_lengths(preds, gold);
    Confusion c;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i]) (gold[i] ? c.tp : c.fp)++;
        else (gold[i] ? c.fn : c.tn)++;
    }
    return c;
}

double accuracy(const std::vector<bool>& preds, const std::vector<bool>& gold) {
    return confusion(preds, gold).accuracy();
}

double f1_positive(const std::vector<bool>& preds, const std::vector<bool>& gold) {
    return confusion(preds, gold).f1_positive();
}

void PredictionSet::validate() const {
    std::set<std::string_view> seen;
    for (const auto& e : entries) {
        if (!seen.insert(e.pair_id).second) {
            throw Error(ErrorCode::ValidationError, "duplicate prediction for pair " + e.pair_id);
        }
        if (e.p_t1 && !(*e.p_t1 >= 0.0 && *e.p_t1 <= 1.0)) {
            throw Error(ErrorCode::ValidationError, "p_t1 outside [0, 1] for pair " + e.pair_id);
        }
    }
}

PredictionSet read_predictions(std::istream& in) {
    PredictionSet set;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = json::parse(line);
            const auto system = j.value("system_id", std::string());
            if (set.system_id.empty()) set.system_id = system;
            else if (!system.empty() && system != set.system_id) {
                throw Error(ErrorCode::ValidationError, "predictions mix systems '" + set.system_id + "' and '" + system + "'");
            }
            if (j.contains("verdict") && j["verdict"].is_null()) {
                set.abstained.push_back(j.at("pair_id").get<std::string>());
                continue;
            }
            PredictionEntry e;
            e.pair_id = j.at("pair_id").get<std::string>();
            e.verdict = j.at("verdict").get<bool>();
            if (j.contains("p_t1") && !j["p_t1"].is_null()) e.p_t1 = j["p_t1"].get<double>();
            set.entries.push_back(std::move(e));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::MalformedRecord, "predictions line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    set.validate();
    return set;
}

PredictionSet read_predictions_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open predictions file " + path.string());
    return read_predictions(in);
}

void write_predictions(std::ostream& out, const PredictionSet& set) {
    for (const auto& e : set.entries) {
        json j = {{"pair_id", e.pair_id}, {"verdict", e.verdict}, {"system_id", set.system_id}};
        if (e.p_t1) j["p_t1"] = *e.p_t1;
        out << j.dump() << '\n';
    }
    for (const auto& id : set.abstained) {
        out << json{{"pair_id", id}, {"verdict", nullptr}, {"system_id", set.system_id}}.dump() << '\n';
    }
}

void BucketSpec::validate() const {
    for (std::size_t i = 0; i < boundaries.size(); ++i) {
        if (!(boundaries[i] > 0.0) || !std::isfinite(boundaries[i])) {
            throw Error(ErrorCode::InvalidConfig, "bucket boundaries must be finite and > 0");
        }
        if (i > 0 && !(boundaries[i] > boundaries[i - 1])) {
            throw Error(ErrorCode::InvalidConfig, "bucket boundaries must be strictly ascending");
        }
    }
}

std::size_t assign_bucket(double rel_diff_pct, const BucketSpec& spec) {
    return static_cast<std::size_t>(std::upper_bound(spec.boundaries.begin(), spec.boundaries.end(), rel_diff_pct) -
                                    spec.boundaries.begin());
}

std::string bucket_label(std::size_t index) { return "Bucket-" + std::to_string(index); }

std::string bucket_bounds(std::size_t index, const BucketSpec& spec) {
    const auto& b = spec.boundaries;
    if (b.empty()) return "diff>=0%";
    if (index == 0) return "diff<" + fmt_bound(b[0]) + "%";
    if (index >= b.size()) return "diff>=" + fmt_bound(b.back()) + "%";
    return fmt_bound(b[index - 1]) + "%<=diff<" + fmt_bound(b[index]) + "%";
}

json SignificanceResult::to_json() const {
    return {{"system_id", system_id},
            {"baseline_id", baseline_id},
            {"test_name", test_name},
            {"metric", "accuracy"},
            {"observed_diff", observed_diff},
            {"p_value", p_value},
            {"iterations", iterations},
            {"seed", seed}};
}

EvalReport evaluate(const PredictionSet& preds, const std::vector<LabeledPair>& pairs, const BucketSpec& buckets,
                    const std::vector<std::string>& vocabulary) {
    preds.validate();
    buckets.validate();
    std::unordered_map<std::string_view, const PredictionEntry*> by_id;
    for (const auto& e : preds.entries) by_id[e.pair_id] = &e;
    std::set<std::string_view> pair_ids;
    for (const auto& p : pairs) pair_ids.insert(p.pair_id);
    for (const auto& e : preds.entries) {
        if (!pair_ids.count(e.pair_id)) throw Error(ErrorCode::UnmatchedPairId, "prediction for unknown pair " + e.pair_id);
    }
    std::set<std::string_view> abstained(preds.abstained.begin(), preds.abstained.end());

    Confusion overall;
    std::map<std::string, Confusion> topics;
    std::vector<Confusion> bucket_cm(buckets.boundaries.size() + 1);
    auto add = [](Confusion& c, bool pred, bool gold) {
        if (pred) (gold ? c.tp : c.fp)++;
        else (gold ? c.fn : c.tn)++;
    };
    std::size_t abstain_count = 0;
    for (const auto& p : pairs) {
        auto it = by_id.find(p.pair_id);
        if (it == by_id.end()) {
            if (abstained.count(p.pair_id)) {
                ++abstain_count;
                continue;
            }
            throw Error(ErrorCode::MissingPrediction, "no prediction for pair " + p.pair_id);
        }
        const bool pred = it->second->verdict;
        add(overall, pred, p.label);
        add(topics[p.topic], pred, p.label);
        add(bucket_cm[assign_bucket(p.rel_diff_pct, buckets)], pred, p.label);
    }
    if (overall.n() == 0) throw Error(ErrorCode::EmptySet, "no scored pairs to evaluate");

    EvalReport r;
    r.system_id = preds.system_id;
    r.abstained = abstain_count;
    r.overall = {"overall", overall.n(), overall.accuracy(), overall.f1_positive()};
    for (const auto& [topic, c] : topics) r.per_topic.push_back({topic, c.n(), c.accuracy(), c.f1_positive()});
    std::stable_sort(r.per_topic.begin(), r.per_topic.end(),
                     [](const MetricRow& a, const MetricRow& b) { return a.n > b.n; });
    for (const auto& label : vocabulary) {
        if (!topics.count(label)) r.omitted_topics.push_back(label);
    }
    for (std::size_t k = 0; k < bucket_cm.size(); ++k) {
        BucketRow row;
        row.label = bucket_label(k);
        row.lower = k == 0 ? 0.0 : buckets.boundaries[k - 1];
        if (k < buckets.boundaries.size()) row.upper = buckets.boundaries[k];
        row.n = bucket_cm[k].n();
        if (row.n > 0) {
            row.accuracy = bucket_cm[k].accuracy();
            row.f1 = bucket_cm[k].f1_positive();
        }
        r.per_bucket.push_back(row);
    }
    return r;
}

json EvalReport::to_json() const {
    auto row = [](const MetricRow& m) {
        return json{{"name", m.name}, {"n", m.n}, {"accuracy", m.accuracy}, {"f1", m.f1}};
    };
    json topics = json::array();
    for (const auto& t : per_topic) topics.push_back({{"topic", t.name}, {"n", t.n}, {"accuracy", t.accuracy}, {"f1", t.f1}});
    json bucket_rows = json::array();
    for (const auto& b : per_bucket) {
        bucket_rows.push_back({{"bucket", b.label},
                               {"lower", b.lower},
                               {"upper", opt(b.upper)},
                               {"n", b.n},
                               {"accuracy", opt(b.accuracy)},
                               {"f1", opt(b.f1)}});
    }
    json j = {{"system_id", system_id},
              {"f1_convention", "binary F1 of the positive class (t1 wins)"},
              {"overall", row(overall)},
              {"per_topic", topics},
              {"omitted_topics", omitted_topics},
              {"per_bucket", bucket_rows},
              {"abstained", abstained}};
    j["significance"] = significance ? significance->to_json() : json(nullptr);
    return j;
}

std::string EvalReport::to_text() const {
    std::ostringstream os;
    char buf[512];
    os << "System: " << system_id << "\n\n";
    std::snprintf(buf, sizeof buf, "%-28s %10s %10s %8s\n", "Model", "# Instance", "Accuracy", "F1");
    os << buf;
    std::snprintf(buf, sizeof buf, "%-28s %10zu %10s %8s\n", system_id.c_str(), overall.n, pct(overall.accuracy).c_str(),
                  pct(overall.f1).c_str());
    os << buf;
    if (abstained > 0) os << "Abstentions excluded: " << abstained << "\n";

    os << "\nTopic-wise evaluation\n";
    std::snprintf(buf, sizeof buf, "%-28s %10s %10s %8s\n", "Topic", "# Instance", "Accuracy", "F1");
    os << buf;
    for (const auto& t : per_topic) {
        std::snprintf(buf, sizeof buf, "%-28s %10zu %10s %8s\n", t.name.c_str(), t.n, pct(t.accuracy).c_str(),
                      pct(t.f1).c_str());
        os << buf;
    }
    if (!omitted_topics.empty()) {
        os << "No instances for:";
        for (std::size_t i = 0; i < omitted_topics.size(); ++i) os << (i ? ", " : " ") << omitted_topics[i];
        os << "\n";
    }

    BucketSpec spec;
    spec.boundaries.clear();
    for (std::size_t k = 1; k < per_bucket.size(); ++k) spec.boundaries.push_back(per_bucket[k].lower);
    auto bucket_line = [&](std::size_t k) {
        const auto& b = per_bucket[k];
        const std::string label = b.label + " (" + bucket_bounds(k, spec) + ")";
        std::snprintf(buf, sizeof buf, "%-34s %6zu %10s %8s\n", label.c_str(), b.n,
                      b.accuracy ? pct(*b.accuracy).c_str() : "-", b.f1 ? pct(*b.f1).c_str() : "-");
        os << buf;
    };
    os << "\nRetweet-difference buckets\n";
    for (std::size_t k = 1; k < per_bucket.size(); ++k) bucket_line(k);
    if (!per_bucket.empty()) {
        os << "Near-tie sample\n";
        bucket_line(0);
    }

    if (significance) {
        std::snprintf(buf, sizeof buf, "\nSignificance vs %s: %s, %zu iterations, seed %llu: diff=%+.4f p=%.4g\n",
                      significance->baseline_id.c_str(), significance->test_name.c_str(), significance->iterations,
                      static_cast<unsigned long long>(significance->seed), significance->observed_diff,
                      significance->p_value);
        os << buf;
    }
    return os.str();
}

double approximate_randomization_p(const std::vector<bool>& correct_a, const std::vector<bool>& correct_b,
                                   std::size_t iterations, std::uint64_t seed) {
    if (iterations < 1) throw Error(ErrorCode::InvalidConfig, "significance needs at least one iteration");
    if (correct_a.size() != correct_b.size()) throw Error(ErrorCode::CoverageMismatch, "indicator vectors differ in length");
    if (correct_a.empty()) throw Error(ErrorCode::EmptySet, "no pairs to compare");

    // Only pairs where the systems disagree contribute; a swap flips their sign.
    std::vector<int> deltas;
    long observed = 0;
    for (std::size_t i = 0; i < correct_a.size(); ++i) {
        const int d = static_cast<int>(correct_a[i]) - static_cast<int>(correct_b[i]);
        observed += d;
        if (d != 0) deltas.push_back(d);
    }
    const long observed_abs = std::labs(observed);
    std::size_t at_least = 0;
    for (std::size_t it = 0; it < iterations; ++it) {
        SplitMix64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(it))));
        long sum = 0;
        std::uint64_t bits = 0;
        for (std::size_t k = 0; k < deltas.size(); ++k) {
            if (k % 64 == 0) bits = rng.next();
            sum += (bits & 1) ? -deltas[k] : deltas[k];
            bits >>= 1;
        }
        if (std::labs(sum) >= observed_abs) ++at_least;
    }
    return static_cast<double>(at_least + 1) / static_cast<double>(iterations + 1);
}

SignificanceResult significance(const PredictionSet& a, const PredictionSet& b, const std::vector<LabeledPair>& pairs,
                                std::size_t iterations, std::uint64_t seed) {
    if (iterations < 1000) throw Error(ErrorCode::InvalidConfig, "significance needs at least 1000 iterations");
    a.validate();
    b.validate();
    std::unordered_map<std::string_view, bool> va, vb;
    for (const auto& e : a.entries) va[e.pair_id] = e.verdict;
    for (const auto& e : b.entries) vb[e.pair_id] = e.verdict;
    if (va.size() != vb.size()) throw Error(ErrorCode::CoverageMismatch, "prediction sets cover different pairs");
    std::vector<bool> ca, cb;
    for (const auto& p : pairs) {
        auto ia = va.find(p.pair_id);
        auto ib = vb.find(p.pair_id);
        if (ia == va.end() && ib == vb.end()) continue;
        if (ia == va.end() || ib == vb.end()) {
            throw Error(ErrorCode::CoverageMismatch, "pair " + p.pair_id + " is predicted by only one system");
        }
        ca.push_back(ia->second == p.label);
        cb.push_back(ib->second == p.label);
    }
    if (ca.size() != va.size()) throw Error(ErrorCode::CoverageMismatch, "predictions reference pairs outside the pair set");

    SignificanceResult r;
    r.system_id = a.system_id;
    r.baseline_id = b.system_id;
    r.test_name = kSignificanceTestName;
    r.iterations = iterations;
    r.seed = seed;
    long diff = 0;
    for (std::size_t i = 0; i < ca.size(); ++i) diff += static_cast<int>(ca[i]) - static_cast<int>(cb[i]);
    r.observed_diff = static_cast<double>(diff) / static_cast<double>(ca.size());
    r.p_value = approximate_randomization_p(ca, cb, iterations, seed);
    return r;
}

}  // namespace cream
