#include "cream/pairing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "cream/hashing.hpp"

namespace cream {

namespace {

constexpr std::int64_t kMicrosPerDay = 86'400'000'000LL;

bool weekday_ok(const LocalTime& lt) {
    const auto wd = lt.weekday.c_encoding();  // 0 = Sunday
    return wd >= 1 && wd <= 5;
}

bool temporal_ok(const LocalTime& a, const LocalTime& b, const PairingConfig& config) {
    if (std::llabs(a.day_number() - b.day_number()) > config.max_gap_days) return false;
    const std::int64_t d = std::llabs(a.micros_of_day - b.micros_of_day);
    const std::int64_t circular = std::min(d, kMicrosPerDay - d);
    return static_cast<double>(circular) <= config.max_time_of_day_gap_hours * 3600.0 * 1e6;
}

}  // namespace

void PairingConfig::validate() const {
    if (!(margin_fraction > 0.0)) throw Error(ErrorCode::InvalidConfig, "margin_fraction must be > 0");
    if (max_gap_days <= 0) throw Error(ErrorCode::InvalidConfig, "max_gap_days must be > 0");
    if (!(max_time_of_day_gap_hours >= 0.0)) throw Error(ErrorCode::InvalidConfig, "max_time_of_day_gap_hours must be >= 0");
    if (!(topic_prob_threshold > 0.0 && topic_prob_threshold <= 1.0)) {
        throw Error(ErrorCode::InvalidConfig, "topic_prob_threshold must be in (0, 1]");
    }
}

json PairingConfig::to_json() const {
    return {{"margin_fraction", margin_fraction},
            {"max_gap_days", max_gap_days},
            {"max_time_of_day_gap_hours", max_time_of_day_gap_hours},
            {"topic_prob_threshold", topic_prob_threshold},
            {"weekdays_only", weekdays_only},
            {"order_seed", order_seed}};
}

PairingConfig PairingConfig::from_json(const json& j) {
    PairingConfig c;
    c.margin_fraction = j.value("margin_fraction", c.margin_fraction);
    c.max_gap_days = j.value("max_gap_days", c.max_gap_days);
    c.max_time_of_day_gap_hours = j.value("max_time_of_day_gap_hours", c.max_time_of_day_gap_hours);
    c.topic_prob_threshold = j.value("topic_prob_threshold", c.topic_prob_threshold);
    c.weekdays_only = j.value("weekdays_only", c.weekdays_only);
    c.order_seed = j.value("order_seed", c.order_seed);
    c.validate();
    return c;
}

double relative_difference_pct(std::int64_t rt1, std::int64_t rt2) {
    const auto lo = std::max<std::int64_t>(std::min(rt1, rt2), 1);
    return 100.0 * static_cast<double>(std::llabs(rt1 - rt2)) / static_cast<double>(lo);
}

std::string make_pair_id(std::string_view id_a, std::string_view id_b) {
    if (id_b < id_a) std::swap(id_a, id_b);
    std::string out;
    out.reserve(id_a.size() + id_b.size() + 1);
    out.append(id_a).append("|").append(id_b);
    return out;
}

bool passes_weekday(const Tweet& t, const TimeZone& tz) { return weekday_ok(tz.local(t.created_at)); }

bool margin_ok(std::int64_t rt1, std::int64_t rt2, double margin_fraction) {
    if (rt1 == rt2) return false;
    const double lo = static_cast<double>(std::min(rt1, rt2));
    return static_cast<double>(std::llabs(rt1 - rt2)) >= margin_fraction * lo;
}

bool temporally_compatible(const Tweet& t1, const Tweet& t2, const PairingConfig& config, const TimeZone& tz) {
    return temporal_ok(tz.local(t1.created_at), tz.local(t2.created_at), config);
}

bool topically_compatible(const Tweet& t1, const Tweet& t2, double threshold) {
    if (!t1.topic || !t2.topic) {
        throw Error(ErrorCode::MissingAnnotation,
                    "tweet " + (t1.topic ? t2.id : t1.id) + " has no topic annotation");
    }
    return t1.topic->label == t2.topic->label && t1.topic->prob >= threshold && t2.topic->prob >= threshold;
}

LabeledPair make_pair(const Tweet& a, const Tweet& b, std::uint64_t order_seed) {
    const Tweet& lo = a.id < b.id ? a : b;
    const Tweet& hi = a.id < b.id ? b : a;
    LabeledPair p;
    p.pair_id = make_pair_id(lo.id, hi.id);
    const bool lo_first = (splitmix64(fnv1a64(p.pair_id) ^ splitmix64(order_seed)) >> 63) != 0;
    p.t1 = lo_first ? lo : hi;
    p.t2 = lo_first ? hi : lo;
    p.label = p.t1.retweet_count > p.t2.retweet_count;
    p.topic = p.t1.topic ? p.t1.topic->label : std::string();
    p.rel_diff_pct = relative_difference_pct(p.t1.retweet_count, p.t2.retweet_count);
    p.max_created_at = std::max(p.t1.created_at, p.t2.created_at);
    return p;
}

std::vector<LabeledPair> build_pairs(const Corpus& corpus, const PairingConfig& config) {
    config.validate();
    const auto& tweets = corpus.tweets();
    const auto missing = std::count_if(tweets.begin(), tweets.end(), [](const Tweet& t) { return !t.topic; });
    if (missing > 0) {
        throw Error(ErrorCode::MissingAnnotation,
                    std::to_string(missing) + " tweets lack a topic annotation; run topic annotation first");
    }

    const auto& tz = corpus.reference_timezone();
    std::vector<LocalTime> local;
    local.reserve(tweets.size());
    for (const auto& t : tweets) local.push_back(tz.local(t.created_at));

    // Per topic, eligible tweet indices in time order.
    std::map<std::string, std::vector<std::size_t>> by_topic;
    for (std::size_t i = 0; i < tweets.size(); ++i) {
        if (config.weekdays_only && !weekday_ok(local[i])) continue;
        if (tweets[i].topic->prob < config.topic_prob_threshold) continue;
        by_topic[tweets[i].topic->label].push_back(i);
    }

    // A calendar gap of D days bounds the absolute gap by D + 1 days plus the
    // largest offset change, which never exceeds one day.
    const auto window = std::chrono::microseconds{(config.max_gap_days + 2) * kMicrosPerDay};

    std::vector<LabeledPair> out;
    for (const auto& [topic, idx] : by_topic) {
        for (std::size_t a = 0; a < idx.size(); ++a) {
            const Tweet& ta = tweets[idx[a]];
            for (std::size_t b = a + 1; b < idx.size(); ++b) {
                const Tweet& tb = tweets[idx[b]];
                if (tb.created_at - ta.created_at > window) break;
                if (!margin_ok(ta.retweet_count, tb.retweet_count, config.margin_fraction)) continue;
                if (!temporal_ok(local[idx[a]], local[idx[b]], config)) continue;
                out.push_back(make_pair(ta, tb, config.order_seed));
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const LabeledPair& x, const LabeledPair& y) {
        if (x.max_created_at != y.max_created_at) return x.max_created_at < y.max_created_at;
        return x.pair_id < y.pair_id;
    });
    return out;
}

SplitResult temporal_split(const std::vector<LabeledPair>& pairs, Instant boundary) {
    SplitResult r;
    for (const auto& p : pairs) (p.max_created_at < boundary ? r.train : r.valid).push_back(p);
    return r;
}

SplitResult temporal_split(const std::vector<LabeledPair>& pairs, std::chrono::year_month_day split_date,
                           const TimeZone& tz) {
    return temporal_split(pairs, tz.start_of_day(split_date));
}

StatsReport corpus_stats(const std::vector<LabeledPair>& pairs) {
    struct Acc {
        double rt_sum = 0.0;
        std::size_t occurrences = 0;
        std::size_t pairs = 0;
    };
    std::map<std::string, Acc> acc;
    std::size_t positives = 0;
    for (const auto& p : pairs) {
        auto& a = acc[p.topic];
        a.rt_sum += static_cast<double>(p.t1.retweet_count) + static_cast<double>(p.t2.retweet_count);
        a.occurrences += 2;
        a.pairs += 1;
        if (p.label) ++positives;
    }
    StatsReport r;
    for (const auto& [topic, a] : acc) {
        r.rows.push_back({topic, a.rt_sum / static_cast<double>(a.occurrences), a.pairs});
    }
    std::stable_sort(r.rows.begin(), r.rows.end(),
                     [](const TopicRow& x, const TopicRow& y) { return x.pair_count > y.pair_count; });
    r.total_pairs = pairs.size();
    r.label_balance = pairs.empty() ? 0.0 : static_cast<double>(positives) / static_cast<double>(pairs.size());
    return r;
}

json StatsReport::to_json() const {
    json rows_json = json::array();
    for (const auto& r : rows) {
        rows_json.push_back({{"topic", r.topic}, {"avg_retweets", r.avg_retweets}, {"pairs", r.pair_count}});
    }
    return {{"columns", {"Topic", "Avg. RT", "Pairs"}},
            {"rows", rows_json},
            {"total_pairs", total_pairs},
            {"label_balance", label_balance},
            {"avg_rt_basis", "tweet occurrences in pairs"}};
}

std::string StatsReport::to_text() const {
    std::size_t width = std::string("Topic").size();
    for (const auto& r : rows) width = std::max(width, r.topic.size());
    std::ostringstream os;
    char buf[256];
    auto line = [&](const std::string& a, const std::string& b, const std::string& c) {
        std::snprintf(buf, sizeof buf, "%-*s  %10s  %8s\n", static_cast<int>(width), a.c_str(), b.c_str(), c.c_str());
        os << buf;
    };
    const std::string rule(width + 24, '-');
    line("Topic", "Avg. RT", "Pairs");
    os << rule << '\n';
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.1f", r.avg_retweets);
        line(r.topic, buf, std::to_string(r.pair_count));
    }
    os << rule << '\n';
    line("Total", "", std::to_string(total_pairs));
    std::snprintf(buf, sizeof buf, "%.3f", label_balance);
    os << "\nAvg. RT averages retweet counts over tweet occurrences in pairs.\n";
    os << "Label balance (fraction t1 wins): " << buf << '\n';
    return os.str();
}

json pair_to_json(const LabeledPair& p, const TimeZone& tz) {
    return {{"pair_id", p.pair_id},
            {"t1", tweet_to_record(p.t1, tz)},
            {"t2", tweet_to_record(p.t2, tz)},
            {"label", p.label},
            {"topic", p.topic},
            {"rel_diff_pct", p.rel_diff_pct},
            {"max_created_at", format_rfc3339(p.max_created_at, tz)}};
}

LabeledPair pair_from_json(const json& j, const IngestConfig& config) {
    try {
        LabeledPair p;
        p.pair_id = j.at("pair_id").get<std::string>();
        p.t1 = validate_record(j.at("t1"), 0, config);
        p.t2 = validate_record(j.at("t2"), 1, config);
        p.label = j.at("label").get<bool>();
        p.topic = j.at("topic").get<std::string>();
        p.rel_diff_pct = j.at("rel_diff_pct").get<double>();
        auto ts = parse_rfc3339(j.at("max_created_at").get<std::string>());
        if (!ts) throw Error(ErrorCode::MalformedTimestamp, "pair " + p.pair_id + ": bad max_created_at");
        p.max_created_at = *ts;
        if (p.label != (p.t1.retweet_count > p.t2.retweet_count)) {
            throw Error(ErrorCode::InvalidField, "pair " + p.pair_id + ": label disagrees with retweet counts");
        }
        return p;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedRecord, std::string("malformed pair record: ") + e.what());
    }
}

void write_pairs(std::ostream& out, const std::vector<LabeledPair>& pairs, const TimeZone& tz) {
    for (const auto& p : pairs) out << pair_to_json(p, tz).dump() << '\n';
}

std::vector<LabeledPair> read_pairs(std::istream& in, const IngestConfig& config) {
    std::vector<LabeledPair> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(pair_from_json(json::parse(line), config));
        } catch (const json::parse_error& e) {
            throw Error(ErrorCode::MalformedRecord, "pairs line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::vector<LabeledPair> read_pairs_file(const std::filesystem::path& path, const IngestConfig& config) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open pairs file " + path.string());
    return read_pairs(in, config);
}

}  // namespace cream
