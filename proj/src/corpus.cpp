#include "cream/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "cream/hashing.hpp"

namespace cream {

namespace {

constexpr const char* kRetweetAssumption =
    "retweet counts are taken as recorded in the dump; no fixed post-age snapshot is assumed";

std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n\f\v";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

Error record_error(ErrorCode code, std::string field, std::size_t index, std::string message) {
    Error e(code, "record " + std::to_string(index) + ": " + message);
    e.at(std::move(field), index);
    return e;
}

const json* lookup(const json& raw, const char* key) {
    auto it = raw.find(key);
    if (it == raw.end() || it->is_null()) return nullptr;
    return &*it;
}

std::string read_id(const json& raw, std::size_t index) {
    const json* v = lookup(raw, "id");
    if (!v) throw record_error(ErrorCode::MissingField, "id", index, "missing field 'id'");
    if (v->is_string()) {
        auto s = v->get<std::string>();
        if (trim(s).empty()) throw record_error(ErrorCode::InvalidField, "id", index, "empty id");
        return s;
    }
    if (v->is_number_integer()) return v->dump();
    throw record_error(ErrorCode::InvalidField, "id", index, "id must be a string or integer");
}

}  // namespace

const std::vector<std::string>& TopicVocabulary::default_labels() {
    static const std::vector<std::string> labels = {
        "Business & Entrepreneurs",
        "Fitness & Health",
        "Learning & Educational",
        "Sports",
    };
    return labels;
}

TopicVocabulary::TopicVocabulary() : labels_(default_labels()) {}

TopicVocabulary::TopicVocabulary(std::vector<std::string> labels) {
    for (auto& l : labels) add(std::move(l));
}

bool TopicVocabulary::contains(std::string_view label) const {
    return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
}

void TopicVocabulary::add(std::string label) {
    if (label.empty()) throw Error(ErrorCode::InvalidConfig, "empty topic label");
    if (!contains(label)) labels_.push_back(std::move(label));
}

json IngestReport::to_json() const {
    json rejected = json::array();
    for (const auto& r : rejections) {
        rejected.push_back({{"index", r.index},
                            {"error", std::string(to_string(r.code))},
                            {"field", r.field},
                            {"message", r.message}});
    }
    return {{"records_seen", records_seen},
            {"accepted", accepted},
            {"rejected_by_class", rejected_by_class},
            {"rejections", rejected},
            {"notes", notes}};
}

Corpus::Corpus(std::vector<Tweet> tweets, TimeZone reference_timezone, std::vector<std::string> provenance)
    : tweets_(std::move(tweets)),
      reference_timezone_(std::move(reference_timezone)),
      provenance_(std::move(provenance)) {
    std::unordered_set<std::string_view> seen;
    for (const auto& t : tweets_) {
        if (!seen.insert(t.id).second) {
            throw Error(ErrorCode::DuplicateId, "duplicate tweet id '" + t.id + "'");
        }
    }
    std::stable_sort(tweets_.begin(), tweets_.end(),
                     [](const Tweet& a, const Tweet& b) { return a.created_at < b.created_at; });
}

const Tweet* Corpus::find(std::string_view id) const {
    for (const auto& t : tweets_) {
        if (t.id == id) return &t;
    }
    return nullptr;
}

Tweet validate_record(const json& raw, std::size_t index, const IngestConfig& config) {
    if (!raw.is_object()) {
        throw record_error(ErrorCode::MalformedRecord, "", index, "record is not an object");
    }
    Tweet t;
    t.id = read_id(raw, index);

    const json* text = lookup(raw, "text");
    if (!text) throw record_error(ErrorCode::MissingField, "text", index, "missing field 'text'");
    if (!text->is_string()) throw record_error(ErrorCode::InvalidField, "text", index, "text must be a string");
    t.text = text->get<std::string>();
    if (trim(t.text).empty()) throw record_error(ErrorCode::EmptyText, "text", index, "text is empty");

    const json* created = lookup(raw, "created_at");
    if (!created) throw record_error(ErrorCode::MissingField, "created_at", index, "missing field 'created_at'");
    if (!created->is_string()) {
        throw record_error(ErrorCode::MalformedTimestamp, "created_at", index, "created_at must be an RFC 3339 string");
    }
    auto instant = parse_rfc3339(created->get<std::string>());
    if (!instant) {
        throw record_error(ErrorCode::MalformedTimestamp, "created_at", index,
                           "unparsable timestamp '" + created->get<std::string>() + "'");
    }
    t.created_at = *instant;

    const json* rt = lookup(raw, "retweet_count");
    if (!rt) throw record_error(ErrorCode::MissingField, "retweet_count", index, "missing field 'retweet_count'");
    if (rt->is_number_integer()) {
        if (rt->is_number_unsigned()) {
            t.retweet_count = static_cast<std::int64_t>(rt->get<std::uint64_t>());
        } else {
            t.retweet_count = rt->get<std::int64_t>();
        }
    } else if (rt->is_number_float() && std::floor(rt->get<double>()) == rt->get<double>()) {
        t.retweet_count = static_cast<std::int64_t>(rt->get<double>());
    } else {
        throw record_error(ErrorCode::InvalidField, "retweet_count", index, "retweet_count must be an integer");
    }
    if (t.retweet_count < 0) {
        throw record_error(ErrorCode::NegativeCount, "retweet_count", index, "retweet_count is negative");
    }

    const json* label = nullptr;
    const json* prob = nullptr;
    if (const json* topic = lookup(raw, "topic")) {
        if (!topic->is_object()) throw record_error(ErrorCode::InvalidField, "topic", index, "topic must be an object");
        label = lookup(*topic, "label");
        prob = lookup(*topic, "prob");
    } else {
        label = lookup(raw, "topic.label");
        prob = lookup(raw, "topic.prob");
    }
    if (label || prob) {
        if (!label || !label->is_string()) {
            throw record_error(ErrorCode::MissingField, "topic.label", index, "topic.label missing or not a string");
        }
        if (!prob || !prob->is_number()) {
            throw record_error(ErrorCode::MissingField, "topic.prob", index, "topic.prob missing or not a number");
        }
        TopicAnnotation ann{label->get<std::string>(), prob->get<double>()};
        if (!(ann.prob >= 0.0 && ann.prob <= 1.0)) {
            throw record_error(ErrorCode::InvalidField, "topic.prob", index, "topic.prob outside [0, 1]");
        }
        if (!config.vocabulary.contains(ann.label)) {
            throw record_error(ErrorCode::UnknownTopic, "topic.label", index, "unknown topic '" + ann.label + "'");
        }
        t.topic = std::move(ann);
    }
    return t;
}

json tweet_to_record(const Tweet& tweet, const TimeZone& tz) {
    json j = {{"id", tweet.id},
              {"text", tweet.text},
              {"created_at", format_rfc3339(tweet.created_at, tz)},
              {"retweet_count", tweet.retweet_count}};
    if (tweet.topic) j["topic"] = {{"label", tweet.topic->label}, {"prob", tweet.topic->prob}};
    return j;
}

namespace {

struct Ingestor {
    const IngestConfig& config;
    IngestReport report;
    std::vector<Tweet> tweets;
    std::unordered_set<std::string> ids;

    void reject(std::size_t index, ErrorCode code, std::string field, std::string message) {
        report.rejected_by_class[std::string(to_string(code))]++;
        report.rejections.push_back({index, code, std::move(field), std::move(message)});
    }

    void add(const json& raw, std::size_t index) {
        report.records_seen++;
        Tweet t;
        try {
            t = validate_record(raw, index, config);
        } catch (const Error& e) {
            if (config.strict) throw;
            reject(index, e.code(), e.field().value_or(""), e.what());
            return;
        }
        if (!ids.insert(t.id).second) {
            if (config.strict) {
                Error e(ErrorCode::DuplicateId, "record " + std::to_string(index) + ": duplicate id '" + t.id + "'");
                e.at("id", index);
                throw e;
            }
            reject(index, ErrorCode::DuplicateId, "id", "duplicate id '" + t.id + "'");
            return;
        }
        tweets.push_back(std::move(t));
        report.accepted++;
    }

    IngestResult finish(std::vector<std::string> provenance) {
        if (report.records_seen > 0) report.notes.emplace_back(kRetweetAssumption);
        return {Corpus(std::move(tweets), config.reference_timezone, std::move(provenance)), std::move(report)};
    }
};

}  // namespace

IngestResult ingest_records(std::span<const json> records, const IngestConfig& config) {
    Ingestor ing{config, {}, {}, {}};
    for (std::size_t i = 0; i < records.size(); ++i) ing.add(records[i], i);
    return ing.finish({});
}

IngestResult ingest_tweets(std::istream& source, const IngestConfig& config) {
    Ingestor ing{config, {}, {}, {}};
    std::string line;
    std::size_t index = 0;
    while (std::getline(source, line)) {
        if (trim(line).empty()) continue;
        const std::size_t i = index++;
        json raw;
        try {
            raw = json::parse(line);
        } catch (const json::parse_error& e) {
            if (config.strict) {
                throw Error(ErrorCode::MalformedRecord, "record " + std::to_string(i) + ": unparsable line", e.what());
            }
            ing.report.records_seen++;
            ing.reject(i, ErrorCode::MalformedRecord, "", std::string("unparsable line: ") + e.what());
            continue;
        }
        ing.add(raw, i);
    }
    return ing.finish({});
}

IngestResult ingest_file(const std::filesystem::path& path, const IngestConfig& config) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open tweet dump " + path.string());
    auto result = ingest_tweets(in, config);
    result.corpus = Corpus(std::vector<Tweet>(result.corpus.tweets()), config.reference_timezone,
                           {"sha256:" + sha256_file(path)});
    return result;
}

void write_tweets(std::ostream& out, const Corpus& corpus) {
    for (const auto& t : corpus.tweets()) out << tweet_to_record(t, corpus.reference_timezone()).dump() << '\n';
}

FixtureTagger::FixtureTagger(std::map<std::string, TopicAnnotation> table, std::optional<TopicAnnotation> fallback)
    : table_(std::move(table)), fallback_(std::move(fallback)) {}

FixtureTagger FixtureTagger::constant(TopicAnnotation annotation) { return FixtureTagger({}, std::move(annotation)); }

FixtureTagger FixtureTagger::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open tagger fixture " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::InvalidConfig, "malformed tagger fixture: " + std::string(e.what()));
    }
    std::map<std::string, TopicAnnotation> table;
    std::optional<TopicAnnotation> fallback;
    auto entry = [](const json& v) { return TopicAnnotation{v.at("label").get<std::string>(), v.at("prob").get<double>()}; };
    if (j.is_array()) {
        for (const auto& row : j) table[row.at("text").get<std::string>()] = entry(row);
    } else if (j.is_object()) {
        if (j.contains("default")) fallback = entry(j["default"]);
        const json& rows = j.contains("table") ? j["table"] : j;
        for (auto it = rows.begin(); it != rows.end(); ++it) {
            if (&rows == &j && it.key() == "default") continue;
            table[it.key()] = entry(it.value());
        }
    } else {
        throw Error(ErrorCode::InvalidConfig, "tagger fixture must be an object or array");
    }
    return FixtureTagger(std::move(table), std::move(fallback));
}

TopicAnnotation FixtureTagger::tag(const std::string& text) {
    if (auto it = table_.find(text); it != table_.end()) return it->second;
    if (fallback_) return *fallback_;
    throw Error(ErrorCode::TaggerUnavailable, "fixture tagger has no entry for text");
}

HttpTagger::HttpTagger(std::string url, TransportOptions options) : url_(std::move(url)), options_(std::move(options)) {}

TopicAnnotation HttpTagger::tag(const std::string& text) {
    json reply;
    try {
        reply = post_json(url_, {{"text", text}}, options_);
    } catch (const TransportFailure& e) {
        throw Error(ErrorCode::TaggerUnavailable, e.what());
    }
    if (!reply.contains("label") || !reply["label"].is_string() || !reply.contains("prob") || !reply["prob"].is_number()) {
        throw Error(ErrorCode::TaggerUnavailable, "tagger reply lacks {label, prob}", reply.dump());
    }
    return {reply["label"].get<std::string>(), reply["prob"].get<double>()};
}

Corpus annotate_topics(const Corpus& corpus, TopicTagger& tagger, const TopicVocabulary& vocabulary) {
    std::vector<Tweet> tweets = corpus.tweets();
    for (std::size_t i = 0; i < tweets.size(); ++i) {
        auto& t = tweets[i];
        if (t.topic) continue;
        TopicAnnotation ann;
        try {
            ann = tagger.tag(t.text);
        } catch (const Error& e) {
            const auto pending = std::count_if(tweets.begin() + static_cast<std::ptrdiff_t>(i), tweets.end(),
                                               [](const Tweet& x) { return !x.topic; });
            throw Error(ErrorCode::TaggerUnavailable,
                        "topic tagger failed; " + std::to_string(pending) + " tweets left unannotated",
                        e.what());
        }
        if (!vocabulary.contains(ann.label)) {
            throw Error(ErrorCode::UnknownTopic, "tagger returned unknown topic '" + ann.label + "' for tweet " + t.id);
        }
        if (!(ann.prob >= 0.0 && ann.prob <= 1.0)) {
            throw Error(ErrorCode::TaggerUnavailable, "tagger returned probability outside [0, 1] for tweet " + t.id);
        }
        t.topic = std::move(ann);
    }
    return Corpus(std::move(tweets), corpus.reference_timezone(), corpus.provenance());
}

}  // namespace cream
