#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cream/error.hpp"
#include "cream/time.hpp"
#include "cream/transport.hpp"

namespace cream {

struct TopicAnnotation {
    std::string label;
    double prob = 0.0;

    bool operator==(const TopicAnnotation&) const = default;
};

struct Tweet {
    std::string id;
    std::string text;
    Instant created_at;
    std::int64_t retweet_count = 0;
    std::optional<TopicAnnotation> topic;

    bool operator==(const Tweet&) const = default;
};

/// Closed set of topic labels; seeded with the four labels of the reference
/// corpus and extensible through configuration.
class TopicVocabulary {
public:
    TopicVocabulary();
    explicit TopicVocabulary(std::vector<std::string> labels);

    bool contains(std::string_view label) const;
    const std::vector<std::string>& labels() const { return labels_; }
    void add(std::string label);

    static const std::vector<std::string>& default_labels();

private:
    std::vector<std::string> labels_;
};

struct IngestConfig {
    TimeZone reference_timezone = TimeZone::load("America/New_York");
    TopicVocabulary vocabulary;
    /// Strict mode turns a duplicate id into a fatal DuplicateId error.
    bool strict = false;
};

struct Rejection {
    std::size_t index = 0;
    ErrorCode code = ErrorCode::MalformedRecord;
    std::string field;
    std::string message;
};

struct IngestReport {
    std::size_t records_seen = 0;
    std::size_t accepted = 0;
    std::map<std::string, std::size_t> rejected_by_class;
    std::vector<Rejection> rejections;
    std::vector<std::string> notes;

    std::size_t rejected() const { return rejections.size(); }
    json to_json() const;
};

/// Immutable, time-ordered set of tweets with unique ids.
class Corpus {
public:
    Corpus() : reference_timezone_(TimeZone::utc()) {}
    /// Sorts stably by created_at; throws DuplicateId if ids repeat.
    Corpus(std::vector<Tweet> tweets, TimeZone reference_timezone, std::vector<std::string> provenance = {});

    const std::vector<Tweet>& tweets() const { return tweets_; }
    const TimeZone& reference_timezone() const { return reference_timezone_; }
    const std::vector<std::string>& provenance() const { return provenance_; }
    std::size_t size() const { return tweets_.size(); }
    bool empty() const { return tweets_.empty(); }
    const Tweet* find(std::string_view id) const;

private:
    std::vector<Tweet> tweets_;
    TimeZone reference_timezone_;
    std::vector<std::string> provenance_;
};

struct IngestResult {
    Corpus corpus;
    IngestReport report;
};

/// Validates a raw record (the `index`-th of its stream). Unknown keys are
/// ignored; the topic may be given as a nested `topic` object or as flat
/// `topic.label` / `topic.prob` keys.
Tweet validate_record(const json& raw, std::size_t index, const IngestConfig& config);

/// Inverse of validate_record; timestamps rendered in the reference zone.
json tweet_to_record(const Tweet& tweet, const TimeZone& tz);

IngestResult ingest_records(std::span<const json> records, const IngestConfig& config);
/// Line-delimited JSON; blank lines are skipped, unparsable lines rejected.
IngestResult ingest_tweets(std::istream& source, const IngestConfig& config);
/// Ingests a file and records its SHA-256 as provenance.
IngestResult ingest_file(const std::filesystem::path& path, const IngestConfig& config);

void write_tweets(std::ostream& out, const Corpus& corpus);

class TopicTagger {
public:
    virtual ~TopicTagger() = default;
    /// Throws Error(TaggerUnavailable) when no annotation can be produced.
    virtual TopicAnnotation tag(const std::string& text) = 0;
};

/// Table-backed tagger; texts missing from the table get `fallback`, or fail
/// when no fallback is configured.
class FixtureTagger : public TopicTagger {
public:
    explicit FixtureTagger(std::map<std::string, TopicAnnotation> table,
                           std::optional<TopicAnnotation> fallback = std::nullopt);
    static FixtureTagger constant(TopicAnnotation annotation);
    /// JSON object {text: {label, prob}} or array of {text, label, prob}.
    static FixtureTagger from_file(const std::filesystem::path& path);

    TopicAnnotation tag(const std::string& text) override;

private:
    std::map<std::string, TopicAnnotation> table_;
    std::optional<TopicAnnotation> fallback_;
};

/// Remote tagger: request {text}, response {label, prob}.
class HttpTagger : public TopicTagger {
public:
    explicit HttpTagger(std::string url, TransportOptions options = {});
    TopicAnnotation tag(const std::string& text) override;

private:
    std::string url_;
    TransportOptions options_;
};

/// Annotates every tweet lacking a topic. Existing annotations are kept.
/// Labels outside `vocabulary` raise UnknownTopic; a tagger failure raises
/// TaggerUnavailable reporting how many tweets stay unannotated.
Corpus annotate_topics(const Corpus& corpus, TopicTagger& tagger, const TopicVocabulary& vocabulary);

}  // namespace cream
