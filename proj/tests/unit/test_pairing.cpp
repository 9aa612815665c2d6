#include <gtest/gtest.h>

#include <sstream>

#include "cream/pairing.hpp"
#include "support/testkit.hpp"

using namespace cream;
using namespace std::chrono;

namespace {

const TimeZone& ny() {
    static const TimeZone tz = TimeZone::load("America/New_York");
    return tz;
}

Tweet at(std::string id, const std::string& local_rfc3339, std::int64_t rt = 100,
         std::optional<TopicAnnotation> topic = TopicAnnotation{"Business & Entrepreneurs", 0.9}) {
    Tweet t;
    t.id = std::move(id);
    t.text = "text " + t.id;
    t.created_at = *parse_rfc3339(local_rfc3339);
    t.retweet_count = rt;
    t.topic = std::move(topic);
    return t;
}

Corpus fixture_corpus() { return ingest_file(testkit::fixtures() / "tweets6.jsonl", IngestConfig{}).corpus; }

}  // namespace

TEST(Predicates, Weekday) {
    EXPECT_TRUE(passes_weekday(at("a", "2021-03-01T14:00:00-05:00"), ny()));
    EXPECT_FALSE(passes_weekday(at("a", "2021-03-06T10:00:00-05:00"), ny()));
    EXPECT_TRUE(passes_weekday(at("a", "2021-03-05T23:30:00-05:00"), ny()));
    // 03:30 UTC Saturday is still Friday evening in New York.
    EXPECT_TRUE(passes_weekday(at("a", "2021-03-06T03:30:00Z"), ny()));
}

TEST(Predicates, Margin) {
    EXPECT_TRUE(margin_ok(100, 111, 0.10));
    EXPECT_FALSE(margin_ok(100, 109, 0.10));
    EXPECT_TRUE(margin_ok(100, 110, 0.10));
    EXPECT_FALSE(margin_ok(0, 0, 0.10));
    EXPECT_TRUE(margin_ok(0, 1, 0.10));
    for (int a = 0; a < 40; ++a) {
        for (int b = 0; b < 40; ++b) EXPECT_EQ(margin_ok(a, b, 0.1), margin_ok(b, a, 0.1));
    }
}

TEST(Predicates, Temporal) {
    PairingConfig c;
    const auto t = at("a", "2021-03-01T14:00:00-05:00");
    EXPECT_TRUE(temporally_compatible(t, at("b", "2021-03-05T16:30:00-05:00"), c, ny()));
    EXPECT_FALSE(temporally_compatible(t, at("b", "2021-03-20T14:00:00-04:00"), c, ny()));
    EXPECT_FALSE(temporally_compatible(t, at("b", "2021-03-01T21:00:00-05:00"), c, ny()));
    // Circular time of day: 23:00 and 01:00 are two hours apart.
    EXPECT_TRUE(temporally_compatible(at("a", "2021-03-01T23:00:00-05:00"), at("b", "2021-03-03T01:00:00-05:00"), c,
                                      ny()));
    // Exactly ten calendar days and exactly five hours both pass.
    EXPECT_TRUE(temporally_compatible(t, at("b", "2021-03-11T19:00:00-05:00"), c, ny()));
    EXPECT_FALSE(temporally_compatible(t, at("b", "2021-03-12T14:00:00-05:00"), c, ny()));
}

TEST(Predicates, Topic) {
    const auto b9 = at("a", "2021-03-01T14:00:00Z");
    auto sports = at("b", "2021-03-01T14:00:00Z", 1, TopicAnnotation{"Sports", 0.95});
    auto low = at("c", "2021-03-01T14:00:00Z", 1, TopicAnnotation{"Business & Entrepreneurs", 0.79});
    EXPECT_TRUE(topically_compatible(b9, b9, 0.8));
    EXPECT_FALSE(topically_compatible(b9, sports, 0.8));
    EXPECT_FALSE(topically_compatible(b9, low, 0.8));
    EXPECT_TRUE(topically_compatible(b9, at("d", "2021-03-01T14:00:00Z", 1, TopicAnnotation{"Business & Entrepreneurs", 0.8}),
                                     0.8));
    auto bare = at("e", "2021-03-01T14:00:00Z", 1, std::nullopt);
    EXPECT_THROW(topically_compatible(b9, bare, 0.8), Error);
}

TEST(BuildPairs, SixTweetFixtureMatchesOracle) {
    const auto corpus = fixture_corpus();
    const auto pairs = build_pairs(corpus, PairingConfig{});
    const auto oracle = testkit::brute_force_pairs(corpus.tweets(), PairingConfig{}, "America/New_York");
    EXPECT_EQ(testkit::identities(pairs), oracle);
    ASSERT_EQ(pairs.size(), 2u);
    // Both pairs end at b's timestamp, so the pair id breaks the tie.
    EXPECT_EQ(pairs[0].pair_id, "a|b");
    EXPECT_EQ(pairs[1].pair_id, "b|d");
}

TEST(BuildPairs, RandomCorporaMatchOracle) {
    std::mt19937_64 rng(2024);
    for (int round = 0; round < 30; ++round) {
        PairingConfig c;
        c.order_seed = static_cast<std::uint64_t>(round);
        if (round % 3 == 1) c.max_gap_days = 3;
        if (round % 3 == 2) c.max_time_of_day_gap_hours = 1.5;
        if (round % 5 == 4) c.weekdays_only = false;
        const auto tweets = testkit::random_tweets(rng, 20 + static_cast<std::size_t>(round) * 6);
        const Corpus corpus(tweets, ny());
        const auto pairs = build_pairs(corpus, c);
        EXPECT_EQ(testkit::identities(pairs), testkit::brute_force_pairs(tweets, c, "America/New_York")) << round;
        for (const auto& p : pairs) {
            EXPECT_NE(p.t1.id, p.t2.id);
            EXPECT_EQ(p.label, p.t1.retweet_count > p.t2.retweet_count);
            EXPECT_NE(p.t1.retweet_count, p.t2.retweet_count);
            EXPECT_TRUE(margin_ok(p.t1.retweet_count, p.t2.retweet_count, c.margin_fraction));
            EXPECT_TRUE(temporally_compatible(p.t1, p.t2, c, ny()));
            EXPECT_TRUE(topically_compatible(p.t1, p.t2, c.topic_prob_threshold));
            EXPECT_EQ(p.topic, p.t1.topic->label);
            EXPECT_EQ(p.max_created_at, std::max(p.t1.created_at, p.t2.created_at));
        }
        EXPECT_TRUE(std::is_sorted(pairs.begin(), pairs.end(), [](const LabeledPair& a, const LabeledPair& b) {
            return std::tie(a.max_created_at, a.pair_id) < std::tie(b.max_created_at, b.pair_id);
        }));
    }
}

TEST(BuildPairs, EdgeCases) {
    EXPECT_TRUE(build_pairs(Corpus({}, ny()), PairingConfig{}).empty());
    std::vector<Tweet> weekend{at("a", "2021-03-06T10:00:00-05:00", 10), at("b", "2021-03-07T11:00:00-05:00", 50)};
    EXPECT_TRUE(build_pairs(Corpus(weekend, ny()), PairingConfig{}).empty());
    std::vector<Tweet> unannotated{at("a", "2021-03-01T10:00:00-05:00", 10),
                                   at("b", "2021-03-02T11:00:00-05:00", 50, std::nullopt)};
    try {
        build_pairs(Corpus(unannotated, ny()), PairingConfig{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingAnnotation);
    }
}

TEST(BuildPairs, DeterministicAndRoughlyBalanced) {
    std::mt19937_64 rng(77);
    const Corpus corpus(testkit::random_tweets(rng, 200), ny());
    PairingConfig c;
    c.order_seed = 9;
    const auto a = build_pairs(corpus, c);
    const auto b = build_pairs(corpus, c);
    EXPECT_EQ(a, b);
    ASSERT_GT(a.size(), 200u);
    const double balance = corpus_stats(a).label_balance;
    EXPECT_GT(balance, 0.4);
    EXPECT_LT(balance, 0.6);

    c.order_seed = 10;
    const auto other = build_pairs(corpus, c);
    EXPECT_EQ(testkit::identities(other), testkit::identities(a));
}

TEST(RelativeDifference, Definition) {
    EXPECT_DOUBLE_EQ(relative_difference_pct(100, 111), 11.0);
    EXPECT_DOUBLE_EQ(relative_difference_pct(400, 100), 300.0);
    EXPECT_DOUBLE_EQ(relative_difference_pct(0, 7), 700.0);
}

TEST(Split, BoundaryIsLocalMidnight) {
    auto p1 = make_pair(at("a", "2022-04-30T12:00:00-04:00", 10), at("b", "2022-04-30T13:00:00-04:00", 20), 0);
    auto p2 = make_pair(at("c", "2022-05-02T12:00:00-04:00", 10), at("d", "2022-05-02T13:00:00-04:00", 20), 0);
    auto p3 = make_pair(at("e", "2022-04-30T23:59:00-04:00", 10), at("f", "2022-05-01T00:00:00-04:00", 20), 0);
    const auto split = temporal_split({p1, p2, p3}, year{2022} / May / 1, ny());
    ASSERT_EQ(split.train.size(), 1u);
    EXPECT_EQ(split.train[0].pair_id, "a|b");
    ASSERT_EQ(split.valid.size(), 2u);
    const auto empty = temporal_split({}, year{2022} / May / 1, ny());
    EXPECT_TRUE(empty.train.empty());
    EXPECT_TRUE(empty.valid.empty());
}

TEST(Stats, HandSummedRow) {
    auto b = [](std::string id, std::int64_t rt) {
        return at(std::move(id), "2021-03-01T14:00:00Z", rt);
    };
    std::vector<LabeledPair> pairs{make_pair(b("w", 100), b("x", 200), 0), make_pair(b("y", 300), b("z", 400), 0)};
    const auto s = corpus_stats(pairs);
    ASSERT_EQ(s.rows.size(), 1u);
    EXPECT_EQ(s.rows[0].topic, "Business & Entrepreneurs");
    EXPECT_DOUBLE_EQ(s.rows[0].avg_retweets, 250.0);
    EXPECT_EQ(s.rows[0].pair_count, 2u);
    EXPECT_EQ(s.total_pairs, 2u);

    const auto j = s.to_json();
    ASSERT_TRUE(j.contains("columns"));
    EXPECT_EQ(j["columns"], (json{"Topic", "Avg. RT", "Pairs"}));
    EXPECT_EQ(s.to_text().rfind("Topic", 0), 0u);

    const auto empty = corpus_stats({});
    EXPECT_TRUE(empty.rows.empty());
    EXPECT_EQ(empty.total_pairs, 0u);
}

TEST(PairsFile, RoundTrip) {
    const auto pairs = build_pairs(fixture_corpus(), PairingConfig{});
    std::stringstream s;
    write_pairs(s, pairs, ny());
    const auto back = read_pairs(s, IngestConfig{});
    EXPECT_EQ(back, pairs);
}

TEST(PairingConfig, Validation) {
    PairingConfig c;
    c.margin_fraction = 0;
    EXPECT_THROW(c.validate(), Error);
    c = {};
    c.topic_prob_threshold = 1.5;
    EXPECT_THROW(c.validate(), Error);
    c = {};
    c.max_gap_days = 0;
    EXPECT_THROW(c.validate(), Error);
    EXPECT_EQ(PairingConfig::from_json(PairingConfig{}.to_json()).to_json(), PairingConfig{}.to_json());
}
