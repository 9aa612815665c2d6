#include <gtest/gtest.h>

#include <sstream>

#include "cream/eval.hpp"
#include "support/testkit.hpp"

using namespace cream;

namespace {

std::vector<LabeledPair> balanced_pairs(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<LabeledPair> out;
    const auto& topics = testkit::topic_labels();
    for (std::size_t i = 0; i < n; ++i) {
        auto p = testkit::text_pair("a" + std::to_string(i), "x", "b" + std::to_string(i), "y", i % 2 == 0);
        p.topic = topics[i % topics.size()];
        p.rel_diff_pct = static_cast<double>(rng() % 500);
        out.push_back(std::move(p));
    }
    return out;
}

PredictionSet predict_with(const std::vector<LabeledPair>& pairs, const std::string& id,
                           const std::function<bool(const LabeledPair&)>& f) {
    PredictionSet s;
    s.system_id = id;
    for (const auto& p : pairs) s.entries.push_back({p.pair_id, f(p), std::nullopt});
    return s;
}

}  // namespace

TEST(Metrics, ConstantTrueOnBalancedSet) {
    std::vector<bool> gold, preds(1000, true);
    for (int i = 0; i < 1000; ++i) gold.push_back(i % 2 == 0);
    EXPECT_DOUBLE_EQ(accuracy(preds, gold), 0.5);
    EXPECT_DOUBLE_EQ(f1_positive(preds, gold), 2.0 / 3.0);
}

TEST(Metrics, ConfusionMatchesDirectCount) {
    std::mt19937_64 rng(17);
    for (int round = 0; round < 1000; ++round) {
        const std::size_t n = 1 + rng() % 40;
        std::vector<bool> p, g;
        for (std::size_t i = 0; i < n; ++i) {
            p.push_back(rng() & 1);
            g.push_back(rng() & 1);
        }
        double tp = 0, fp = 0, fn = 0, same = 0;
        for (std::size_t i = 0; i < n; ++i) {
            same += p[i] == g[i];
            tp += p[i] && g[i];
            fp += p[i] && !g[i];
            fn += !p[i] && g[i];
        }
        ASSERT_DOUBLE_EQ(accuracy(p, g), same / n);
        const double f1 = (2 * tp + fp + fn) == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
        ASSERT_DOUBLE_EQ(f1_positive(p, g), f1);
    }
}

TEST(Metrics, ShapeErrors) {
    try {
        accuracy({true}, {true, false});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
    }
    try {
        f1_positive({}, {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptySet);
    }
    EXPECT_DOUBLE_EQ(f1_positive({false, false}, {false, false}), 0.0);
}

TEST(Buckets, Boundaries) {
    const BucketSpec spec;
    EXPECT_EQ(assign_bucket(0.0, spec), 0u);
    EXPECT_EQ(assign_bucket(9.9, spec), 0u);
    EXPECT_EQ(assign_bucket(10.0, spec), 1u);
    EXPECT_EQ(assign_bucket(59.99, spec), 1u);
    EXPECT_EQ(assign_bucket(60.0, spec), 2u);
    EXPECT_EQ(assign_bucket(141.3, spec), 3u);
    EXPECT_EQ(assign_bucket(311.5, spec), 4u);
    EXPECT_EQ(assign_bucket(1e9, spec), 4u);
    EXPECT_EQ(bucket_bounds(3, spec), "141.3%<=diff<311.5%");
    BucketSpec bad;
    bad.boundaries = {10, 5};
    EXPECT_THROW(bad.validate(), Error);
}

TEST(Significance, IdenticalSystemsGiveOne) {
    const auto pairs = balanced_pairs(100, 1);
    const auto a = predict_with(pairs, "a", [](const LabeledPair& p) { return p.pair_id.size() % 2 == 0; });
    auto b = a;
    b.system_id = "b";
    const auto r = significance(a, b, pairs, 1000, 5);
    EXPECT_EQ(r.p_value, 1.0);
    EXPECT_EQ(r.observed_diff, 0.0);
    EXPECT_EQ(r.test_name, kSignificanceTestName);
}

TEST(Significance, PerfectVersusCoinFlip) {
    const auto pairs = balanced_pairs(200, 2);
    std::mt19937_64 rng(3);
    const auto perfect = predict_with(pairs, "perfect", [](const LabeledPair& p) { return p.label; });
    const auto coin = predict_with(pairs, "coin", [&](const LabeledPair&) { return (rng() & 1) == 1; });
    const auto r = significance(perfect, coin, pairs, 10000, 11);
    EXPECT_LT(r.p_value, 0.01);
    EXPECT_GT(r.observed_diff, 0.3);
    EXPECT_EQ(significance(perfect, coin, pairs, 10000, 11).p_value, r.p_value);
}

TEST(Significance, AgreesWithExactEnumeration) {
    std::mt19937_64 rng(8);
    for (int round = 0; round < 12; ++round) {
        const std::size_t n = 10 + round;
        std::vector<bool> a, b;
        for (std::size_t i = 0; i < n; ++i) {
            a.push_back(rng() % 4 != 0);
            b.push_back(rng() % 2 != 0);
        }
        const double exact = testkit::exact_permutation_p(a, b);
        const double approx = approximate_randomization_p(a, b, 20000, 99 + round);
        // Standard error at 20000 draws is at most ~0.0035.
        EXPECT_NEAR(approx, exact, 0.02) << round;
    }
}

TEST(Significance, Errors) {
    const auto pairs = balanced_pairs(20, 4);
    const auto a = predict_with(pairs, "a", [](const LabeledPair&) { return true; });
    auto b = a;
    EXPECT_THROW(significance(a, b, pairs, 999, 0), Error);
    b.entries.pop_back();
    try {
        significance(a, b, pairs, 1000, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::CoverageMismatch);
    }
}

TEST(Predictions, RoundTripWithAbstentions) {
    PredictionSet s;
    s.system_id = "zero-shot:claude";
    s.entries = {{"a|b", true, 0.75}, {"c|d", false, std::nullopt}};
    s.abstained = {"e|f"};
    std::stringstream io;
    write_predictions(io, s);
    const auto back = read_predictions(io);
    EXPECT_EQ(back.system_id, s.system_id);
    ASSERT_EQ(back.entries.size(), 2u);
    EXPECT_EQ(back.entries[0].p_t1, 0.75);
    EXPECT_FALSE(back.entries[1].verdict);
    EXPECT_EQ(back.abstained, s.abstained);

    std::stringstream dup;
    s.entries.push_back({"a|b", false, std::nullopt});
    write_predictions(dup, s);
    EXPECT_THROW(read_predictions(dup).validate(), Error);
}

TEST(Evaluate, ReportAndErrors) {
    const auto pairs = balanced_pairs(60, 6);
    const auto constant = predict_with(pairs, "constant-true", [](const LabeledPair&) { return true; });
    std::vector<std::string> vocab = testkit::topic_labels();
    vocab.push_back("Sports");
    const auto r = evaluate(constant, pairs, BucketSpec{}, vocab);
    EXPECT_EQ(r.overall.n, 60u);
    EXPECT_DOUBLE_EQ(r.overall.accuracy, 0.5);
    EXPECT_DOUBLE_EQ(r.overall.f1, 2.0 / 3.0);
    EXPECT_EQ(r.per_topic.size(), 3u);
    EXPECT_EQ(r.omitted_topics, std::vector<std::string>{"Sports"});
    ASSERT_EQ(r.per_bucket.size(), 5u);
    std::size_t bucket_total = 0;
    for (const auto& b : r.per_bucket) bucket_total += b.n;
    EXPECT_EQ(bucket_total, 60u);
    const auto text = r.to_text();
    EXPECT_NE(text.find("50.0%"), std::string::npos);
    EXPECT_NE(text.find("66.7%"), std::string::npos);
    EXPECT_NE(text.find("Sports"), std::string::npos);
    EXPECT_EQ(r.to_json()["overall"]["n"], 60);

    auto missing = constant;
    missing.entries.pop_back();
    try {
        evaluate(missing, pairs);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingPrediction);
    }
    auto abstaining = missing;
    abstaining.abstained.push_back(pairs.back().pair_id);
    const auto ra = evaluate(abstaining, pairs);
    EXPECT_EQ(ra.abstained, 1u);
    EXPECT_EQ(ra.overall.n, 59u);

    auto stray = constant;
    stray.entries.push_back({"zz|zz2", true, std::nullopt});
    try {
        evaluate(stray, pairs);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnmatchedPairId);
    }
}
