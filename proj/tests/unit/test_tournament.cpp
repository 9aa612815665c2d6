#include <gtest/gtest.h>
#include <httplib.h>

#include <thread>

#include "cream/tournament.hpp"
#include "support/testkit.hpp"

using namespace cream;

namespace {

/// Higher rank wins outright; antisymmetric and transitive.
FunctionScorer ranked(std::map<std::string, int> rank) {
    return FunctionScorer([rank](const PairTexts& t, const AssembledInput&) {
        return rank.at(t.t1) > rank.at(t.t2) ? 0.9 : 0.1;
    });
}

std::vector<std::string> fixed(std::vector<std::string> v) {
    return v;
}

}  // namespace

TEST(Candidates, DraftFirstThenDistinctParaphrases) {
    FunctionParaphraser five([](const std::string& d, const ParaphraseConfig&) {
        return std::vector<std::string>{d + " 1", d + " 2", d + " 3", d + " 4", d + " 5"};
    });
    const auto c = generate_candidates("draft", five, ParaphraseConfig{});
    EXPECT_EQ(c, fixed({"draft", "draft 1", "draft 2", "draft 3", "draft 4", "draft 5"}));

    FunctionParaphraser echo([](const std::string& d, const ParaphraseConfig&) {
        return std::vector<std::string>(5, d);
    });
    EXPECT_EQ(generate_candidates("draft", echo, ParaphraseConfig{}), fixed({"draft"}));

    try {
        generate_candidates("  ", five, ParaphraseConfig{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyDraft);
    }
}

TEST(Candidates, RecordedParaphrasesCollapseDuplicate) {
    const auto dir = testkit::fixtures() / "recorded_compose";
    const std::string draft = testkit::slurp(dir / "draft.txt").substr(0, testkit::slurp(dir / "draft.txt").size() - 1);
    auto replay = ReplayParaphraser::from_file(dir / "paraphrases.json");
    const auto c = generate_candidates(draft, *replay, ParaphraseConfig{});
    ASSERT_EQ(c.size(), 5u);
    EXPECT_EQ(c[0], draft);
    EXPECT_EQ(c[1].rfind("We are expecting", 0), 0u);
    EXPECT_EQ(std::set<std::string>(c.begin(), c.end()).size(), c.size());
}

TEST(Candidates, HttpParaphraserSendsConfig) {
    httplib::Server server;
    json last;
    server.Post("/paraphrase", [&](const httplib::Request& req, httplib::Response& res) {
        last = json::parse(req.body);
        res.set_content(R"({"paraphrases":["one","two"]})", "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    auto p = make_paraphraser("http://127.0.0.1:" + std::to_string(port) + "/paraphrase");
    ParaphraseConfig cfg;
    EXPECT_EQ(generate_candidates("zero", *p, cfg), fixed({"zero", "one", "two"}));
    EXPECT_EQ(last["text"], "zero");
    EXPECT_EQ(last["num_return_sequences"], 5);
    EXPECT_EQ(last["num_beams"], 5);
    EXPECT_EQ(last["max_length"], 128);
    EXPECT_DOUBLE_EQ(last["temperature"].get<double>(), 0.7);
    EXPECT_EQ(last["num_beam_groups"], 5);
    EXPECT_DOUBLE_EQ(last["repetition_penalty"].get<double>(), 10.0);
    EXPECT_DOUBLE_EQ(last["diversity_penalty"].get<double>(), 3.0);
    EXPECT_EQ(last["no_repeat_ngram_size"], 2);
    server.stop();
    th.join();

    try {
        p->paraphrase("zero", cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ParaphraserUnavailable);
    }
}

TEST(Tournament, EveryOrderFindsTheTopUnderATotalOrder) {
    for (std::size_t n = 1; n <= 6; ++n) {
        std::vector<std::string> items;
        std::map<std::string, int> rank;
        for (std::size_t i = 0; i < n; ++i) {
            items.push_back("cand" + std::to_string(i));
            rank[items.back()] = static_cast<int>((i * 7 + 3) % 11);
        }
        const auto top = std::max_element(items.begin(), items.end(),
                                          [&](const auto& a, const auto& b) { return rank[a] < rank[b]; });
        const std::string expected = *top;
        std::sort(items.begin(), items.end());
        do {
            auto s = ranked(rank);
            const auto r = select_best(items, s, {}, AssemblyMode::PairOnly);
            ASSERT_EQ(r.winner, expected);
            ASSERT_EQ(r.comparisons.size(), n - 1);
            ASSERT_EQ(r.candidates[r.winner_index], r.winner);
            auto rr = ranked(rank);
            ASSERT_EQ(select_best(items, rr, {}, AssemblyMode::PairOnly, TournamentStrategy::RoundRobin).winner,
                      expected);
        } while (std::next_permutation(items.begin(), items.end()));
    }
}

TEST(Tournament, ChampionMatchesStepwiseOracleOnArbitraryTables) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int round = 0; round < 200; ++round) {
        const std::size_t n = 2 + round % 6;
        std::vector<std::string> items;
        for (std::size_t i = 0; i < n; ++i) items.push_back("c" + std::to_string(i));
        std::map<std::pair<std::string, std::string>, double> table;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                double p = u(rng);
                if (round % 4 == 0) p = 0.5;  // ties keep the incumbent
                table[{items[i], items[j]}] = p;
            }
        }
        FunctionScorer s([&](const PairTexts& t, const AssembledInput&) { return table.at({t.t1, t.t2}); });
        std::size_t champ = 0;
        std::vector<std::size_t> path{0};
        for (std::size_t c = 1; c < n; ++c) {
            if (table.at({items[champ], items[c]}) < 0.5) {
                champ = c;
                path.push_back(c);
            }
        }
        const auto r = select_best(items, s, {}, AssemblyMode::PairOnly);
        ASSERT_EQ(r.winner_index, champ) << round;
        ASSERT_EQ(r.champion_path, path) << round;
        ASSERT_EQ(s.calls(), n - 1);
    }
}

TEST(Tournament, LengthPreferringStubAndSingleCandidate) {
    FunctionScorer longer([](const PairTexts& t, const AssembledInput&) {
        return t.t1.size() > t.t2.size() ? 1.0 : (t.t1.size() == t.t2.size() ? 0.5 : 0.0);
    });
    const auto r = select_best({"aa", "a", "aaaa", "aaa"}, longer, {}, AssemblyMode::PairOnly);
    EXPECT_EQ(r.winner, "aaaa");
    EXPECT_EQ(r.comparisons.size(), 3u);

    FunctionScorer never([](const PairTexts&, const AssembledInput&) -> double { throw std::logic_error("unused"); });
    const auto solo = select_best({"only"}, never, [](const std::string&) -> std::string { throw std::logic_error("unused"); },
                                  AssemblyMode::PairPlusExplanations);
    EXPECT_EQ(solo.winner, "only");
    EXPECT_TRUE(solo.comparisons.empty());

    EXPECT_THROW(select_best({}, longer, {}, AssemblyMode::PairOnly), Error);
}

TEST(Tournament, ExplanationsFetchedOncePerCandidate) {
    std::map<std::string, int> asked;
    FunctionScorer s([](const PairTexts& t, const AssembledInput& in) {
        EXPECT_EQ(*t.e1, "why " + t.t1);
        EXPECT_NE(in.text.find("[E2] why " + t.t2), std::string::npos);
        return 0.3;
    });
    const auto r = select_best({"a", "b", "c", "d"}, s,
                               [&](const std::string& c) {
                                   ++asked[c];
                                   return "why " + c;
                               },
                               AssemblyMode::PairPlusExplanations, TournamentStrategy::RoundRobin);
    EXPECT_EQ(r.comparisons.size(), 6u);
    EXPECT_EQ(asked.size(), 4u);
    for (const auto& [c, n] : asked) EXPECT_EQ(n, 1) << c;
    EXPECT_EQ(r.explanations.at(2), "why c");
}

TEST(Tournament, FailureCarriesPartialComparisons) {
    int n = 0;
    FunctionScorer s([&](const PairTexts&, const AssembledInput&) -> double {
        if (++n == 3) throw Error(ErrorCode::RemoteScorerUnavailable, "gone");
        return 0.7;
    });
    try {
        select_best({"a", "b", "c", "d", "e"}, s, {}, AssemblyMode::PairOnly);
        FAIL();
    } catch (const TournamentError& e) {
        EXPECT_EQ(e.code(), ErrorCode::RemoteScorerUnavailable);
        ASSERT_EQ(e.partial().size(), 2u);
        EXPECT_EQ(e.partial()[1].second, 2u);
    }
}

TEST(Tournament, ResultJson) {
    auto s = ranked({{"x", 1}, {"y", 2}});
    const auto j = select_best({"x", "y"}, s, {}, AssemblyMode::PairOnly).to_json();
    EXPECT_EQ(j["winner"], "y");
    EXPECT_EQ(j["winner_index"], 1);
    EXPECT_EQ(j["candidates"].size(), 2u);
    EXPECT_EQ(j["comparisons"].size(), 1u);
}
