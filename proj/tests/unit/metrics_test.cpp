// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartgcl/metrics.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

#include <gtest/gtest.h>

namespace chartgcl {
namespace {

TEST(ParseNumber, AcceptedForms) {
    EXPECT_EQ(parse_number("42"), 42.0);
    EXPECT_EQ(parse_number(" 1,234.5 "), 1234.5);
    EXPECT_EQ(parse_number("-3e2"), -300.0);
    EXPECT_EQ(parse_number("+7"), 7.0);
    EXPECT_EQ(parse_number("12%"), 12.0);
    EXPECT_EQ(parse_number(".5"), 0.5);
}

TEST(ParseNumber, RejectedForms) {
    for (const char* s : {"", "abc", "12 apples", "1.2.3", "+-3", "%", "inf", "nan", "--1", "1e999"}) {
        EXPECT_FALSE(parse_number(s).has_value()) << s;
    }
}

TEST(RelaxedMatch, BoundaryIsInclusive) {
    EXPECT_TRUE(relaxed_match("14.25", "15"));
    EXPECT_TRUE(relaxed_match("15.75", "15"));
    EXPECT_FALSE(relaxed_match("106", "100"));
    EXPECT_FALSE(relaxed_match("94", "100"));
    EXPECT_TRUE(relaxed_match("105", "100"));
}

TEST(RelaxedMatch, ToleranceIsAnchoredOnGold) {
    // |p - g| = 5 in both directions; only the larger gold admits it.
    EXPECT_TRUE(relaxed_match("95", "100"));
    EXPECT_FALSE(relaxed_match("100", "95"));
}

TEST(RelaxedMatch, TextZeroAndFormatting) {
    EXPECT_TRUE(relaxed_match("Blue", "blue"));
    EXPECT_TRUE(relaxed_match("  Yes ", "yes"));
    EXPECT_FALSE(relaxed_match("Blue", "Green"));
    EXPECT_TRUE(relaxed_match("0", "0"));
    EXPECT_TRUE(relaxed_match("0.0", "0"));
    EXPECT_FALSE(relaxed_match("0.001", "0"));
    EXPECT_TRUE(relaxed_match("1,000", "1000"));
    EXPECT_TRUE(relaxed_match("50%", "50"));
    EXPECT_FALSE(relaxed_match("50", "blue"));
}

TEST(ExactMatch, StringSemantics) {
    EXPECT_TRUE(exact_match("14.5", "14.5"));
    EXPECT_FALSE(exact_match("14.5", "14.50"));
    EXPECT_TRUE(exact_match("A", "a"));
    EXPECT_TRUE(exact_match(" a ", "A"));
}

TEST(MatchProperties, ReflexiveAndExactImpliesRelaxed) {
    std::mt19937_64 rng(3);
    const std::vector<std::string> atoms = {"1", "1.0", "100", "95", "0", "Blue", "blue", " 7% ", "1,5", "-2", "x"};
    for (const auto& a : atoms) {
        EXPECT_TRUE(relaxed_match(a, a)) << a;
        for (const auto& b : atoms) {
            if (exact_match(a, b)) EXPECT_TRUE(relaxed_match(a, b)) << a << " / " << b;
        }
    }
    for (int i = 0; i < 500; ++i) {
        const std::string g = std::to_string(testing::uniform(rng, -1e4, 1e4));
        EXPECT_TRUE(relaxed_match(g, g));
    }
}

TEST(BleuTokenize, PunctuationAndCase) {
    EXPECT_EQ(bleu_tokenize("Hello, World!"), (std::vector<std::string>{"hello", ",", "world", "!"}));
    EXPECT_EQ(bleu_tokenize("It costs 1,234.5 (approx)."),
              (std::vector<std::string>{"it", "costs", "1,234.5", "(", "approx", ")", "."}));
    EXPECT_TRUE(bleu_tokenize("   ").empty());
}

TEST(Bleu, PerfectAndEmpty) {
    EXPECT_DOUBLE_EQ(bleu4({"the cat sat on the mat"}, {"the cat sat on the mat"}), 100.0);
    EXPECT_DOUBLE_EQ(bleu4({"", ""}, {"a b c d", "e f g h"}), 0.0);
    EXPECT_THROW(bleu4({"a"}, {""}), Error);
    EXPECT_THROW(bleu4({"a"}, {"a", "b"}), Error);
    EXPECT_THROW(bleu4({}, {}), Error);
}

TEST(Bleu, DocumentedSentenceMatchesOracle) {
    const std::vector<std::string> h = {"the cat sat on the mat"};
    const std::vector<std::string> r = {"the cat is on the mat"};
    EXPECT_NEAR(bleu4(h, r), testing::textbook_bleu(h, r), 1e-6);
    EXPECT_NEAR(bleu4(h, r, {true}), testing::textbook_bleu(h, r, true), 1e-6);
    EXPECT_GT(bleu4(h, r, {true}), 0.0);
}

TEST(Bleu, RandomCorporaMatchOracle) {
    std::mt19937_64 rng(17);
    for (int c = 0; c < 40; ++c) {
        const int n = testing::uniform_int(rng, 1, 6);
        std::vector<std::string> hyps, refs;
        for (int i = 0; i < n; ++i) {
            refs.push_back(testing::random_sentence(rng, 4, 12));
            // Half the hypotheses are perturbed copies so high-order matches occur.
            if (testing::uniform(rng, 0, 1) < 0.5) {
                hyps.push_back(refs.back() + " " + testing::random_sentence(rng, 0, 3));
            } else {
                hyps.push_back(testing::random_sentence(rng, 4, 12));
            }
        }
        const double got = bleu4(hyps, refs);
        EXPECT_NEAR(got, testing::textbook_bleu(hyps, refs), 1e-6);
        EXPECT_NEAR(bleu4(hyps, refs, {true}), testing::textbook_bleu(hyps, refs, true), 1e-6);
        EXPECT_GE(got, 0.0);
        EXPECT_LE(got, 100.0);
    }
}

TEST(Bleu, StatsReduceExactly) {
    std::mt19937_64 rng(5);
    std::vector<std::string> hyps, refs;
    BleuStats sum;
    for (int i = 0; i < 10; ++i) {
        hyps.push_back(testing::random_sentence(rng, 3, 9));
        refs.push_back(testing::random_sentence(rng, 3, 9));
        sum += bleu_stats(hyps.back(), refs.back());
    }
    EXPECT_EQ(bleu_from_stats(sum), bleu4(hyps, refs));
}

TEST(Bleu, PerfectCorpusStaysPerfect) {
    std::vector<std::string> c = {"a b c d e"};
    for (int i = 0; i < 5; ++i) {
        c.push_back("w x y z " + std::to_string(i));
        EXPECT_DOUBLE_EQ(bleu4(c, c), 100.0);
    }
}

TEST(Bleu, BrevityPenalty) {
    // Hypothesis of 4 tokens against a reference of 8 with full precision.
    const double expected = 100.0 * std::exp(1.0 - 8.0 / 4.0);
    EXPECT_NEAR(bleu4({"a b c d"}, {"a b c d e f g h"}), expected, 1e-9);
}

TEST(EvaluateSplit, TwoOfThree) {
    const auto s = evaluate_split({"1", "blue", "x"}, {"1", "Blue", "y"},
                                  {AnswerKind::numeric, AnswerKind::textual, AnswerKind::textual});
    EXPECT_EQ(round2(s.relaxed_acc), 66.67);
    EXPECT_EQ(round2(s.exact_acc), 66.67);
    int recount = 0;
    for (const auto& v : s.items) recount += v.relaxed;
    EXPECT_EQ(100.0 * recount / 3.0, s.relaxed_acc);
}

TEST(EvaluateSplit, Errors) {
    EXPECT_THROW(evaluate_split({}, {}, {}), Error);
    EXPECT_THROW(evaluate_split({"a"}, {"a", "b"}, {AnswerKind::textual, AnswerKind::textual}), Error);
}

TEST(EvaluateSplit, BleuForOpenEnded) {
    const auto s = evaluate_split({"the bars rise over time"}, {"the bars rise over time"}, {AnswerKind::open_ended});
    EXPECT_DOUBLE_EQ(s.score(MetricId::bleu4), 100.0);
    EXPECT_EQ(metric_for_kind(AnswerKind::open_ended), MetricId::bleu4);
    EXPECT_EQ(metric_for_kind(AnswerKind::numeric), MetricId::relaxed_accuracy);
}

TEST(Aggregation, TableTwoAverage) {
    EXPECT_EQ(round2(split_average({90.00, 44.88})), 67.44);
    SplitResult aug, human;
    aug.label = "aug";
    aug.relaxed_acc = 90.00;
    human.label = "human";
    human.relaxed_acc = 44.88;
    const auto r = combine_splits({aug, human}, MetricId::relaxed_accuracy);
    ASSERT_TRUE(r.average.has_value());
    EXPECT_EQ(round2(*r.average), 67.44);
    const auto table = format_table({{"UniChart", r}});
    EXPECT_NE(table.find("aug"), std::string::npos);
    EXPECT_NE(table.find("avg."), std::string::npos);
    EXPECT_NE(table.find("67.44"), std::string::npos);
    EXPECT_NE(table.find("44.88"), std::string::npos);
    EXPECT_FALSE(combine_splits({aug}, MetricId::relaxed_accuracy).average.has_value());
}

TEST(Round2, HalfAwayFromZero) {
    EXPECT_EQ(round2(66.666666), 66.67);
    EXPECT_EQ(round2(2.005), 2.01);
    EXPECT_EQ(round2(-2.005), -2.01);
    EXPECT_EQ(round2(100.0), 100.0);
}

TEST(Reports, JsonRoundTripRecomputesAggregates) {
    const auto s1 = evaluate_split({"1", "2"}, {"1", "3"}, {AnswerKind::numeric, AnswerKind::numeric}, "aug");
    const auto s2 = evaluate_split({"a"}, {"a"}, {AnswerKind::textual}, "human");
    const auto r = combine_splits({s1, s2}, MetricId::relaxed_accuracy);
    const auto j = to_json(r);
    EXPECT_EQ(j["splits"][0]["items"].size(), 2u);
    const auto back = eval_result_from_json(nlohmann::json::parse(j.dump()));
    ASSERT_EQ(back.splits.size(), 2u);
    EXPECT_EQ(back.splits[0].relaxed_acc, 50.0);
    EXPECT_EQ(back.average, r.average);
    EXPECT_EQ(back.metric, MetricId::relaxed_accuracy);
}

TEST(Predictions, JsonlRoundTripAndGrouping) {
    testing::TempDir dir;
    std::vector<PredictionRecord> recs = {
        {"s1", "q1", "1", "1", AnswerKind::numeric, "aug"},
        {"s2", "q2", "no", "Yes", AnswerKind::textual, "aug"},
        {"s3", "q3", "x", "x", AnswerKind::textual, "human"},
    };
    write_predictions(dir / "p.jsonl", recs);
    const auto back = read_predictions(dir / "p.jsonl");
    ASSERT_EQ(back.size(), 3u);
    EXPECT_EQ(back[1].gold, "Yes");
    EXPECT_EQ(back[2].split, "human");
    const auto r = evaluate_predictions(back, MetricId::relaxed_accuracy);
    ASSERT_EQ(r.splits.size(), 2u);
    EXPECT_EQ(r.splits[0].label, "aug");
    EXPECT_EQ(r.splits[0].relaxed_acc, 50.0);
    EXPECT_EQ(r.splits[1].relaxed_acc, 100.0);
    EXPECT_EQ(*r.average, 75.0);

    testing::write_file(dir / "bad.jsonl", "{\"scene_id\": \"s\"}\n");
    EXPECT_THROW(read_predictions(dir / "bad.jsonl"), Error);
}

TEST(Predictions, SplitFieldIsOptional) {
    const auto r = prediction_from_json(
        nlohmann::json::parse(R"({"scene_id":"a","question":"q","pred":"1","gold":"1","kind":"numeric"})"));
    EXPECT_EQ(r.split, "test");
}

TEST(MetricId, Names) {
    for (const auto m : {MetricId::relaxed_accuracy, MetricId::exact_match, MetricId::bleu4}) {
        EXPECT_EQ(parse_metric_id(to_string(m)), m);
    }
    EXPECT_THROW(parse_metric_id("gpt-acc"), Error);
}

}  // namespace
}  // namespace chartgcl
