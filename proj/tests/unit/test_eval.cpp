#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "medner/medner.hpp"
#include "oracles.hpp"

using namespace medner;
using Tags = std::vector<std::string>;
using Seqs = std::vector<Tags>;

namespace {

std::vector<EntityRef> refs(const std::string& type, std::vector<std::pair<std::size_t, std::size_t>> spans) {
    std::vector<EntityRef> out;
    for (auto [f, l] : spans) out.push_back({0, type, f, l});
    return out;
}

Tags random_tags(Rng& rng, std::size_t n, const Tags& types) {
    Tags t;
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = rng.below(1 + 2 * types.size());
        if (r == 0) {
            t.push_back("O");
        } else {
            const auto& type = types[(r - 1) / 2];
            const bool inside = (r - 1) % 2 == 1 && i > 0 && t.back() != "O" && t.back().substr(2) == type;
            t.push_back((inside ? "I-" : "B-") + type);
        }
    }
    return t;
}

}  // namespace

TEST(EntityCounts, PerfectAndEmpty) {
    auto gold = refs("X", {{0, 1}, {3, 3}});
    auto c = entity_match_counts(gold, gold);
    EXPECT_EQ(c["X"], (TypeCounts{2, 0, 0}));
    c = entity_match_counts(gold, {});
    EXPECT_EQ(c["X"], (TypeCounts{0, 0, 2}));
}

TEST(EntityCounts, HandCount) {
    auto gold = refs("X", {{0, 0}, {2, 3}, {5, 5}, {7, 8}});
    auto pred = refs("X", {{0, 0}, {2, 3}, {6, 6}});
    EXPECT_EQ(entity_match_counts(gold, pred)["X"], (TypeCounts{2, 1, 2}));
}

TEST(EntityCounts, DuplicatePredictionIsOneMoreFalsePositive) {
    auto gold = refs("X", {{0, 1}});
    auto pred = refs("X", {{0, 1}, {0, 1}});
    EXPECT_EQ(entity_match_counts(gold, pred)["X"], (TypeCounts{1, 1, 0}));
}

TEST(MicroMacro, HandFixture) {
    CountTable c{{"A", {2, 1, 2}}, {"B", {1, 0, 0}}};
    EXPECT_EQ(f1(c["A"]), 4.0 / 7.0);
    EXPECT_EQ(macro_f1(c), 11.0 / 14.0);
    EXPECT_EQ(micro_f1(c), 2.0 / 3.0);
}

TEST(MicroMacro, SingleTypePerfect) {
    CountTable c{{"A", {3, 0, 0}}};
    EXPECT_EQ(micro_f1(c), 1.0);
    EXPECT_EQ(macro_f1(c), 1.0);
}

TEST(MicroMacro, ZeroCountsAndExclusion) {
    EXPECT_EQ(f1(TypeCounts{}), 0.0);
    CountTable c{{"A", {1, 0, 0}}, {"Unused", {0, 0, 0}}, {"Missed", {0, 0, 2}}};
    EXPECT_DOUBLE_EQ(macro_f1(c), 0.5);
}

TEST(TagReport, HandCount) {
    auto r = tag_report({"B-X", "I-X", "O", "B-X"}, {"B-X", "O", "O", "B-X"});
    ASSERT_EQ(r.size(), 2u);
    EXPECT_EQ(r[0].tag, "B-X");
    EXPECT_EQ(r[0].precision, 1.0);
    EXPECT_EQ(r[0].recall, 1.0);
    EXPECT_EQ(r[1].tag, "I-X");
    EXPECT_EQ(r[1].precision, 0.0);
    EXPECT_EQ(r[1].recall, 0.0);
    EXPECT_EQ(r[1].predicted, 0u);
}

TEST(TagReport, IdenticalAndAllOutside) {
    for (const auto& s : tag_report({"B-X", "I-X", "B-Y"}, {"B-X", "I-X", "B-Y"})) EXPECT_EQ(s.f1, 1.0);
    EXPECT_TRUE(tag_report({"O", "O"}, {"O", "O"}).empty());
    EXPECT_THROW(tag_report({"O"}, {"O", "O"}), ValidationError);
}

TEST(TokenAccuracy, Examples) {
    EXPECT_EQ(token_accuracy({"O", "B-X"}, {"O", "B-X"}), 1.0);
    EXPECT_EQ(token_accuracy({"O", "B-X"}, {"B-X", "O"}), 0.0);
    EXPECT_EQ(token_accuracy({"O", "O", "O", "B-X"}, {"O", "O", "O", "O"}), 0.75);
    EXPECT_THROW(token_accuracy({"O"}, {}), ValidationError);
}

TEST(Evaluate, MatchesRecountAndProperties) {
    Rng rng(5);
    const Tags types{"A", "B", "C"};
    for (int k = 0; k < 100; ++k) {
        Seqs gold, pred;
        for (std::size_t s = 0, n = 1 + rng.below(6); s < n; ++s) {
            const std::size_t len = 1 + rng.below(8);
            gold.push_back(random_tags(rng, len, types));
            pred.push_back(random_tags(rng, len, types));
        }
        auto r = evaluate(gold, pred);
        EXPECT_EQ(r.micro_f1, oracle::recount_micro_f1(gold, pred));

        double lo = 1.0, hi = 0.0;
        bool any = false;
        for (const auto& [t, c] : r.per_type) {
            if (c.tp + c.fp + c.fn == 0) continue;
            any = true;
            lo = std::min(lo, f1(c));
            hi = std::max(hi, f1(c));
        }
        if (any) {
            EXPECT_LE(lo, r.macro_f1 + 1e-15);
            EXPECT_GE(hi, r.macro_f1 - 1e-15);
        }

        auto swapped = evaluate(pred, gold);
        for (const auto& [t, c] : r.per_type) {
            const auto& s = swapped.per_type[t];
            EXPECT_EQ(precision(c), recall(s));
            EXPECT_EQ(recall(c), precision(s));
            EXPECT_NEAR(f1(c), f1(s), 1e-15);
        }
    }
}

TEST(EvaluateCorpora, SelfIsPerfectAndMisalignmentNamesSentence) {
    auto gold = fixtures::make_corpus({{{"a", "b"}, {"B-X", "I-X"}}, {{"c"}, {"B-Y"}}}, {"X", "Y"});
    auto r = evaluate_corpora(gold, gold);
    EXPECT_EQ(r.micro_f1, 1.0);
    EXPECT_EQ(r.macro_f1, 1.0);
    EXPECT_EQ(r.sentence_accuracy(), 1.0);

    auto shorter = gold;
    shorter.sentences.pop_back();
    EXPECT_THROW(evaluate_corpora(gold, shorter), ValidationError);
    auto bad = gold;
    bad.sentences[1].tokens.push_back(bad.sentences[1].tokens[0]);
    try {
        evaluate_corpora(gold, bad);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("doc0#1"), std::string::npos) << e.what();
    }
}

TEST(Report, TextAndJson) {
    auto r = evaluate({{"B-X", "I-X", "O", "B-Y"}}, {{"B-X", "I-X", "O", "O"}});
    const auto text = format_report(r);
    EXPECT_NE(text.find("B-X"), std::string::npos);
    EXPECT_NE(text.find("micro"), std::string::npos);
    auto j = report_json(r);
    EXPECT_DOUBLE_EQ(j["micro_f1"].get<double>(), r.micro_f1);
    EXPECT_EQ(j["entity_types"]["Y"]["fn"].get<int>(), 1);
}
