#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "medner/medner.hpp"

using namespace medner;
using Vec = std::vector<double>;

namespace {
Vec to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }
}  // namespace

TEST(ParseEmbeddings, TwoRowsAndMeanUnk) {
    auto t = parse_embeddings("a 1.0 2.0\nb 3.0 4.0", 2);
    EXPECT_EQ(t.size(), 2u);
    EXPECT_EQ(t.dimension(), 2u);
    EXPECT_EQ(to_vec(t.unk_vector()), (Vec{2.0, 3.0}));
}

TEST(ParseEmbeddings, WidthMismatchReportsLine) {
    try {
        parse_embeddings("a 1.0", 2);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 1u);
    }
    try {
        parse_embeddings("a 1 2\nb 1 2\nc 1\n", 0);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(ParseEmbeddings, DuplicateKeepsFirst) {
    log::set_quiet(true);
    auto t = parse_embeddings("a 1 1\na 9 9\n", 2);
    log::set_quiet(false);
    EXPECT_EQ(t.size(), 1u);
    EXPECT_EQ(to_vec(t.lookup("a")), (Vec{1.0, 1.0}));
}

TEST(ParseEmbeddings, HeaderInferredDimensionAndUnkRow) {
    auto t = parse_embeddings("2 3\nx 1 2 3\n<unk> 0 0 7\n", 0);
    EXPECT_EQ(t.dimension(), 3u);
    EXPECT_EQ(to_vec(t.lookup("nothing")), (Vec{0.0, 0.0, 7.0}));
}

TEST(ParseEmbeddings, EmptyAndNonFiniteAreErrors) {
    EXPECT_THROW(parse_embeddings("", 2), ParseError);
    EXPECT_THROW(parse_embeddings("a nan 1\n", 2), ParseError);
    EXPECT_THROW(parse_embeddings("a 1 x\n", 2), ParseError);
}

TEST(ParseEmbeddings, WriteRoundTripIsExact) {
    auto t = *fixtures::random_table({"alpha", "beta", "gamma"}, 5, 4);
    auto back = parse_embeddings(write_embeddings(t), 5);
    for (const auto& w : t.words()) EXPECT_EQ(to_vec(back.lookup(w)), to_vec(t.lookup(w)));
}

TEST(Lookup, Policies) {
    EmbeddingTable t(2, {"fever", "cough"}, {1, 2, 3, 4}, std::nullopt, OovPolicy::LowercaseThenUnk);
    EXPECT_EQ(to_vec(t.lookup("cough")), (Vec{3, 4}));
    EXPECT_EQ(to_vec(t.lookup("Fever")), (Vec{1, 2}));
    EXPECT_EQ(to_vec(t.lookup("rash")), (Vec{2, 3}));
    t.set_policy(OovPolicy::UnkRow);
    EXPECT_EQ(to_vec(t.lookup("Fever")), (Vec{2, 3}));
    t.set_policy(OovPolicy::Zero);
    EXPECT_EQ(to_vec(t.lookup("rash")), (Vec{0, 0}));
}

TEST(Lookup, TotalAndDimensionPreserving) {
    auto t = fixtures::random_table({"a", "b"}, 4, 1);
    for (const char* w : {"a", "b", "", "zzz", "\xC3\xA9"}) EXPECT_EQ(t->lookup(w).size(), 4u);
}

TEST(PoolMean, Examples) {
    EXPECT_EQ(pool_mean(std::vector<Vec>{{1, 3}}), (Vec{1, 3}));
    EXPECT_EQ(pool_mean(std::vector<Vec>{{0, 0}, {2, 4}}), (Vec{1, 2}));
    const Vec v{0.3, -1.7, 2.5};
    for (std::size_t k = 1; k <= 5; ++k) {
        auto m = pool_mean(std::vector<Vec>(k, v));
        for (std::size_t d = 0; d < v.size(); ++d) EXPECT_NEAR(m[d], v[d], 1e-15);
    }
    EXPECT_THROW(pool_mean(std::vector<Vec>{}), ValidationError);
    EXPECT_THROW(pool_mean(std::vector<Vec>{{1}, {1, 2}}), ValidationError);
}
