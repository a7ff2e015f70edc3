#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "medner/medner.hpp"
#include "oracles.hpp"

using namespace medner;
using Tags = std::vector<std::string>;

namespace {

struct Tiny {
    Corpus corpus;
    Model model;
};

Tiny tiny(bool trainable = false, std::uint64_t seed = 3) {
    auto corpus = fixtures::make_corpus({{{"aspirin", "10", "mg", "daily"}, {"B-Drug", "B-Dose", "I-Dose", "O"}},
                                         {{"no", "pain"}, {"O", "O"}},
                                         {{"give", "insulin", "now"}, {"O", "B-Drug", "O"}}},
                                        {"Drug", "Dose"});
    auto table = fixtures::random_table(fixtures::corpus_words(corpus), 8, 1);
    auto cfg = fixtures::small_config();
    cfg.trainable_embeddings = trainable;
    auto model = Model::create(cfg, corpus.schema, build_vocab(corpus), table, seed);
    return {corpus, model};
}

}  // namespace

TEST(CharCnn, ZeroWeightsGiveZero) {
    Matrix emb(4, 3, 0.7), w(2, 6), b(1, 2);
    std::vector<std::size_t> chars{2, 3, 2};
    EXPECT_EQ(char_cnn_forward(emb, w, b, chars, 2), (std::vector<double>{0.0, 0.0}));
}

TEST(CharCnn, HandConvolution) {
    Matrix emb(5, 1), w(1, 1, 2.0), b(1, 1);
    emb(2, 0) = 1.0;
    emb(3, 0) = -3.0;
    emb(4, 0) = 2.0;
    std::vector<std::size_t> chars{2, 3, 4};
    EXPECT_EQ(char_cnn_forward(emb, w, b, chars, 1), (std::vector<double>{4.0}));
}

TEST(CharCnn, ShortWordIsPadded) {
    Matrix emb(3, 2, 0.5), w(1, 4, 1.0), b(1, 1);
    emb(0, 0) = emb(0, 1) = -0.25;  // PAD row
    std::vector<std::size_t> chars{2};
    std::vector<std::size_t> arg;
    auto out = char_cnn_forward(emb, w, b, chars, 2, &arg);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_DOUBLE_EQ(out[0], 0.5);
    EXPECT_EQ(arg[0], 0u);
}

TEST(BiLstm, ZeroWeightsGiveZeroStates) {
    auto t = tiny();
    ParamSet p = t.model.params.zeros_like();
    Matrix x(3, p.fwd_wx.cols, 1.3);
    const Matrix h = bilstm_forward(p, x);
    for (double v : h.data) EXPECT_EQ(v, 0.0);
}

TEST(BiLstm, SingleStepByHand) {
    ParamSet p;
    p.fwd_wx = p.bwd_wx = Matrix(4, 1);
    p.fwd_wh = p.bwd_wh = Matrix(4, 1);
    p.fwd_b = p.bwd_b = Matrix(1, 4);
    const double wx[4] = {0.5, -0.3, 0.8, 1.2}, b[4] = {0.1, 0.2, -0.1, 0.0};
    for (int k = 0; k < 4; ++k) {
        p.fwd_wx.data[k] = p.bwd_wx.data[k] = wx[k];
        p.fwd_wh.data[k] = p.bwd_wh.data[k] = 9.0;  // unused: the previous state is zero
        p.fwd_b.data[k] = p.bwd_b.data[k] = b[k];
    }
    Matrix x(1, 1, 1.5);
    const Matrix h = bilstm_forward(p, x);
    EXPECT_NEAR(h(0, 0), 0.4364315622989766, 1e-15);
    EXPECT_NEAR(h(0, 1), 0.4364315622989766, 1e-15);
}

TEST(Emissions, Examples) {
    Matrix h(2, 3, 0.4);
    for (double v : emission_scores(Matrix(5, 3), Matrix(1, 5), h).data) EXPECT_EQ(v, 0.0);
    for (double v : emission_scores(Matrix(5, 3), Matrix(1, 5, 20.0), h).data) {
        EXPECT_LE(v, 1.0);
        EXPECT_GT(v, 1.0 - 1e-12);
    }
    const Matrix e = emission_scores(Matrix(1, 1, 1.0), Matrix(1, 1), Matrix(1, 1, 0.5));
    EXPECT_NEAR(e(0, 0), 0.46211715726000974, 1e-15);
}

TEST(ModelForward, DeterministicAndDropoutZeroMatchesEval) {
    auto t = tiny();
    const auto& s = t.corpus.sentences[0];
    EXPECT_EQ(model_forward(t.model, s).emissions, model_forward(t.model, s).emissions);
    DropoutContext none{0.0, 5, 3, 1};
    EXPECT_EQ(model_forward(t.model, s, none).emissions, model_forward(t.model, s).emissions);
    DropoutContext drop{0.5, 5, 3, 1};
    auto a = model_forward(t.model, s, drop).emissions;
    EXPECT_EQ(a, model_forward(t.model, s, drop).emissions);
    EXPECT_NE(a, model_forward(t.model, s).emissions);
}

TEST(ModelForward, DropoutMaskIsInverted) {
    DropoutContext ctx{0.3, 1, 0, 0};
    const Matrix m = detail::dropout_mask(200, 50, ctx, 0);
    double kept = 0.0;
    for (double v : m.data) {
        EXPECT_TRUE(v == 0.0 || std::abs(v - 1.0 / 0.7) < 1e-15);
        kept += v != 0.0;
    }
    EXPECT_NEAR(kept / static_cast<double>(m.size()), 0.7, 0.02);
}

TEST(ModelBackward, AbsentCharacterHasZeroGradient) {
    auto t = tiny();
    const auto absent = t.model.vocab.character("z");
    ASSERT_EQ(absent, Vocabulary::kUnk);
    const std::vector<Sentence> batch{t.corpus.sentences[1]};  // "no pain": no 'a', 's', 'd', ...
    const auto g = model_backward(t.model, batch).grad;
    const auto missing = t.model.vocab.character("s");
    ASSERT_NE(missing, Vocabulary::kUnk);
    for (double v : g.char_embedding.row(missing)) EXPECT_EQ(v, 0.0);
}

TEST(ModelBackward, MatchesFiniteDifferences) {
    auto t = tiny(true);
    auto r = gradcheck::check(t.model, t.corpus.sentences, 300, 10, 99);
    EXPECT_EQ(r.groups, ParamSet::kCount);
    EXPECT_LE(r.max_rel_error, 1e-4) << r.worst;
}

TEST(ModelBackward, MatchesFiniteDifferencesWithoutCharCnn) {
    auto t = tiny();
    auto cfg = t.model.config;
    cfg.use_char_cnn = false;
    auto m = Model::create(cfg, t.model.schema, t.model.vocab, t.model.embeddings, 4);
    auto r = gradcheck::check(m, t.corpus.sentences, 200, 10, 7);
    EXPECT_LE(r.max_rel_error, 1e-4) << r.worst;
}

TEST(ModelBackward, DropoutGradientMatchesMaskedLoss) {
    // With dropout the loss is a deterministic function of the parameters for
    // a fixed context, so finite differences apply to it as well.
    auto t = tiny();
    const auto& s = t.corpus.sentences[0];
    DropoutContext ctx{0.4, 11, 2, 0};
    ParamSet g = t.model.params.zeros_like();
    accumulate_sentence_gradient(t.model, s, g, ctx);
    auto loss = [&](const Model& m) {
        auto c = model_forward(m, s, ctx);
        auto gold = gold_indices(m, s);
        return crf_log_partition(c.emissions, m.params.transitions) -
               crf_score_sequence(c.emissions, m.params.transitions, gold);
    };
    Model m = t.model;
    for (std::size_t i = 0; i < m.params.fwd_wx.size(); i += 7) {
        const double orig = m.params.fwd_wx.data[i];
        m.params.fwd_wx.data[i] = orig + 1e-5;
        const double hi = loss(m);
        m.params.fwd_wx.data[i] = orig - 1e-5;
        const double lo = loss(m);
        m.params.fwd_wx.data[i] = orig;
        EXPECT_LE(gradcheck::relative_error(g.fwd_wx.data[i], (hi - lo) / 2e-5), 1e-4);
    }
}

TEST(ModelLoss, ForbiddenGoldTransitionNamesSentence) {
    auto t = tiny();
    Sentence bad = t.corpus.sentences[1];
    bad.tokens[0].tag = "I-Drug";
    bad.doc_id = "docX";
    bad.sent_index = 4;
    try {
        sentence_nll(t.model, bad);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("docX#4"), std::string::npos);
    }
    bad.tokens[0].tag = "B-Nope";
    EXPECT_THROW(sentence_nll(t.model, bad), SchemaError);
}

TEST(ModelLoss, BatchIsSumOfSentences) {
    auto t = tiny();
    double sum = 0.0;
    for (const auto& s : t.corpus.sentences) sum += sentence_nll(t.model, s);
    EXPECT_NEAR(crf_nll(t.model, t.corpus.sentences), sum, 1e-12);
    EXPECT_NEAR(model_backward(t.model, t.corpus.sentences).loss, sum, 1e-12);
}

TEST(Predict, MatchesBruteForceUnderDecodingMask) {
    auto t = tiny();
    Rng rng(4);
    for (auto& v : t.model.params.transitions.data) {
        if (v == 0.0) v = rng.uniform(-1.0, 1.0);
    }
    for (const auto& s : t.corpus.sentences) {
        auto p = predict(t.model, s);
        const Matrix em = model_forward(t.model, s).emissions;
        auto [path, score] = oracle::viterbi(em, decoding_transitions(t.model));
        EXPECT_EQ(p.tags, path);
        const Matrix marg = oracle::marginals(em, decoding_transitions(t.model));
        for (std::size_t i = 0; i < p.tags.size(); ++i) {
            EXPECT_NEAR(p.confidence[i], marg(i, p.tags[i]), 1e-9);
            EXPECT_GE(p.confidence[i], 0.0);
            EXPECT_LE(p.confidence[i], 1.0);
        }
        EXPECT_TRUE(validate_iob(t.model.schema.tags_of(p.tags), Scheme::IOB2).empty());
    }
    EXPECT_TRUE(predict(t.model, Sentence{}).tags.empty());
}

TEST(ModelCreate, SeededAndShaped) {
    auto a = tiny(false, 8), b = tiny(false, 8), c = tiny(false, 9);
    EXPECT_EQ(a.model.params, b.model.params);
    EXPECT_NE(a.model.params, c.model.params);
    EXPECT_EQ(a.model.params.transitions.rows, a.model.schema.num_tags() + 2);
    EXPECT_EQ(a.model.params.fwd_wx.cols, 8u + 3u);
    EXPECT_EQ(a.model.params.transitions(a.model.schema.start(), a.model.schema.tag_index("I-Drug")),
              kMaskedTransition);
}
