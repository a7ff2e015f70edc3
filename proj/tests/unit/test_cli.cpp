#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "medner/cli/commands.hpp"

using namespace medner;
using medner::cli::PipelineConfig;
namespace fs = std::filesystem;

namespace {

const std::string kData = MEDNER_SAMPLES_DIR;

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("medner_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string put(const std::string& name, const std::string& content) const {
        write_file((dir_ / name).string(), content);
        return (dir_ / name).string();
    }
    std::string out(const std::string& sub) const { return (dir_ / sub).string(); }

    PipelineConfig train_config(const std::string& sub) const {
        PipelineConfig c;
        c.train_path = kData + "/train.tsv";
        c.val_path = kData + "/val.tsv";
        c.embeddings_path = kData + "/embeddings.txt";
        c.embed_dim = 16;
        c.model = fixtures::small_config(4, 4, 3, 8);
        c.train.max_epochs = 3;
        c.train.batch_size = 10;
        c.train.learning_rate = 0.01;
        c.output_dir = out(sub);
        return c;
    }

    fs::path dir_;
};

std::string tagged(const std::vector<fixtures::TaggedSentence>& sentences) {
    std::string text;
    for (const auto& [toks, tags] : sentences) {
        for (std::size_t i = 0; i < toks.size(); ++i) text += toks[i] + "\t" + tags[i] + "\n";
        text += "\n";
    }
    return text;
}

}  // namespace

TEST_F(CliTest, TrainWritesArtifactsAndModelReloads) {
    auto cfg = train_config("a");
    auto res = cli::cmd_train(cfg);
    for (const char* f : {"metrics.jsonl", "model.bin", "val_report.txt", "val_report.json"}) {
        EXPECT_TRUE(fs::exists(fs::path(cfg.output_dir) / f)) << f;
    }
    std::istringstream metrics(read_file(res.metrics_file.string()));
    std::string line;
    std::size_t n = 0;
    while (std::getline(metrics, line)) {
        auto j = nlohmann::json::parse(line);
        EXPECT_EQ(j["epoch"], ++n);
        EXPECT_TRUE(j.contains("train_loss") && j.contains("val_micro_f1") && j.contains("lr"));
    }
    EXPECT_EQ(n, res.fit.history.size());

    PipelineConfig pc;
    pc.model_path = res.model_file.string();
    pc.embeddings_path = cfg.embeddings_path;
    auto loaded = cli::detail::read_model(pc);
    const Corpus val = cli::detail::read_tagged(cfg.val_path, cfg, loaded.model.schema);
    const auto before = predict_corpus(res.fit.model, val);
    const auto after = predict_corpus(loaded.model, val);
    for (std::size_t i = 0; i < val.sentences.size(); ++i) {
        EXPECT_EQ(before.sentences[i].tags(), after.sentences[i].tags());
    }
}

TEST_F(CliTest, RepeatedTrainingIsByteIdentical) {
    auto a = cli::cmd_train(train_config("a"));
    auto b = cli::cmd_train(train_config("b"));
    EXPECT_EQ(read_file(a.metrics_file.string()), read_file(b.metrics_file.string()));
    EXPECT_EQ(read_file(a.model_file.string()), read_file(b.model_file.string()));
}

TEST_F(CliTest, TrainWithoutValidationSplitsTheTrainingFile) {
    auto cfg = train_config("a");
    cfg.val_path.clear();
    cfg.train.max_epochs = 1;
    auto res = cli::cmd_train(cfg);
    EXPECT_EQ(res.fit.history.size(), 1u);
}

TEST_F(CliTest, TrainRejectsMissingInputs) {
    auto cfg = train_config("a");
    cfg.embeddings_path.clear();
    EXPECT_THROW(cli::cmd_train(cfg), UsageError);
    cfg = train_config("a");
    cfg.train_path = out("nope.tsv");
    EXPECT_THROW(cli::cmd_train(cfg), UsageError);
    cfg = train_config("a");
    cfg.embed_dim = 8;
    EXPECT_THROW(cli::cmd_train(cfg), ParseError);
}

TEST_F(CliTest, GridSearchLogsEveryPoint) {
    auto cfg = train_config("a");
    cfg.train.max_epochs = 1;
    cfg.grid_path = put("grid.txt", "lstm_state = 4, 6\nlearning_rate = 0.01\n");
    cli::cmd_train(cfg);
    std::istringstream log(read_file(out("a/grid.jsonl")));
    std::string line;
    std::vector<std::string> states;
    while (std::getline(log, line)) states.push_back(nlohmann::json::parse(line)["lstm_state"]);
    EXPECT_EQ(states, (std::vector<std::string>{"4", "6"}));
}

class CliModelTest : public CliTest {
protected:
    void SetUp() override {
        CliTest::SetUp();
        model_ = cli::cmd_train(train_config("model")).model_file.string();
    }
    PipelineConfig predict_config(const std::string& input) const {
        PipelineConfig c;
        c.model_path = model_;
        c.embeddings_path = kData + "/embeddings.txt";
        c.input_path = input;
        c.output_dir = out("pred");
        return c;
    }
    std::string model_;
};

TEST_F(CliModelTest, PredictEmptyInputWritesHeaderOnly) {
    auto res = cli::cmd_predict(predict_config(put("empty.txt", "")));
    EXPECT_TRUE(res.chunks.empty());
    EXPECT_EQ(read_file(out("pred/chunks.tsv")), "doc\tsen\tbeg\tend\tchunk\tentity\tconf\n");
}

TEST_F(CliModelTest, PredictConfidencesAndThreshold) {
    auto cfg = predict_config(kData + "/notes.txt");
    auto all = cli::cmd_predict(cfg);
    for (const auto& c : all.chunks) {
        EXPECT_GE(c.confidence, 0.0);
        EXPECT_LE(c.confidence, 1.0);
    }
    cfg.min_confidence = 0.8;
    auto kept = cli::cmd_predict(cfg);
    std::size_t expected = 0;
    for (const auto& c : all.chunks) expected += c.confidence >= 0.8;
    EXPECT_EQ(kept.chunks.size(), expected);
    for (const auto& c : kept.chunks) EXPECT_GE(c.confidence, 0.8);
    cfg.min_confidence = 1.5;
    EXPECT_THROW(cli::cmd_predict(cfg), UsageError);
}

TEST_F(CliModelTest, PredictRejectsMismatchedSchema) {
    auto cfg = predict_config(kData + "/notes.txt");
    cfg.schema_path = put("schema.txt", "Drug\nDosage\nFrequency\n");
    EXPECT_THROW(cli::cmd_predict(cfg), SchemaError);
    cfg.schema_path = kData + "/schema.txt";
    EXPECT_NO_THROW(cli::cmd_predict(cfg));
}

TEST_F(CliModelTest, PredictRejectsCorruptModel) {
    std::string bytes = read_file(model_);
    bytes[bytes.size() - 3] ^= 0x5a;
    auto cfg = predict_config(kData + "/notes.txt");
    cfg.model_path = put("bad.bin", bytes);
    EXPECT_THROW(cli::cmd_predict(cfg), ChecksumError);
}

TEST_F(CliModelTest, EvaluateWithModelMatchesPredictions) {
    PipelineConfig cfg;
    cfg.gold_path = kData + "/test.tsv";
    cfg.model_path = model_;
    cfg.embeddings_path = kData + "/embeddings.txt";
    cfg.output_dir = out("eval");
    auto res = cli::cmd_evaluate(cfg);
    auto loaded = cli::detail::read_model(cfg);
    const Corpus gold = cli::detail::read_tagged(cfg.gold_path, cfg, std::nullopt);
    EXPECT_EQ(res.report.micro_f1, evaluate_corpora(gold, predict_corpus(loaded.model, gold)).micro_f1);
}

TEST_F(CliTest, EvaluateSelfScoresOne) {
    PipelineConfig cfg;
    cfg.gold_path = kData + "/test.tsv";
    cfg.pred_path = kData + "/test.tsv";
    cfg.output_dir = out("eval");
    auto res = cli::cmd_evaluate(cfg);
    EXPECT_EQ(res.report.micro_f1, 1.0);
    EXPECT_EQ(res.report.macro_f1, 1.0);
    auto j = nlohmann::json::parse(read_file(out("eval/report.json")));
    EXPECT_EQ(j["micro_f1"], 1.0);
}

TEST_F(CliTest, EvaluateHandFixtureAndGate) {
    const std::vector<std::string> toks{"a", "b", "c", "d", "e", "f", "g", "h", "i"};
    const std::vector<std::string> gold{"B-A", "O", "B-A", "O", "B-A", "O", "B-A", "O", "B-B"};
    const std::vector<std::string> pred{"B-A", "O", "B-A", "O", "O", "O", "O", "B-A", "B-B"};
    PipelineConfig cfg;
    cfg.gold_path = put("gold.tsv", tagged({{toks, gold}}));
    cfg.pred_path = put("pred.tsv", tagged({{toks, pred}}));
    cfg.output_dir = out("eval");
    cfg.min_micro_f1 = 0.7;
    auto res = cli::cmd_evaluate(cfg);
    EXPECT_EQ(res.report.micro_f1, 2.0 / 3.0);
    EXPECT_EQ(res.report.macro_f1, 11.0 / 14.0);
    EXPECT_FALSE(res.passed);
    cfg.min_micro_f1 = 0.6;
    EXPECT_TRUE(cli::cmd_evaluate(cfg).passed);

    cfg.token_level = true;
    cli::cmd_evaluate(cfg);
    auto j = nlohmann::json::parse(read_file(out("eval/report.json")));
    EXPECT_TRUE(j.contains("token_level"));
}

TEST_F(CliTest, EvaluateRejectsMisalignedFiles) {
    PipelineConfig cfg;
    cfg.gold_path = put("gold.tsv", tagged({{{"a", "b"}, {"B-A", "O"}}}));
    cfg.pred_path = put("pred.tsv", tagged({{{"a", "b", "c"}, {"B-A", "O", "O"}}}));
    cfg.output_dir = out("eval");
    EXPECT_THROW(cli::cmd_evaluate(cfg), ValidationError);
    cfg.pred_path.clear();
    EXPECT_THROW(cli::cmd_evaluate(cfg), UsageError);
}

TEST_F(CliTest, DeidentifyWorkedExample) {
    PipelineConfig cfg;
    cfg.input_path = kData + "/deid_example.tsv";
    cfg.input_format = "tsv2";
    cfg.policy_path = put("policy.txt", "defaults = mask\n");
    cfg.output_dir = out("deid");
    cli::cmd_deidentify(cfg);
    std::string expected;
    for (const auto& s : fixtures::deid_example_expected()) expected += (expected.empty() ? "" : "\n") + s;
    EXPECT_EQ(read_file(out("deid/deidentified.txt")), expected + "\n");
}

TEST_F(CliTest, DeidentifyEmptyPolicyIsIdentity) {
    PipelineConfig cfg;
    cfg.input_path = kData + "/deid_example.tsv";
    cfg.input_format = "tsv2";
    cfg.policy_path = put("policy.txt", "# nothing protected\n");
    cfg.output_dir = out("deid");
    auto res = cli::cmd_deidentify(cfg);
    ASSERT_EQ(res.documents.size(), 1u);
    EXPECT_TRUE(res.documents[0].second.log.empty());
    EXPECT_EQ(read_file(out("deid/replacement_log.jsonl")), "");
}

TEST_F(CliTest, DeidentifySubstitutionFollowsSeed) {
    put("names.txt", "Alex Morgan\nSam Lee\nJordan Diaz\n");
    PipelineConfig cfg;
    cfg.input_path = kData + "/deid_example.tsv";
    cfg.input_format = "tsv2";
    cfg.policy_path = put("policy.txt", "Name = substitute names.txt\nseed = 5\n");
    cfg.output_dir = out("d1");
    cli::cmd_deidentify(cfg);
    cfg.output_dir = out("d2");
    cli::cmd_deidentify(cfg);
    EXPECT_EQ(read_file(out("d1/deidentified.txt")), read_file(out("d2/deidentified.txt")));
    EXPECT_EQ(read_file(out("d1/replacement_log.jsonl")), read_file(out("d2/replacement_log.jsonl")));

    std::set<std::string> outputs;
    for (std::uint64_t seed : {1, 2, 3, 4, 5, 6, 7, 8}) {
        cfg.seed = seed;
        cfg.seed_explicit = true;
        cfg.output_dir = out("s" + std::to_string(seed));
        cli::cmd_deidentify(cfg);
        outputs.insert(read_file(out("s" + std::to_string(seed) + "/deidentified.txt")));
    }
    EXPECT_GT(outputs.size(), 1u);
}

TEST_F(CliTest, DeidentifyWithSpanFile) {
    PipelineConfig cfg;
    cfg.input_path = put("note.txt", "Seen by Dr Adams today.");
    cfg.spans_path = put("spans.tsv", "doc\tsen\tbeg\tend\tchunk\tentity\tconf\ndoc0\t0\t11\t15\tAdams\tName\t0.90\n");
    cfg.policy_path = put("policy.txt", "Name = mask\n");
    cfg.output_dir = out("deid");
    cli::cmd_deidentify(cfg);
    EXPECT_EQ(read_file(out("deid/deidentified.txt")), "Seen by Dr <NAME> today.\n");

    cfg.spans_path = put("spans2.tsv", "doc\tsen\tbeg\tend\tchunk\tentity\tconf\ndoc9\t0\t11\t15\tAdams\tName\t0.90\n");
    EXPECT_THROW(cli::cmd_deidentify(cfg), ValidationError);
    cfg.spans_path.clear();
    EXPECT_THROW(cli::cmd_deidentify(cfg), UsageError);
}

TEST_F(CliTest, ConvertRoundTrip) {
    PipelineConfig cfg;
    cfg.input_path = kData + "/train.tsv";
    cfg.from_format = "tsv2";
    cfg.to_format = "conll4";
    cfg.output_dir = out("c1");
    auto conll = cli::cmd_convert(cfg);
    cfg.input_path = conll.string();
    cfg.from_format = "conll4";
    cfg.to_format = "tsv2";
    cfg.output_dir = out("c2");
    auto back = cli::cmd_convert(cfg);
    const Corpus a = cli::detail::read_tagged(kData + "/train.tsv", PipelineConfig{}, std::nullopt);
    const Corpus b = cli::detail::read_tagged(back.string(), PipelineConfig{}, std::nullopt);
    ASSERT_EQ(a.sentences.size(), b.sentences.size());
    for (std::size_t i = 0; i < a.sentences.size(); ++i) {
        EXPECT_EQ(a.sentences[i].tags(), b.sentences[i].tags());
        for (std::size_t k = 0; k < a.sentences[i].size(); ++k) {
            EXPECT_EQ(a.sentences[i].tokens[k].surface, b.sentences[i].tokens[k].surface);
        }
    }
}

TEST_F(CliTest, ConvertIob1ToIob2) {
    PipelineConfig cfg;
    cfg.input_path = put("in.tsv", tagged({{{"a", "b", "c", "d", "e"}, {"I-A", "I-A", "O", "I-A", "B-A"}}}));
    cfg.from_format = "tsv2";
    cfg.from_scheme = Scheme::IOB1;
    cfg.output_dir = out("c");
    auto path = cli::cmd_convert(cfg);
    const Corpus c = cli::detail::read_tagged(path.string(), PipelineConfig{}, std::nullopt);
    ASSERT_EQ(c.sentences.size(), 1u);
    EXPECT_EQ(c.sentences[0].tags(), (std::vector<std::string>{"B-A", "I-A", "O", "B-A", "B-A"}));
}

TEST_F(CliTest, ConvertRejectsUnknownFormats) {
    PipelineConfig cfg;
    cfg.input_path = kData + "/train.tsv";
    cfg.output_dir = out("c");
    cfg.to_format = "xml";
    EXPECT_THROW(cli::cmd_convert(cfg), UsageError);
    cfg.to_format = "tsv2";
    cfg.from_format = "chunk-records";
    EXPECT_THROW(cli::cmd_convert(cfg), UsageError);
}
