#ifndef MEDNER_CLI_COMMANDS_HPP
#define MEDNER_CLI_COMMANDS_HPP

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "medner/medner.hpp"

// Subcommand bodies. Each reads its inputs from a PipelineConfig and writes
// only under `output_dir`.
namespace medner::cli {

namespace fs = std::filesystem;

struct PipelineConfig {
    // Paths
    std::string train_path;
    std::string val_path;
    std::string input_path;
    std::string gold_path;
    std::string pred_path;
    std::string embeddings_path;
    std::string schema_path;
    std::string model_path;
    std::string policy_path;
    std::string spans_path;
    std::string grid_path;
    std::string abbreviations_path;
    std::string output_dir = ".";

    TrainConfig train;
    ModelConfig model;
    std::size_t embed_dim = 768;  // 0 takes the width of the embedding file
    std::string oov_policy;       // empty: unk_row for training, the saved policy for a loaded model
    std::size_t min_count = 1;

    std::string format = "tsv2";         // column layout of CoNLL inputs
    std::string input_format = "raw";    // predict/deidentify input: raw, tokens, tsv2, conll4
    Scheme scheme = Scheme::IOB2;        // scheme of tagged inputs
    std::size_t max_seq_length = kDefaultMaxSeqLength;

    double min_confidence = 0.0;
    std::string aggregation = "min";
    std::optional<double> min_micro_f1;
    bool token_level = false;

    std::string from_format = "conll4";
    std::string to_format = "tsv2";
    Scheme from_scheme = Scheme::IOB2;
    Scheme to_scheme = Scheme::IOB2;

    std::uint64_t seed = 42;
    bool seed_explicit = false;  // a policy file's own seed yields to an explicit one
};

namespace detail {

inline void require(const std::string& path, const std::string& flag) {
    if (path.empty()) throw UsageError(flag + " is required");
    if (!fs::exists(path)) throw UsageError(flag + " " + path + " does not exist");
}

inline fs::path out_path(const PipelineConfig& cfg, const std::string& name) {
    fs::create_directories(cfg.output_dir);
    return fs::path(cfg.output_dir) / name;
}

inline Corpus read_tagged(const std::string& path, const PipelineConfig& cfg, const std::optional<LabelSchema>& schema,
                          bool strict = true) {
    ParseOptions opts;
    opts.columns = ColumnSpec::named(cfg.format);
    opts.schema = schema;
    opts.scheme = cfg.scheme;
    opts.strict = strict;
    opts.max_seq_length = cfg.max_seq_length;
    try {
        return parse_conll(read_file(path), opts);
    } catch (const ParseError& e) {
        throw e.in_file(path);
    } catch (const SchemaError& e) {
        throw SchemaError(path + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

inline std::optional<LabelSchema> read_schema(const PipelineConfig& cfg) {
    if (cfg.schema_path.empty()) return std::nullopt;
    require(cfg.schema_path, "--schema");
    try {
        return LabelSchema::parse(read_file(cfg.schema_path));
    } catch (const ParseError& e) {
        throw e.in_file(cfg.schema_path);
    }
}

inline std::shared_ptr<const EmbeddingTable> read_embeddings(const PipelineConfig& cfg, std::size_t dim,
                                                             OovPolicy policy) {
    require(cfg.embeddings_path, "--embeddings");
    return std::make_shared<const EmbeddingTable>(load_embeddings(cfg.embeddings_path, dim, policy));
}

/// Tokenized input for predict/deidentify: raw text or a CoNLL file.
inline Corpus read_input(const PipelineConfig& cfg, const std::optional<LabelSchema>& schema) {
    require(cfg.input_path, "--input");
    if (cfg.input_format == "raw") {
        SplitterOptions splitter;
        if (!cfg.abbreviations_path.empty()) {
            require(cfg.abbreviations_path, "--abbreviations");
            splitter = SplitterOptions::from_abbreviation_file(cfg.abbreviations_path);
        }
        return corpus_from_text(read_file(cfg.input_path), "doc0", splitter, cfg.max_seq_length);
    }
    PipelineConfig c = cfg;
    c.format = cfg.input_format;
    return read_tagged(cfg.input_path, c, schema, false);
}

inline LoadedModel read_model(const PipelineConfig& cfg) {
    require(cfg.model_path, "--model");
    const std::string bytes = read_file(cfg.model_path);
    const auto info = peek_model(bytes);
    const OovPolicy policy = parse_oov_policy(cfg.oov_policy.empty() ? info.oov_policy : cfg.oov_policy);
    return deserialize_model(bytes, read_embeddings(cfg, info.word_dim, policy));
}

/// Same scheme and the same entity types, in any order.
inline void check_schema(const Model& model, const std::optional<LabelSchema>& schema) {
    if (!schema) return;
    auto sorted = [](std::vector<std::string> v) {
        std::sort(v.begin(), v.end());
        return v;
    };
    if (schema->scheme() != model.schema.scheme() ||
        sorted(schema->entity_types()) != sorted(model.schema.entity_types())) {
        throw SchemaError("model schema " + model.schema.summary() + " does not match --schema " + schema->summary());
    }
}

inline std::vector<Chunk> predict_chunks(const Model& model, const Corpus& corpus, const PipelineConfig& cfg) {
    const auto agg = parse_aggregation(cfg.aggregation);
    const Matrix trans = decoding_transitions(model);
    std::vector<Chunk> out;
    for (const auto& s : corpus.sentences) {
        if (s.empty()) continue;
        auto p = predict_with(model, trans, s);
        for (auto& c : decode_chunks(s, model.schema.tags_of(p.tags), p.confidence, agg)) {
            if (c.confidence >= cfg.min_confidence) out.push_back(std::move(c));
        }
    }
    return out;
}

inline void write_text(const fs::path& path, std::string_view content) { write_file(path.string(), content); }

}  // namespace detail

struct TrainOutcome {
    FitResult fit;
    EvalReport validation;
    fs::path model_file;
    fs::path metrics_file;
};

/// Trains a model (or runs a grid search) and writes model.bin,
/// metrics.jsonl, val_report.txt and val_report.json.
inline TrainOutcome cmd_train(const PipelineConfig& cfg) {
    detail::require(cfg.train_path, "--train");
    detail::require(cfg.embeddings_path, "--embeddings");
    if (!cfg.grid_path.empty()) detail::require(cfg.grid_path, "--grid");
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    tc.validate();

    auto schema = detail::read_schema(cfg);
    Corpus train = detail::read_tagged(cfg.train_path, cfg, schema);
    if (!schema) schema = train.schema;
    Corpus val;
    if (!cfg.val_path.empty()) {
        detail::require(cfg.val_path, "--val");
        val = detail::read_tagged(cfg.val_path, cfg, schema);
    } else {
        auto split = split_corpus(train, {0.85, 0.15, 0.0}, cfg.seed);
        train = std::move(split.train);
        val = std::move(split.validation);
    }
    if (train.empty()) throw ValidationError(cfg.train_path + ": training corpus is empty");

    const OovPolicy policy = cfg.oov_policy.empty() ? OovPolicy::UnkRow : parse_oov_policy(cfg.oov_policy);
    auto table = detail::read_embeddings(cfg, cfg.embed_dim, policy);
    auto vocab = build_vocab(train, cfg.min_count);

    TrainOutcome out;
    out.metrics_file = detail::out_path(cfg, "metrics.jsonl");
    std::ofstream metrics(out.metrics_file, std::ios::binary);
    if (!metrics) throw IoError("cannot write " + out.metrics_file.string());

    if (!cfg.grid_path.empty()) {
        ConfigGrid grid;
        try {
            grid = parse_grid(read_file(cfg.grid_path));
        } catch (const ParseError& e) {
            throw e.in_file(cfg.grid_path);
        }
        auto points = expand_grid(grid, GridPoint{tc, cfg.model});
        std::ofstream grid_log(detail::out_path(cfg, "grid.jsonl"), std::ios::binary);
        auto res = grid_search(points, *schema, vocab, table, train, val, [&](std::size_t i, const GridScore& s) {
            nlohmann::json j;
            j["point"] = i;
            const auto values = grid_values(grid, i);
            for (std::size_t k = 0; k < grid.size(); ++k) j[grid[k].first] = values[k];
            j["val_micro_f1"] = s.val_micro_f1;
            j["parameters"] = s.parameter_count;
            grid_log << j.dump() << "\n";
        });
        tc = res.scores[res.best_index].point.train;
        out.fit = std::move(res.best_fit);
        for (const auto& r : out.fit.history) metrics << format_epoch_record(r) << "\n";
    } else {
        auto model = Model::create(cfg.model, *schema, vocab, table, tc.seed);
        out.fit = fit(std::move(model), train, val, tc, [&](const EpochRecord& r) {
            metrics << format_epoch_record(r) << "\n";
            metrics.flush();
        });
    }
    metrics.close();

    out.model_file = detail::out_path(cfg, "model.bin");
    save_model(out.fit.model, out.model_file.string(), tc);
    const Corpus& monitor = val.empty() ? train : val;
    out.validation = evaluate_corpora(monitor, predict_corpus(out.fit.model, monitor));
    detail::write_text(detail::out_path(cfg, "val_report.txt"), format_report(out.validation));
    detail::write_text(detail::out_path(cfg, "val_report.json"), report_json(out.validation).dump(2) + "\n");
    return out;
}

struct PredictOutcome {
    std::vector<Chunk> chunks;
    Corpus tagged;
};

/// Tags the input and writes chunks.tsv (chunk records) and predictions.tsv
/// (token/tag columns).
inline PredictOutcome cmd_predict(const PipelineConfig& cfg) {
    if (!(cfg.min_confidence >= 0.0 && cfg.min_confidence <= 1.0)) {
        throw UsageError("--min-confidence must lie in [0, 1]");
    }
    auto loaded = detail::read_model(cfg);
    auto schema = detail::read_schema(cfg);
    detail::check_schema(loaded.model, schema);
    Corpus input = detail::read_input(cfg, std::nullopt);

    PredictOutcome out;
    out.chunks = detail::predict_chunks(loaded.model, input, cfg);
    out.tagged = predict_corpus(loaded.model, input);
    detail::write_text(detail::out_path(cfg, "chunks.tsv"), write_chunk_records(out.chunks));
    detail::write_text(detail::out_path(cfg, "predictions.tsv"), write_conll(out.tagged, ColumnSpec::tsv2()));
    return out;
}

struct EvaluateOutcome {
    EvalReport report;
    double gated_metric = 0.0;  // entity micro-F1, or token-level micro-F1 with --token-level
    bool passed = true;
};

/// Token-level micro-F1 over entity tags (O excluded).
inline double token_micro_f1(const EvalReport& r) {
    TypeCounts total;
    for (const auto& t : r.tag_scores) {
        total.tp += t.correct;
        total.fp += t.predicted - t.correct;
        total.fn += t.support - t.correct;
    }
    return f1(total);
}

inline double token_macro_f1(const EvalReport& r) {
    if (r.tag_scores.empty()) return 0.0;
    double s = 0.0;
    for (const auto& t : r.tag_scores) s += t.f1;
    return s / static_cast<double>(r.tag_scores.size());
}

/// Scores predictions (a file, or a model run on the gold tokens) against a
/// gold corpus; writes report.txt and report.json.
inline EvaluateOutcome cmd_evaluate(const PipelineConfig& cfg) {
    detail::require(cfg.gold_path, "--gold");
    auto schema = detail::read_schema(cfg);
    Corpus gold = detail::read_tagged(cfg.gold_path, cfg, schema);
    Corpus pred;
    if (!cfg.pred_path.empty()) {
        detail::require(cfg.pred_path, "--pred");
        pred = detail::read_tagged(cfg.pred_path, cfg, std::nullopt);
    } else if (!cfg.model_path.empty()) {
        auto loaded = detail::read_model(cfg);
        pred = predict_corpus(loaded.model, gold);
    } else {
        throw UsageError("evaluate needs --pred or --model");
    }

    EvaluateOutcome out;
    out.report = evaluate_corpora(gold, pred);
    std::string text = format_report(out.report);
    auto j = report_json(out.report);
    if (cfg.token_level) {
        text += "token-level micro-F1 " + medner::detail::fixed4(token_micro_f1(out.report)) +
                "\ntoken-level macro-F1 " + medner::detail::fixed4(token_macro_f1(out.report)) + "\n";
        j["token_level"] = {{"micro_f1", token_micro_f1(out.report)}, {"macro_f1", token_macro_f1(out.report)}};
    }
    out.gated_metric = cfg.token_level ? token_micro_f1(out.report) : out.report.micro_f1;
    if (cfg.min_micro_f1) {
        out.passed = out.gated_metric >= *cfg.min_micro_f1;
        j["gate"] = {{"min_micro_f1", *cfg.min_micro_f1}, {"passed", out.passed}};
    }
    detail::write_text(detail::out_path(cfg, "report.txt"), text);
    detail::write_text(detail::out_path(cfg, "report.json"), j.dump(2) + "\n");
    return out;
}

struct DeidOutcome {
    std::vector<std::pair<std::string, DeidResult>> documents;  // (doc id, result) in input order
};

/// De-identifies every document of the input. Chunks come from the input's
/// own tags (CoNLL input), a chunk-record file (--spans) or a model.
/// Writes deidentified.txt (documents separated by a blank line) and
/// replacement_log.jsonl.
inline DeidOutcome cmd_deidentify(const PipelineConfig& cfg) {
    detail::require(cfg.policy_path, "--policy");
    DeidPolicy policy;
    try {
        policy = DeidPolicy::parse(read_file(cfg.policy_path), fs::path(cfg.policy_path).parent_path());
    } catch (const ParseError& e) {
        throw e.in_file(cfg.policy_path);
    }
    if (cfg.seed_explicit || policy.seed == 0) policy.seed = cfg.seed;
    policy.validate();

    const bool tagged_input = cfg.input_format != "raw" && cfg.input_format != "tokens";
    if (!cfg.spans_path.empty() && !cfg.model_path.empty()) throw UsageError("give --spans or --model, not both");
    if (!tagged_input && cfg.spans_path.empty() && cfg.model_path.empty()) {
        throw UsageError("untagged input needs --spans or --model");
    }

    std::optional<LoadedModel> loaded;
    if (!cfg.model_path.empty()) loaded = detail::read_model(cfg);
    Corpus corpus = detail::read_input(cfg, std::nullopt);

    // Chunks per document, offsets relative to the document text.
    std::map<std::string, std::vector<Chunk>> by_doc;
    if (!cfg.spans_path.empty()) {
        detail::require(cfg.spans_path, "--spans");
        try {
            for (auto& c : parse_chunk_records(read_file(cfg.spans_path))) by_doc[c.doc_id].push_back(std::move(c));
        } catch (const ParseError& e) {
            throw e.in_file(cfg.spans_path);
        }
        for (const auto& [doc, chunks] : by_doc) {
            if (!corpus.find_document(doc)) throw ValidationError(cfg.spans_path + ": unknown document '" + doc + "'");
        }
    } else if (loaded) {
        for (auto& c : detail::predict_chunks(loaded->model, corpus, cfg)) by_doc[c.doc_id].push_back(std::move(c));
    } else {
        for (const auto& s : corpus.sentences) {
            for (auto& c : decode_chunks(s, s.tags())) by_doc[c.doc_id].push_back(std::move(c));
        }
    }

    DeidOutcome out;
    std::string text, log;
    for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
        const auto& doc = corpus.documents[d];
        DeidResult r;
        try {
            r = apply_policy(doc.text, by_doc[doc.id], policy);
        } catch (const ValidationError& e) {
            throw ValidationError("document " + doc.id + ": " + e.what());
        }
        if (d) text += "\n\n";
        text += r.text;
        for (const auto& rep : r.log) log += replacement_json(rep, doc.id).dump() + "\n";
        out.documents.emplace_back(doc.id, std::move(r));
    }
    if (!text.empty()) text += "\n";
    detail::write_text(detail::out_path(cfg, "deidentified.txt"), text);
    detail::write_text(detail::out_path(cfg, "replacement_log.jsonl"), log);
    return out;
}

/// Converts between column formats and tagging schemes. chunk-records is an
/// output format only, since records do not carry the untagged tokens.
inline fs::path cmd_convert(const PipelineConfig& cfg) {
    detail::require(cfg.input_path, "--input");
    auto known = [](const std::string& f) { return f == "conll4" || f == "tsv2" || f == "chunk-records"; };
    if (!known(cfg.from_format)) throw UsageError("unknown format '" + cfg.from_format + "' (expected conll4, tsv2, chunk-records)");
    if (!known(cfg.to_format)) throw UsageError("unknown format '" + cfg.to_format + "' (expected conll4, tsv2, chunk-records)");
    if (cfg.from_format == "chunk-records") throw UsageError("chunk-records can only be written, not read");

    PipelineConfig in = cfg;
    in.format = cfg.from_format;
    in.scheme = cfg.from_scheme;
    Corpus corpus = detail::read_tagged(cfg.input_path, in, detail::read_schema(cfg));

    if (cfg.to_format == "chunk-records") {
        std::vector<Chunk> chunks;
        for (const auto& s : corpus.sentences) {
            for (auto& c : decode_chunks(s, s.tags())) chunks.push_back(std::move(c));
        }
        auto path = detail::out_path(cfg, "converted.chunks.tsv");
        detail::write_text(path, write_chunk_records(chunks));
        return path;
    }
    auto path = detail::out_path(cfg, cfg.to_format == "conll4" ? "converted.conll" : "converted.tsv");
    detail::write_text(path, write_conll(corpus, ColumnSpec::named(cfg.to_format), cfg.to_scheme));
    return path;
}

}  // namespace medner::cli

#endif  // MEDNER_CLI_COMMANDS_HPP
