// medner: train, predict, evaluate, deidentify, convert.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "medner/cli/commands.hpp"

namespace {

using medner::cli::PipelineConfig;

enum ExitCode : int {
    kOk = 0,
    kIoError = 1,
    kUsage = 2,
    kParse = 3,
    kValidation = 4,
    kNumeric = 5,
    kModelFormat = 6,
    kGateFailed = 7,
};

// Expands "--config FILE" into "--key=value" arguments placed directly after
// the subcommand name, ahead of the user's flags. Every option keeps its last
// value, so explicit flags override the file.
std::vector<std::string> expand_config(std::vector<std::string> args) {
    for (std::size_t i = 1; i < args.size(); ++i) {
        std::string path;
        std::size_t consumed = 0;
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
            consumed = 2;
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            consumed = 1;
        } else {
            continue;
        }
        std::ifstream in(path);
        if (!in) throw medner::UsageError("cannot open config file " + path);
        std::vector<std::string> injected;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            auto b = line.find_first_not_of(" \t\r");
            if (b == std::string::npos || line[b] == '#') continue;
            auto eq = line.find('=');
            if (eq == std::string::npos) throw medner::ParseError(path + ": expected key=value", lineno);
            auto trim = [](std::string s) {
                auto l = s.find_first_not_of(" \t\r");
                if (l == std::string::npos) return std::string();
                return s.substr(l, s.find_last_not_of(" \t\r") - l + 1);
            };
            std::string key = trim(line.substr(0, eq));
            for (auto& c : key) {
                if (c == '_') c = '-';
            }
            injected.push_back("--" + key + "=" + trim(line.substr(eq + 1)));
        }
        args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + consumed));
        // args[1] is the subcommand name.
        args.insert(args.begin() + 2, injected.begin(), injected.end());
        return args;
    }
    return args;
}

void add_common(CLI::App* sub, PipelineConfig& cfg) {
    sub->add_option("-o,--output-dir", cfg.output_dir, "Directory for every output file")->capture_default_str();
    sub->add_option("--config", "key=value file; command-line flags override it");
    sub->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
    sub->add_option("--schema", cfg.schema_path, "Label schema file (entity types, scheme=...)");
    sub->add_option("--format", cfg.format, "Column layout of CoNLL inputs: tsv2, conll4, tokens")->capture_default_str();
    sub->add_option("--max-seq-length", cfg.max_seq_length, "Longer sentences are truncated")->capture_default_str();
}

void add_embeddings(CLI::App* sub, PipelineConfig& cfg) {
    sub->add_option("--embeddings", cfg.embeddings_path, "Word embedding text file");
    sub->add_option("--embed-dim", cfg.embed_dim, "Embedding dimension; 0 infers it from the file")->capture_default_str();
    sub->add_option("--oov-policy", cfg.oov_policy, "zero, unk_row or lowercase_then_unk");
}

std::string scheme_text(medner::Scheme s) { return std::string(medner::to_string(s)); }

}  // namespace

int main(int argc, char** argv) {
    PipelineConfig cfg;
    std::string scheme = "IOB2", from_scheme = "IOB2", to_scheme = "IOB2";
    double min_micro_f1 = -1.0;
    bool no_char_cnn = false, no_mask = false, quiet = false;

    CLI::App app{"Biomedical named entity recognition and de-identification pipeline"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.add_flag("-q,--quiet", quiet, "Suppress warnings");

    auto* train = app.add_subcommand("train", "Train a tagger (or grid-search one) on a tagged corpus");
    add_common(train, cfg);
    add_embeddings(train, cfg);
    train->add_option("--train", cfg.train_path, "Tagged training corpus");
    train->add_option("--val", cfg.val_path, "Tagged validation corpus (default: 15% of --train)");
    train->add_option("--grid", cfg.grid_path, "Grid file: 'name = v1, v2' per line");
    train->add_option("--scheme", scheme, "Tagging scheme of the corpora: IOB1 or IOB2")->capture_default_str();
    train->add_option("--learning-rate", cfg.train.learning_rate)->capture_default_str();
    train->add_option("--batch-size", cfg.train.batch_size)->capture_default_str();
    train->add_option("--max-epochs", cfg.train.max_epochs)->capture_default_str();
    train->add_option("--dropout", cfg.train.dropout)->capture_default_str();
    train->add_option("--warmup-steps", cfg.train.warmup_steps)->capture_default_str();
    train->add_option("--patience", cfg.train.patience)->capture_default_str();
    train->add_option("--grad-clip-norm", cfg.train.grad_clip_norm)->capture_default_str();
    train->add_option("--beta1", cfg.train.beta1)->capture_default_str();
    train->add_option("--beta2", cfg.train.beta2)->capture_default_str();
    train->add_option("--epsilon", cfg.train.epsilon)->capture_default_str();
    train->add_option("--lstm-state", cfg.model.lstm_state, "LSTM hidden size per direction")->capture_default_str();
    train->add_option("--char-dim", cfg.model.char_dim)->capture_default_str();
    train->add_option("--num-filters", cfg.model.num_filters)->capture_default_str();
    train->add_option("--filter-width", cfg.model.filter_width)->capture_default_str();
    train->add_option("--min-count", cfg.min_count, "Minimum word frequency for the vocabulary")->capture_default_str();
    train->add_flag("--no-char-cnn", no_char_cnn, "Word vectors only");
    train->add_flag("--trainable-embeddings", cfg.model.trainable_embeddings, "Learn a per-word correction");
    train->add_flag("--no-transition-mask", no_mask, "Do not pin illegal IOB2 transitions");

    auto* predict = app.add_subcommand("predict", "Tag raw text or a CoNLL file and emit chunk records");
    add_common(predict, cfg);
    add_embeddings(predict, cfg);
    predict->add_option("--model", cfg.model_path, "Model file from train");
    predict->add_option("--input", cfg.input_path, "Input file");
    predict->add_option("--input-format", cfg.input_format, "raw, tokens, tsv2 or conll4")->capture_default_str();
    predict->add_option("--abbreviations", cfg.abbreviations_path, "Sentence splitter abbreviation list");
    predict->add_option("--min-confidence", cfg.min_confidence, "Drop chunks below this confidence")->capture_default_str();
    predict->add_option("--aggregation", cfg.aggregation, "Chunk confidence: min or geomean")->capture_default_str();

    auto* evaluate = app.add_subcommand("evaluate", "Score predictions against a gold corpus");
    add_common(evaluate, cfg);
    add_embeddings(evaluate, cfg);
    evaluate->add_option("--gold", cfg.gold_path, "Tagged gold corpus");
    evaluate->add_option("--pred", cfg.pred_path, "Tagged predictions aligned with --gold");
    evaluate->add_option("--model", cfg.model_path, "Tag --gold with this model instead of --pred");
    evaluate->add_option("--scheme", scheme, "Tagging scheme of the corpora")->capture_default_str();
    evaluate->add_flag("--token-level", cfg.token_level, "Also report (and gate on) token-level scores");
    evaluate->add_option("--min-micro-f1", min_micro_f1, "Exit with code 7 when micro-F1 is below this");

    auto* deid = app.add_subcommand("deidentify", "Mask or substitute protected entities");
    add_common(deid, cfg);
    add_embeddings(deid, cfg);
    deid->add_option("--input", cfg.input_path, "Raw text, or a tagged CoNLL file with --input-format");
    deid->add_option("--input-format", cfg.input_format, "raw, tsv2 or conll4")->capture_default_str();
    deid->add_option("--scheme", scheme, "Tagging scheme of a tagged input")->capture_default_str();
    deid->add_option("--policy", cfg.policy_path, "Policy file");
    deid->add_option("--spans", cfg.spans_path, "Chunk records with offsets into the input");
    deid->add_option("--model", cfg.model_path, "Find entities with this model");
    deid->add_option("--abbreviations", cfg.abbreviations_path, "Sentence splitter abbreviation list");

    auto* convert = app.add_subcommand("convert", "Convert between CoNLL layouts and tagging schemes");
    add_common(convert, cfg);
    convert->add_option("--input", cfg.input_path, "Input corpus");
    convert->add_option("--from", cfg.from_format, "conll4 or tsv2")->capture_default_str();
    convert->add_option("--to", cfg.to_format, "conll4, tsv2 or chunk-records")->capture_default_str();
    convert->add_option("--from-scheme", from_scheme, "IOB1 or IOB2")->capture_default_str();
    convert->add_option("--to-scheme", to_scheme, "IOB1 or IOB2")->capture_default_str();

    try {
        std::vector<std::string> args(argv, argv + argc);
        args = expand_config(std::move(args));
        std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
        app.parse(std::move(reversed));

        medner::log::set_quiet(quiet);
        cfg.scheme = medner::parse_scheme(scheme);
        cfg.from_scheme = medner::parse_scheme(from_scheme);
        cfg.to_scheme = medner::parse_scheme(to_scheme);
        cfg.model.use_char_cnn = !no_char_cnn;
        cfg.model.use_transition_mask = !no_mask;
        if (min_micro_f1 >= 0.0) cfg.min_micro_f1 = min_micro_f1;
        for (auto* sub : app.get_subcommands()) cfg.seed_explicit = sub->count("--seed") > 0;

        if (*train) {
            auto out = medner::cli::cmd_train(cfg);
            std::printf("trained %zu epochs (best %zu), validation micro-F1 %.4f, model %s\n", out.fit.history.size(),
                        out.fit.best_epoch, out.validation.micro_f1, out.model_file.string().c_str());
        } else if (*predict) {
            auto out = medner::cli::cmd_predict(cfg);
            std::printf("%zu chunks in %zu sentences\n", out.chunks.size(), out.tagged.size());
        } else if (*evaluate) {
            auto out = medner::cli::cmd_evaluate(cfg);
            std::printf("micro-F1 %.4f macro-F1 %.4f\n", out.report.micro_f1, out.report.macro_f1);
            if (!out.passed) {
                std::fprintf(stderr, "medner: micro-F1 %.4f is below --min-micro-f1 %.4f\n", out.gated_metric,
                             *cfg.min_micro_f1);
                return kGateFailed;
            }
        } else if (*deid) {
            auto out = medner::cli::cmd_deidentify(cfg);
            std::size_t n = 0;
            for (const auto& [id, r] : out.documents) n += r.log.size();
            std::printf("%zu replacements in %zu documents\n", n, out.documents.size());
        } else if (*convert) {
            auto path = medner::cli::cmd_convert(cfg);
            std::printf("wrote %s (%s)\n", path.string().c_str(), scheme_text(cfg.to_scheme).c_str());
        }
        return kOk;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    } catch (const medner::UsageError& e) {
        std::fprintf(stderr, "medner: usage: %s\n", e.what());
        return kUsage;
    } catch (const medner::ParseError& e) {
        std::fprintf(stderr, "medner: parse error: %s\n", e.what());
        return kParse;
    } catch (const medner::SchemaError& e) {
        std::fprintf(stderr, "medner: schema error: %s\n", e.what());
        return kValidation;
    } catch (const medner::ValidationError& e) {
        std::fprintf(stderr, "medner: validation error: %s\n", e.what());
        return kValidation;
    } catch (const medner::NumericError& e) {
        std::fprintf(stderr, "medner: numeric error: %s\n", e.what());
        return kNumeric;
    } catch (const medner::ModelFormatError& e) {
        std::fprintf(stderr, "medner: model file error: %s\n", e.what());
        return kModelFormat;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "medner: %s\n", e.what());
        return kIoError;
    }
}
