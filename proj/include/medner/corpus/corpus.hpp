#ifndef MEDNER_CORPUS_CORPUS_HPP
#define MEDNER_CORPUS_CORPUS_HPP

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "medner/corpus/schema.hpp"
#include "medner/corpus/text.hpp"
#include "medner/util/error.hpp"
#include "medner/util/log.hpp"
#include "medner/util/utf8.hpp"

namespace medner {

inline constexpr std::size_t kDefaultMaxSeqLength = 512;

struct Sentence {
    std::vector<Token> tokens;
    std::string doc_id;
    std::size_t sent_index = 0;

    std::size_t size() const noexcept { return tokens.size(); }
    bool empty() const noexcept { return tokens.empty(); }
    bool tagged() const noexcept { return !tokens.empty() && tokens.front().tag.has_value(); }

    std::vector<std::string> surfaces() const {
        std::vector<std::string> out;
        out.reserve(tokens.size());
        for (const auto& t : tokens) out.push_back(t.surface);
        return out;
    }

    /// Tags of a tagged sentence; untagged tokens read as "O".
    std::vector<std::string> tags() const {
        std::vector<std::string> out;
        out.reserve(tokens.size());
        for (const auto& t : tokens) out.push_back(t.tag.value_or("O"));
        return out;
    }

    void set_tags(const std::vector<std::string>& tags) {
        if (tags.size() != tokens.size()) throw ValidationError("tag count does not match token count");
        for (std::size_t i = 0; i < tags.size(); ++i) tokens[i].tag = tags[i];
    }

    bool operator==(const Sentence&) const = default;
};

struct Document {
    std::string id;
    std::string text;

    bool operator==(const Document&) const = default;
};

/// Sentences in document order. Tags are held in canonical IOB2 form; the
/// schema's scheme only governs import and export.
struct Corpus {
    std::vector<Sentence> sentences;
    LabelSchema schema;
    std::vector<Document> documents;

    std::size_t size() const noexcept { return sentences.size(); }
    bool empty() const noexcept { return sentences.empty(); }

    const Document* find_document(std::string_view id) const {
        for (const auto& d : documents) {
            if (d.id == id) return &d;
        }
        return nullptr;
    }
};

/// Which whitespace-separated columns hold the token and the tag.
struct ColumnSpec {
    std::size_t columns = 2;
    std::size_t token_col = 0;
    std::optional<std::size_t> tag_col = 1;

    static ColumnSpec tsv2() { return {2, 0, 1}; }
    static ColumnSpec conll4() { return {4, 0, 3}; }
    static ColumnSpec tokens_only() { return {1, 0, std::nullopt}; }

    static ColumnSpec named(std::string_view name) {
        if (name == "tsv2") return tsv2();
        if (name == "conll4") return conll4();
        if (name == "tokens") return tokens_only();
        throw UsageError("unknown column format '" + std::string(name) + "' (expected conll4, tsv2 or tokens)");
    }
};

struct ParseOptions {
    ColumnSpec columns = ColumnSpec::tsv2();
    /// Known schema. Without one, entity types are collected in order of
    /// first appearance.
    std::optional<LabelSchema> schema;
    /// Unknown tags are a SchemaError when strict, otherwise read as "O".
    bool strict = true;
    /// Scheme of the file; defaults to the schema's scheme, else IOB2.
    std::optional<Scheme> scheme;
    std::size_t max_seq_length = kDefaultMaxSeqLength;
};

namespace detail {

inline void truncate_sentence(Sentence& s, std::size_t max_len) {
    if (max_len == 0 || s.tokens.size() <= max_len) return;
    log::warn("sentence " + std::to_string(s.sent_index) + " of " + s.doc_id + " has " +
              std::to_string(s.tokens.size()) + " tokens; truncated to " + std::to_string(max_len));
    s.tokens.resize(max_len);
    // A cut through a chunk leaves a valid IOB2 prefix, nothing to repair.
}

inline std::vector<std::string> split_ws(std::string_view line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        if (i >= line.size()) break;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
        out.emplace_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

}  // namespace detail

/// Reads CoNLL-style column data. Blank lines end sentences and "-DOCSTART-"
/// lines start documents. Document text is synthesized by joining tokens with
/// single spaces and sentences with single newlines; token offsets point into
/// that text. Tags are validated under the file's scheme and stored as IOB2.
inline Corpus parse_conll(std::string_view text, const ParseOptions& opts = {}) {
    const Scheme file_scheme = opts.scheme.value_or(opts.schema ? opts.schema->scheme() : Scheme::IOB2);
    const auto& spec = opts.columns;
    if (spec.token_col >= spec.columns || (spec.tag_col && *spec.tag_col >= spec.columns)) {
        throw UsageError("column spec refers to a column beyond its width");
    }

    Corpus corpus;
    std::vector<std::string> seen_types;

    struct Pending {
        std::vector<std::string> surfaces;
        std::vector<std::string> tags;
        std::size_t first_line = 0;
    } pending;

    std::size_t doc_counter = 0;
    std::string doc_text;
    std::size_t doc_len = 0;  // code points in doc_text
    std::size_t sent_in_doc = 0;
    bool doc_started = false;

    auto finish_document = [&]() {
        if (doc_started) corpus.documents.push_back({"doc" + std::to_string(doc_counter), doc_text});
        if (doc_started) ++doc_counter;
        doc_text.clear();
        doc_len = 0;
        sent_in_doc = 0;
        doc_started = false;
    };

    auto flush_sentence = [&]() {
        if (pending.surfaces.empty()) return;
        const bool tagged = spec.tag_col.has_value();
        std::vector<std::string> tags = pending.tags;
        if (tagged) {
            auto v = validate_iob(tags, file_scheme);
            if (!v.empty()) {
                throw ValidationError("sentence starting at line " + std::to_string(pending.first_line) +
                                      ": invalid " + std::string(to_string(file_scheme)) + " tags: " + describe(v));
            }
            tags = convert_scheme(tags, file_scheme, Scheme::IOB2);
        }
        Sentence s;
        s.doc_id = "doc" + std::to_string(doc_counter);
        s.sent_index = sent_in_doc++;
        for (std::size_t i = 0; i < pending.surfaces.size(); ++i) {
            Token t;
            t.surface = pending.surfaces[i];
            if (tagged) t.tag = tags[i];
            s.tokens.push_back(std::move(t));
        }
        detail::truncate_sentence(s, opts.max_seq_length);
        if (!doc_text.empty()) {
            doc_text += '\n';
            ++doc_len;
        }
        for (std::size_t i = 0; i < s.tokens.size(); ++i) {
            if (i) {
                doc_text += ' ';
                ++doc_len;
            }
            const std::size_t len = utf8::length(s.tokens[i].surface);
            s.tokens[i].begin = doc_len;
            s.tokens[i].end = doc_len + len - 1;
            doc_text += s.tokens[i].surface;
            doc_len += len;
        }
        doc_started = true;
        corpus.sentences.push_back(std::move(s));
        pending = {};
    };

    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!utf8::try_decode(line)) throw ParseError("invalid UTF-8", lineno);

        auto fields = detail::split_ws(line);
        if (fields.empty()) {
            flush_sentence();
            continue;
        }
        if (fields[0] == "-DOCSTART-") {
            flush_sentence();
            finish_document();
            continue;
        }
        if (fields.size() != spec.columns) {
            throw ParseError("expected " + std::to_string(spec.columns) + " columns, found " +
                                 std::to_string(fields.size()),
                             lineno);
        }
        if (pending.surfaces.empty()) pending.first_line = lineno;
        pending.surfaces.push_back(fields[spec.token_col]);
        if (spec.tag_col) {
            std::string tag = fields[*spec.tag_col];
            auto parts = split_tag(tag);
            if (!parts) throw ParseError("malformed tag '" + tag + "'", lineno);
            if (opts.schema) {
                if (!opts.schema->find_tag(tag) && parts->prefix != 'O') {
                    if (opts.strict) {
                        throw SchemaError("line " + std::to_string(lineno) + ": tag '" + tag +
                                          "' is not in the label schema");
                    }
                    log::warn("line " + std::to_string(lineno) + ": unknown tag '" + tag + "' read as O");
                    tag = "O";
                }
            } else if (parts->prefix != 'O') {
                std::string type(parts->type);
                if (std::find(seen_types.begin(), seen_types.end(), type) == seen_types.end()) {
                    seen_types.push_back(type);
                }
            }
            pending.tags.push_back(std::move(tag));
        }
    }
    flush_sentence();
    finish_document();

    corpus.schema = opts.schema ? *opts.schema : LabelSchema(seen_types, file_scheme);
    return corpus;
}

/// Writes column data. Tags are rendered in `scheme` (defaults to the
/// corpus schema's scheme); documents are introduced by "-DOCSTART-" lines.
inline std::string write_conll(const Corpus& corpus, const ColumnSpec& spec = ColumnSpec::tsv2(),
                               std::optional<Scheme> scheme = std::nullopt) {
    const Scheme out_scheme = scheme.value_or(corpus.schema.scheme());
    std::ostringstream os;
    const char sep = spec.columns == 2 ? '\t' : ' ';
    auto row = [&](const std::string& token, const std::string& tag) {
        for (std::size_t c = 0; c < spec.columns; ++c) {
            if (c) os << sep;
            if (c == spec.token_col) {
                os << token;
            } else if (spec.tag_col && c == *spec.tag_col) {
                os << tag;
            } else {
                os << (token == "-DOCSTART-" ? "-X-" : "_");
            }
        }
        os << '\n';
    };
    std::optional<std::string> current_doc;
    for (const auto& s : corpus.sentences) {
        if (!current_doc || *current_doc != s.doc_id) {
            row("-DOCSTART-", "O");
            os << '\n';
            current_doc = s.doc_id;
        }
        const auto tags = render_spans(extract_spans(s.tags()), s.size(), out_scheme);
        for (std::size_t i = 0; i < s.size(); ++i) row(s.tokens[i].surface, tags[i]);
        os << '\n';
    }
    return os.str();
}

/// Sentence-splits and tokenizes raw text as one document.
inline Corpus corpus_from_text(std::string_view raw_text, std::string doc_id = "doc0",
                               const SplitterOptions& splitter = {},
                               std::size_t max_seq_length = kDefaultMaxSeqLength) {
    Corpus corpus;
    corpus.documents.push_back({doc_id, std::string(raw_text)});
    std::size_t idx = 0;
    for (const auto& span : sentence_split(raw_text, splitter)) {
        Sentence s;
        s.doc_id = doc_id;
        s.sent_index = idx++;
        s.tokens = tokenize(span.text, span.begin);
        if (s.tokens.empty()) continue;
        detail::truncate_sentence(s, max_seq_length);
        corpus.sentences.push_back(std::move(s));
    }
    return corpus;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace medner

#endif  // MEDNER_CORPUS_CORPUS_HPP
