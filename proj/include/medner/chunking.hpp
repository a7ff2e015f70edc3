#ifndef MEDNER_CHUNKING_HPP
#define MEDNER_CHUNKING_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <sstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "medner/corpus/corpus.hpp"
#include "medner/corpus/schema.hpp"
#include "medner/embeddings.hpp"
#include "medner/util/error.hpp"

namespace medner {

/// An entity mention decoded from a tagged sentence. Token span and character
/// offsets are both inclusive.
struct Chunk {
    std::string entity_type;
    std::size_t first = 0;
    std::size_t last = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
    std::string surface;
    double confidence = 1.0;
    std::string doc_id;
    std::size_t sent_index = 0;

    bool operator==(const Chunk&) const = default;
};

enum class ConfidenceAggregation { Min, GeometricMean };

inline ConfidenceAggregation parse_aggregation(std::string_view s) {
    if (s == "min") return ConfidenceAggregation::Min;
    if (s == "geomean" || s == "geometric_mean") return ConfidenceAggregation::GeometricMean;
    throw UsageError("unknown confidence aggregation '" + std::string(s) + "' (expected min or geomean)");
}

/// Turns an IOB2 tag sequence into chunks. `token_confidence` holds, per
/// token, the probability of the tag it was assigned; an empty span means
/// gold tags (confidence 1). A chunk's confidence is the minimum over its
/// tokens, or the geometric mean if asked.
inline std::vector<Chunk> decode_chunks(const Sentence& sentence, const std::vector<std::string>& tags,
                                        std::span<const double> token_confidence = {},
                                        ConfidenceAggregation agg = ConfidenceAggregation::Min) {
    if (tags.size() != sentence.size()) {
        throw ValidationError("tag sequence length " + std::to_string(tags.size()) + " does not match sentence length " +
                              std::to_string(sentence.size()));
    }
    if (!token_confidence.empty() && token_confidence.size() != tags.size()) {
        throw ValidationError("confidence vector length does not match sentence length");
    }
    auto violations = validate_iob(tags, Scheme::IOB2);
    if (!violations.empty()) throw ValidationError("invalid IOB2 tags: " + describe(violations));

    std::vector<Chunk> out;
    for (const auto& span : extract_spans(tags)) {
        Chunk c;
        c.entity_type = span.type;
        c.first = span.first;
        c.last = span.last;
        c.begin = sentence.tokens[span.first].begin;
        c.end = sentence.tokens[span.last].end;
        c.doc_id = sentence.doc_id;
        c.sent_index = sentence.sent_index;
        double conf = 1.0, log_sum = 0.0;
        for (std::size_t i = span.first; i <= span.last; ++i) {
            if (i > span.first) c.surface += ' ';
            c.surface += sentence.tokens[i].surface;
            if (!token_confidence.empty()) {
                conf = std::min(conf, token_confidence[i]);
                log_sum += std::log(token_confidence[i]);
            }
        }
        if (!token_confidence.empty() && agg == ConfidenceAggregation::GeometricMean) {
            conf = std::exp(log_sum / static_cast<double>(span.last - span.first + 1));
        }
        c.confidence = std::clamp(conf, 0.0, 1.0);
        out.push_back(std::move(c));
    }
    return out;
}

/// Inverse of decode_chunks on span and type: renders IOB2 tags.
inline std::vector<std::string> chunks_to_tags(const std::vector<Chunk>& chunks, std::size_t sentence_length) {
    std::vector<const Chunk*> order;
    for (const auto& c : chunks) {
        if (c.first > c.last || c.last >= sentence_length) {
            throw ValidationError("chunk [" + std::to_string(c.first) + ".." + std::to_string(c.last) +
                                  "] is outside a sentence of length " + std::to_string(sentence_length));
        }
        order.push_back(&c);
    }
    std::sort(order.begin(), order.end(), [](const Chunk* a, const Chunk* b) { return a->first < b->first; });
    for (std::size_t k = 1; k < order.size(); ++k) {
        if (order[k]->first <= order[k - 1]->last) {
            throw ValidationError("overlapping chunks [" + std::to_string(order[k - 1]->first) + ".." +
                                  std::to_string(order[k - 1]->last) + "] and [" + std::to_string(order[k]->first) +
                                  ".." + std::to_string(order[k]->last) + "]");
        }
    }
    std::vector<std::string> tags(sentence_length, "O");
    for (const Chunk* c : order) {
        tags[c->first] = "B-" + c->entity_type;
        for (std::size_t i = c->first + 1; i <= c->last; ++i) tags[i] = "I-" + c->entity_type;
    }
    return tags;
}

/// Average of the mean chunk-token vector and the mean sentence-token vector.
inline std::vector<double> chunk_embedding(const EmbeddingTable& table, const Sentence& sentence, const Chunk& chunk) {
    if (sentence.empty()) throw ValidationError("chunk embedding of an empty sentence");
    if (chunk.first > chunk.last || chunk.last >= sentence.size()) {
        throw ValidationError("chunk lies outside its sentence");
    }
    std::vector<std::span<const double>> chunk_vecs, sent_vecs;
    for (std::size_t i = 0; i < sentence.size(); ++i) {
        auto v = table.lookup(sentence.tokens[i].surface);
        sent_vecs.push_back(v);
        if (i >= chunk.first && i <= chunk.last) chunk_vecs.push_back(v);
    }
    auto vc = pool_mean(chunk_vecs);
    auto vs = pool_mean(sent_vecs);
    for (std::size_t k = 0; k < vc.size(); ++k) vc[k] = (vc[k] + vs[k]) / 2.0;
    return vc;
}

// Chunk records: tab-separated, one chunk per line, after a header row.
inline constexpr std::string_view kChunkRecordHeader = "doc\tsen\tbeg\tend\tchunk\tentity\tconf";

inline std::string format_chunk_record(const Chunk& c) {
    char conf[32];
    std::snprintf(conf, sizeof conf, "%.2f", c.confidence);
    std::ostringstream os;
    os << c.doc_id << '\t' << c.sent_index << '\t' << c.begin << '\t' << c.end << '\t' << c.surface << '\t'
       << c.entity_type << '\t' << conf;
    return os.str();
}

inline std::string write_chunk_records(const std::vector<Chunk>& chunks) {
    std::string out(kChunkRecordHeader);
    out += '\n';
    for (const auto& c : chunks) out += format_chunk_record(c) + "\n";
    return out;
}

/// Reads chunk records. Token indices are not stored, so `first`/`last` are
/// left at zero; callers work from the character offsets.
inline std::vector<Chunk> parse_chunk_records(std::string_view text) {
    std::vector<Chunk> out;
    std::size_t lineno = 0, pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string line(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line == kChunkRecordHeader) continue;
        std::vector<std::string> f;
        std::size_t b = 0;
        while (true) {
            std::size_t tab = line.find('\t', b);
            f.push_back(line.substr(b, tab == std::string::npos ? std::string::npos : tab - b));
            if (tab == std::string::npos) break;
            b = tab + 1;
        }
        if (f.size() != 7) throw ParseError("chunk record needs 7 tab-separated fields", lineno);
        Chunk c;
        try {
            c.doc_id = f[0];
            c.sent_index = std::stoul(f[1]);
            c.begin = std::stoul(f[2]);
            c.end = std::stoul(f[3]);
            c.surface = f[4];
            c.entity_type = f[5];
            c.confidence = std::stod(f[6]);
        } catch (const std::exception&) {
            throw ParseError("bad number in chunk record", lineno);
        }
        if (c.end < c.begin) throw ParseError("chunk end precedes begin", lineno);
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace medner

#endif  // MEDNER_CHUNKING_HPP
