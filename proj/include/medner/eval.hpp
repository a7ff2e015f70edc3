#ifndef MEDNER_EVAL_HPP
#define MEDNER_EVAL_HPP

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "medner/corpus/corpus.hpp"
#include "medner/corpus/schema.hpp"
#include "medner/util/error.hpp"

namespace medner {

struct TypeCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    TypeCounts& operator+=(const TypeCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        return *this;
    }
    bool operator==(const TypeCounts&) const = default;
};

using CountTable = std::map<std::string, TypeCounts>;

inline double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}
inline double precision(const TypeCounts& c) { return ratio(c.tp, c.tp + c.fp); }
inline double recall(const TypeCounts& c) { return ratio(c.tp, c.tp + c.fn); }
inline double f1_from(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }
// 2TP / (2TP + FP + FN): one rounding, so small fractions come out exact.
inline double f1(const TypeCounts& c) { return ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn); }

/// An entity located by sentence position and inclusive token span.
struct EntityRef {
    std::size_t sentence = 0;
    std::string type;
    std::size_t first = 0;
    std::size_t last = 0;

    auto operator<=>(const EntityRef&) const = default;
};

/// Exact-match counting: a prediction is a true positive iff an unmatched
/// gold entity has the same sentence, type and token span.
inline CountTable entity_match_counts(const std::vector<EntityRef>& gold, const std::vector<EntityRef>& pred) {
    CountTable table;
    std::multiset<EntityRef> unmatched(gold.begin(), gold.end());
    for (const auto& g : gold) table[g.type];
    for (const auto& p : pred) {
        auto it = unmatched.find(p);
        if (it != unmatched.end()) {
            ++table[p.type].tp;
            unmatched.erase(it);
        } else {
            ++table[p.type].fp;
        }
    }
    for (const auto& g : unmatched) ++table[g.type].fn;
    return table;
}

inline std::vector<EntityRef> entities_of(const std::vector<std::vector<std::string>>& tag_sequences) {
    std::vector<EntityRef> out;
    for (std::size_t s = 0; s < tag_sequences.size(); ++s) {
        for (auto& sp : extract_spans(tag_sequences[s])) out.push_back({s, sp.type, sp.first, sp.last});
    }
    return out;
}

/// F1 of the counts pooled over all types.
inline double micro_f1(const CountTable& counts) {
    TypeCounts total;
    for (const auto& [type, c] : counts) total += c;
    return f1(total);
}

/// Mean per-type F1 over types that occur in gold or prediction.
inline double macro_f1(const CountTable& counts) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [type, c] : counts) {
        if (c.tp + c.fn == 0 && c.tp + c.fp == 0) continue;
        sum += f1(c);
        ++n;
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

struct TagScore {
    std::string tag;
    std::size_t support = 0;    // gold occurrences
    std::size_t predicted = 0;  // predicted occurrences
    std::size_t correct = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Token-level scores per IOB tag (B- and I- scored separately).
inline std::vector<TagScore> tag_report(const std::vector<std::string>& gold, const std::vector<std::string>& pred,
                                        bool include_outside = false) {
    if (gold.size() != pred.size()) {
        throw ValidationError("tag_report: gold has " + std::to_string(gold.size()) + " tags, prediction has " +
                              std::to_string(pred.size()));
    }
    std::map<std::string, TagScore> by_tag;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (include_outside || gold[i] != "O") ++by_tag[gold[i]].support;
        if (include_outside || pred[i] != "O") ++by_tag[pred[i]].predicted;
        if (gold[i] == pred[i] && (include_outside || gold[i] != "O")) ++by_tag[gold[i]].correct;
    }
    std::vector<TagScore> out;
    for (auto& [tag, s] : by_tag) {
        s.tag = tag;
        s.precision = ratio(s.correct, s.predicted);
        s.recall = ratio(s.correct, s.support);
        s.f1 = f1_from(s.precision, s.recall);
        out.push_back(s);
    }
    return out;
}

inline double token_accuracy(const std::vector<std::string>& gold, const std::vector<std::string>& pred) {
    if (gold.size() != pred.size()) throw ValidationError("token_accuracy: sequences differ in length");
    if (gold.empty()) return 1.0;
    std::size_t same = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) same += gold[i] == pred[i];
    return ratio(same, gold.size());
}

struct EvalReport {
    CountTable per_type;
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    double token_accuracy = 0.0;
    std::vector<TagScore> tag_scores;
    std::size_t sentences = 0;
    std::size_t exact_sentences = 0;

    double sentence_accuracy() const { return sentences == 0 ? 1.0 : ratio(exact_sentences, sentences); }
};

/// Scores aligned tag sequences (one vector per sentence).
inline EvalReport evaluate(const std::vector<std::vector<std::string>>& gold,
                           const std::vector<std::vector<std::string>>& pred) {
    if (gold.size() != pred.size()) {
        throw ValidationError("gold has " + std::to_string(gold.size()) + " sentences, prediction has " +
                              std::to_string(pred.size()));
    }
    EvalReport r;
    std::vector<std::string> flat_gold, flat_pred;
    for (std::size_t s = 0; s < gold.size(); ++s) {
        if (gold[s].size() != pred[s].size()) {
            throw ValidationError("sentence " + std::to_string(s) + ": gold has " + std::to_string(gold[s].size()) +
                                  " tokens, prediction has " + std::to_string(pred[s].size()));
        }
        flat_gold.insert(flat_gold.end(), gold[s].begin(), gold[s].end());
        flat_pred.insert(flat_pred.end(), pred[s].begin(), pred[s].end());
        r.exact_sentences += gold[s] == pred[s];
    }
    r.sentences = gold.size();
    r.per_type = entity_match_counts(entities_of(gold), entities_of(pred));
    r.micro_f1 = micro_f1(r.per_type);
    r.macro_f1 = macro_f1(r.per_type);
    r.token_accuracy = token_accuracy(flat_gold, flat_pred);
    r.tag_scores = tag_report(flat_gold, flat_pred);
    return r;
}

/// Aligns two corpora sentence by sentence and scores them. Sentences must
/// agree on count, document, and token count.
inline EvalReport evaluate_corpora(const Corpus& gold, const Corpus& pred) {
    if (gold.size() != pred.size()) {
        throw ValidationError("corpora differ in sentence count: gold " + std::to_string(gold.size()) +
                              ", prediction " + std::to_string(pred.size()));
    }
    std::vector<std::vector<std::string>> g, p;
    for (std::size_t s = 0; s < gold.size(); ++s) {
        const auto& gs = gold.sentences[s];
        const auto& ps = pred.sentences[s];
        if (gs.size() != ps.size() || gs.doc_id != ps.doc_id) {
            throw ValidationError("sentence " + gs.doc_id + "#" + std::to_string(gs.sent_index) +
                                  " is not aligned with its prediction");
        }
        g.push_back(gs.tags());
        p.push_back(ps.tags());
    }
    return evaluate(g, p);
}

namespace detail {
inline std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}
inline std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}
inline std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s : s + std::string(w - s.size(), ' '); }
}  // namespace detail

/// Plain-text report: the per-tag table followed by entity-level scores.
inline std::string format_report(const EvalReport& r) {
    std::size_t w = std::string("Entity tagging").size();
    for (const auto& t : r.tag_scores) w = std::max(w, t.tag.size());
    for (const auto& [type, c] : r.per_type) w = std::max(w, type.size());
    w += 2;
    std::string out = detail::pad("Entity tagging", w) + "prec.   recall  F1-score  support\n";
    for (const auto& t : r.tag_scores) {
        out += detail::pad(t.tag, w) + detail::pad(detail::fixed2(t.precision), 8) +
               detail::pad(detail::fixed2(t.recall), 8) + detail::pad(detail::fixed2(t.f1), 10) +
               std::to_string(t.support) + "\n";
    }
    out += "\n" + detail::pad("Entity type", w) + "prec.   recall  F1-score  TP    FP    FN\n";
    for (const auto& [type, c] : r.per_type) {
        out += detail::pad(type, w) + detail::pad(detail::fixed2(precision(c)), 8) +
               detail::pad(detail::fixed2(recall(c)), 8) + detail::pad(detail::fixed2(f1(c)), 10) +
               detail::pad(std::to_string(c.tp), 6) + detail::pad(std::to_string(c.fp), 6) + std::to_string(c.fn) +
               "\n";
    }
    out += "\nmicro-F1 " + detail::fixed4(r.micro_f1) + "\nmacro-F1 " + detail::fixed4(r.macro_f1) +
           "\ntoken accuracy " + detail::fixed4(r.token_accuracy) + "\nsentence accuracy " +
           detail::fixed4(r.sentence_accuracy()) + "\n";
    return out;
}

inline nlohmann::json report_json(const EvalReport& r) {
    nlohmann::json j;
    j["micro_f1"] = r.micro_f1;
    j["macro_f1"] = r.macro_f1;
    j["token_accuracy"] = r.token_accuracy;
    j["sentences"] = r.sentences;
    j["exact_sentences"] = r.exact_sentences;
    nlohmann::json types = nlohmann::json::object();
    for (const auto& [type, c] : r.per_type) {
        types[type] = {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"precision", precision(c)},
                       {"recall", recall(c)}, {"f1", f1(c)}};
    }
    j["entity_types"] = types;
    nlohmann::json tags = nlohmann::json::array();
    for (const auto& t : r.tag_scores) {
        tags.push_back({{"tag", t.tag}, {"precision", t.precision}, {"recall", t.recall}, {"f1", t.f1},
                        {"support", t.support}, {"predicted", t.predicted}});
    }
    j["tags"] = tags;
    return j;
}

}  // namespace medner

#endif  // MEDNER_EVAL_HPP
