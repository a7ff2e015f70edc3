// Synthetic corpora, embedding tables and small models shared by the suites.
#ifndef MEDNER_TESTS_FIXTURES_HPP
#define MEDNER_TESTS_FIXTURES_HPP

#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "medner/medner.hpp"

namespace medner::fixtures {

using TaggedSentence = std::pair<std::vector<std::string>, std::vector<std::string>>;

/// Corpus from token/tag pairs, going through the CoNLL reader so offsets and
/// document text are filled in the usual way.
inline Corpus make_corpus(const std::vector<TaggedSentence>& sentences, const std::vector<std::string>& types) {
    std::string text;
    for (const auto& [toks, tags] : sentences) {
        for (std::size_t i = 0; i < toks.size(); ++i) text += toks[i] + "\t" + tags[i] + "\n";
        text += "\n";
    }
    ParseOptions opts;
    opts.schema = LabelSchema(types, Scheme::IOB2);
    return parse_conll(text, opts);
}

/// Random vectors in [-1, 1) for every word.
inline std::shared_ptr<const EmbeddingTable> random_table(const std::vector<std::string>& words, std::size_t dim,
                                                          std::uint64_t seed, OovPolicy policy = OovPolicy::UnkRow) {
    Rng rng(seed);
    std::vector<double> data(words.size() * dim);
    for (auto& v : data) v = rng.uniform(-1.0, 1.0);
    return std::make_shared<const EmbeddingTable>(dim, words, std::move(data), std::nullopt, policy);
}

/// Vocabulary words of a corpus, reserved slots excluded.
inline std::vector<std::string> corpus_words(const Corpus& c) {
    std::set<std::string> seen;
    for (const auto& s : c.sentences) {
        for (const auto& t : s.tokens) seen.insert(t.surface);
    }
    return {seen.begin(), seen.end()};
}

inline ModelConfig small_config(std::size_t chars = 4, std::size_t filters = 3, std::size_t width = 2,
                                std::size_t state = 6) {
    ModelConfig c;
    c.char_dim = chars;
    c.num_filters = filters;
    c.filter_width = width;
    c.lstm_state = state;
    return c;
}

// Drug mentions are single lexicon words; dosages are a number followed by a
// unit. Everything else is filler.
inline const std::vector<std::string>& drug_lexicon() {
    static const std::vector<std::string> v{"aspirin",   "metformin", "insulin",   "warfarin",  "lisinopril", "heparin",
                                            "ibuprofen", "morphine",  "digoxin",   "amoxicillin", "prednisone",
                                            "atenolol"};
    return v;
}

inline const std::vector<std::string>& unit_lexicon() {
    static const std::vector<std::string> v{"mg", "ml", "mcg", "units"};
    return v;
}

inline const std::vector<std::string>& filler_lexicon() {
    static const std::vector<std::string> v{
        "the",      "patient", "was",     "given",   "daily",  "for",     "pain",   "after",   "surgery", "and",
        "reported", "no",      "side",    "effects", "of",     "with",    "twice",  "a",       "day",     "started",
        "on",       "stopped", "nurse",   "noted",   "blood",  "pressure", "stable", "orally",  "in",      "morning",
        "evening",  "dose",    "reduced", "to",      "follow", "up",      "clinic", "history", "recent",  "continue"};
    return v;
}

/// Sentences of 4 to 12 filler words with up to two drug and two dosage
/// mentions inserted. Dosage numbers are fresh integers, so they are mostly
/// unseen words at test time.
inline Corpus learnability_corpus(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<TaggedSentence> out;
    const auto& drugs = drug_lexicon();
    const auto& units = unit_lexicon();
    const auto& filler = filler_lexicon();
    for (std::size_t k = 0; k < n; ++k) {
        TaggedSentence s;
        const std::size_t len = 4 + rng.below(9);
        const std::size_t n_drug = rng.below(3), n_dose = rng.below(3);
        std::vector<int> kinds(len, 0);
        for (std::size_t d = 0; d < n_drug; ++d) kinds[rng.below(len)] = 1;
        for (std::size_t d = 0; d < n_dose; ++d) kinds[rng.below(len)] = 2;
        for (int kind : kinds) {
            if (kind == 1) {
                s.first.push_back(drugs[rng.below(drugs.size())]);
                s.second.push_back("B-Drug");
            } else if (kind == 2) {
                s.first.push_back(std::to_string(1 + rng.below(999)));
                s.second.push_back("B-Dosage");
                s.first.push_back(units[rng.below(units.size())]);
                s.second.push_back("I-Dosage");
            } else {
                s.first.push_back(filler[rng.below(filler.size())]);
                s.second.push_back("O");
            }
        }
        out.push_back(std::move(s));
    }
    return make_corpus(out, {"Drug", "Dosage"});
}

/// Embedding table over every lexicon word; numbers stay out of it.
inline std::shared_ptr<const EmbeddingTable> learnability_table(std::size_t dim, std::uint64_t seed) {
    std::vector<std::string> words = drug_lexicon();
    for (const auto& w : unit_lexicon()) words.push_back(w);
    for (const auto& w : filler_lexicon()) words.push_back(w);
    return random_table(words, dim, seed);
}

/// The three de-identification example sentences, tokenized, with gold spans
/// for every masked field. "MR # 234333" and the phone number stay untagged.
inline Corpus deid_example_corpus() {
    const std::vector<std::string> raw{
        "Record date : 2021-01-14, Philips Jo , Name : Joseph, MR # 234333 Date : 01/16/1989 .",
        "PCP : Alicia , 54 years-old , Record date : 2012-11-04 .",
        "Scarborough Hospital , 0295 Keats Street , Phone 55-555-5555 ."};
    const std::vector<std::vector<std::pair<std::string, std::string>>> gold{
        {{"2021-01-14", "Date"}, {"Philips Jo", "Name"}, {"Joseph", "Name"}, {"01/16/1989", "Date"}},
        {{"Alicia", "Name"}, {"54", "Age"}, {"2012-11-04", "Date"}},
        {{"Scarborough Hospital", "Hospital"}, {"0295 Keats Street", "Street"}}};
    std::vector<TaggedSentence> out;
    for (std::size_t k = 0; k < raw.size(); ++k) {
        TaggedSentence s;
        for (const auto& t : tokenize(raw[k])) s.first.push_back(t.surface);
        s.second.assign(s.first.size(), "O");
        for (const auto& [surface, type] : gold[k]) {
            const auto words = tokenize(surface);
            for (std::size_t i = 0; i + words.size() <= s.first.size(); ++i) {
                bool hit = true;
                for (std::size_t j = 0; j < words.size() && hit; ++j) hit = s.first[i + j] == words[j].surface;
                if (!hit) continue;
                s.second[i] = "B-" + type;
                for (std::size_t j = 1; j < words.size(); ++j) s.second[i + j] = "I-" + type;
                break;
            }
        }
        out.push_back(std::move(s));
    }
    return make_corpus(out, {"Date", "Name", "Age", "Hospital", "Street"});
}

inline const std::vector<std::string>& deid_example_expected() {
    static const std::vector<std::string> v{
        "Record date : <DATE> , <NAME> , Name : <NAME> , MR # 234333 Date : <DATE> .",
        "PCP : <NAME> , <AGE> years-old , Record date : <DATE> .",
        "<HOSPITAL> , <STREET> , Phone 55-555-5555 ."};
    return v;
}

/// Masks every sentence of a tagged corpus independently, in order.
inline std::vector<std::string> deidentify_sentences(const Corpus& c, const DeidPolicy& policy) {
    std::vector<std::string> out;
    for (const auto& s : c.sentences) {
        std::string text;
        for (std::size_t i = 0; i < s.size(); ++i) text += (i ? " " : "") + s.tokens[i].surface;
        auto chunks = decode_chunks(s, s.tags());
        const std::size_t base = s.tokens.front().begin;
        for (auto& ch : chunks) {
            ch.begin -= base;
            ch.end -= base;
        }
        out.push_back(apply_policy(text, chunks, policy).text);
    }
    return out;
}

}  // namespace medner::fixtures

#endif  // MEDNER_TESTS_FIXTURES_HPP
