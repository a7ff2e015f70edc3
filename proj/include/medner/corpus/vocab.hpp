#ifndef MEDNER_CORPUS_VOCAB_HPP
#define MEDNER_CORPUS_VOCAB_HPP

#include <algorithm>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "medner/corpus/corpus.hpp"
#include "medner/util/error.hpp"
#include "medner/util/utf8.hpp"

namespace medner {

/// Word and character indices. Index 0 is PAD and 1 is UNK in both maps; the
/// remaining entries are ordered by frequency (descending), then by bytes.
/// Words keep their case.
class Vocabulary {
public:
    static constexpr std::size_t kPad = 0;
    static constexpr std::size_t kUnk = 1;
    static constexpr std::string_view kPadName = "<pad>";
    static constexpr std::string_view kUnkName = "<unk>";

    Vocabulary() : Vocabulary({}, {}, 1) {}

    /// Rebuilds from stored entry lists (reserved slots excluded).
    Vocabulary(std::vector<std::string> words, std::vector<std::string> chars, std::size_t min_count)
        : min_count_(min_count) {
        words_ = {std::string(kPadName), std::string(kUnkName)};
        chars_ = words_;
        for (auto& w : words) words_.push_back(std::move(w));
        for (auto& c : chars) chars_.push_back(std::move(c));
        for (std::size_t i = 0; i < words_.size(); ++i) {
            if (!word_index_.emplace(words_[i], i).second) throw ValidationError("duplicate vocabulary word " + words_[i]);
        }
        for (std::size_t i = 0; i < chars_.size(); ++i) {
            if (!char_index_.emplace(chars_[i], i).second) throw ValidationError("duplicate vocabulary char " + chars_[i]);
        }
    }

    static Vocabulary build(const Corpus& corpus, std::size_t min_count = 1) {
        std::map<std::string, std::size_t> word_freq, char_freq;
        for (const auto& s : corpus.sentences) {
            for (const auto& t : s.tokens) {
                ++word_freq[t.surface];
                std::string one;
                for (char32_t cp : utf8::decode(t.surface)) {
                    one.clear();
                    utf8::append(one, cp);
                    ++char_freq[one];
                }
            }
        }
        auto ordered = [](const std::map<std::string, std::size_t>& freq, std::size_t min) {
            std::vector<std::pair<std::string, std::size_t>> v;
            for (const auto& [k, n] : freq) {
                if (n >= min && k != kPadName && k != kUnkName) v.emplace_back(k, n);
            }
            std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
            std::vector<std::string> out;
            out.reserve(v.size());
            for (auto& [k, n] : v) out.push_back(k);
            return out;
        };
        return Vocabulary(ordered(word_freq, min_count), ordered(char_freq, 1), min_count);
    }

    std::size_t word(std::string_view w) const {
        auto it = word_index_.find(std::string(w));
        return it == word_index_.end() ? kUnk : it->second;
    }

    std::size_t character(std::string_view c) const {
        auto it = char_index_.find(std::string(c));
        return it == char_index_.end() ? kUnk : it->second;
    }

    /// Character indices of a token, one per code point.
    std::vector<std::size_t> char_ids(std::string_view surface) const {
        std::vector<std::size_t> out;
        std::string one;
        for (char32_t cp : utf8::decode(surface)) {
            one.clear();
            utf8::append(one, cp);
            out.push_back(character(one));
        }
        return out;
    }

    std::size_t num_words() const noexcept { return words_.size(); }
    std::size_t num_chars() const noexcept { return chars_.size(); }
    std::size_t min_count() const noexcept { return min_count_; }
    const std::vector<std::string>& words() const noexcept { return words_; }
    const std::vector<std::string>& chars() const noexcept { return chars_; }
    bool contains_word(std::string_view w) const { return word_index_.count(std::string(w)) != 0; }

    bool operator==(const Vocabulary& o) const { return words_ == o.words_ && chars_ == o.chars_; }

private:
    std::vector<std::string> words_, chars_;
    std::unordered_map<std::string, std::size_t> word_index_, char_index_;
    std::size_t min_count_ = 1;
};

inline Vocabulary build_vocab(const Corpus& corpus, std::size_t min_count = 1) {
    if (corpus.empty()) throw ValidationError("cannot build a vocabulary from an empty corpus");
    return Vocabulary::build(corpus, min_count);
}

}  // namespace medner

#endif  // MEDNER_CORPUS_VOCAB_HPP
