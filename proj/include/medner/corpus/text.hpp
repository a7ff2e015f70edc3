#ifndef MEDNER_CORPUS_TEXT_HPP
#define MEDNER_CORPUS_TEXT_HPP

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "medner/util/error.hpp"
#include "medner/util/utf8.hpp"

namespace medner {

/// A token with inclusive character (code point) offsets into its document.
struct Token {
    std::string surface;
    std::size_t begin = 0;
    std::size_t end = 0;
    std::optional<std::string> tag;

    bool operator==(const Token&) const = default;
};

/// A sentence located in raw text; offsets are inclusive code point indices.
struct SentenceSpan {
    std::string text;
    std::size_t begin = 0;
    std::size_t end = 0;

    bool operator==(const SentenceSpan&) const = default;
};

struct SplitterOptions {
    /// Words (including their final period) after which no boundary is placed.
    std::vector<std::string> abbreviations{"Dr.", "Fig.", "e.g.", "i.e.", "Mr.", "Mrs.", "Ms.", "Prof.", "vs.", "al."};

    /// Abbreviation file: one entry per line, '#' comments.
    static SplitterOptions from_abbreviation_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open abbreviation file " + path);
        SplitterOptions opts;
        opts.abbreviations.clear();
        std::string line;
        while (std::getline(in, line)) {
            auto b = line.find_first_not_of(" \t\r");
            if (b == std::string::npos || line[b] == '#') continue;
            auto e = line.find_last_not_of(" \t\r");
            opts.abbreviations.push_back(line.substr(b, e - b + 1));
        }
        return opts;
    }
};

namespace detail {

inline bool is_terminal(char32_t c) { return c == U'.' || c == U'!' || c == U'?'; }

inline bool opens_sentence(char32_t c) { return (c >= U'A' && c <= U'Z') || (c >= U'0' && c <= U'9'); }

}  // namespace detail

/// Rule-based sentence boundaries. A boundary follows '.', '!' or '?' when
/// whitespace and then an upper-case letter or digit come next, unless the
/// word ending there is a listed abbreviation. Every newline is a boundary.
/// Returned sentences are trimmed of surrounding whitespace.
inline std::vector<SentenceSpan> sentence_split(std::string_view raw_text, const SplitterOptions& opts = {}) {
    const std::u32string text = utf8::decode(raw_text);
    std::vector<SentenceSpan> out;
    const std::size_t n = text.size();

    auto emit = [&](std::size_t from, std::size_t to_exclusive) {
        while (from < to_exclusive && utf8::is_space(text[from])) ++from;
        while (to_exclusive > from && utf8::is_space(text[to_exclusive - 1])) --to_exclusive;
        if (from >= to_exclusive) return;
        out.push_back({utf8::encode(std::u32string_view(text).substr(from, to_exclusive - from)), from,
                       to_exclusive - 1});
    };

    std::size_t start = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const char32_t c = text[i];
        if (c == U'\n') {
            emit(start, i);
            start = i + 1;
            continue;
        }
        if (!detail::is_terminal(c) || i + 1 >= n || !utf8::is_space(text[i + 1])) continue;
        std::size_t j = i + 1;
        while (j < n && utf8::is_space(text[j]) && text[j] != U'\n') ++j;
        if (j >= n || !detail::opens_sentence(text[j])) continue;

        std::size_t w = i;
        while (w > start && !utf8::is_space(text[w - 1])) --w;
        const std::string word = utf8::encode(std::u32string_view(text).substr(w, i + 1 - w));
        if (std::find(opts.abbreviations.begin(), opts.abbreviations.end(), word) != opts.abbreviations.end()) {
            continue;
        }
        emit(start, i + 1);
        start = i + 1;
    }
    emit(start, n);
    return out;
}

/// Characters split off the edges of a whitespace-delimited word, one token
/// each. Hyphens and slashes are never split, so "COVID-19" and "01/16/1989"
/// stay whole.
inline bool is_detachable(char32_t c) {
    switch (c) {
        case U'.': case U',': case U';': case U':': case U'!': case U'?':
        case U'(': case U')': case U'[': case U']': case U'{': case U'}':
        case U'"': case U'\'': case U'`':
        case 0x201C: case 0x201D: case 0x2018: case 0x2019: case 0x00AB: case 0x00BB:
            return true;
        default:
            return false;
    }
}

/// Whitespace tokenization with edge punctuation detached. Offsets are
/// absolute: `base_offset` plus the code point index within the sentence.
inline std::vector<Token> tokenize(std::string_view sentence_text, std::size_t base_offset = 0) {
    const std::u32string text = utf8::decode(sentence_text);
    std::vector<Token> out;
    auto push = [&](std::size_t b, std::size_t e_excl) {
        out.push_back(Token{utf8::encode(std::u32string_view(text).substr(b, e_excl - b)), base_offset + b,
                            base_offset + e_excl - 1, std::nullopt});
    };
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        if (utf8::is_space(text[i])) {
            ++i;
            continue;
        }
        std::size_t e = i;
        while (e < n && !utf8::is_space(text[e])) ++e;
        std::size_t core_b = i, core_e = e;
        while (core_b < core_e && is_detachable(text[core_b])) ++core_b;
        while (core_e > core_b && is_detachable(text[core_e - 1])) --core_e;
        for (std::size_t k = i; k < core_b; ++k) push(k, k + 1);
        if (core_b < core_e) push(core_b, core_e);
        for (std::size_t k = core_e; k < e; ++k) push(k, k + 1);
        i = e;
    }
    return out;
}

}  // namespace medner

#endif  // MEDNER_CORPUS_TEXT_HPP
