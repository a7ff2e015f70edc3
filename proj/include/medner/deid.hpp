#ifndef MEDNER_DEID_HPP
#define MEDNER_DEID_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "medner/chunking.hpp"
#include "medner/corpus/corpus.hpp"
#include "medner/util/error.hpp"
#include "medner/util/random.hpp"
#include "medner/util/utf8.hpp"

namespace medner {

enum class DeidMode { Mask, Substitute };

struct DeidRule {
    DeidMode mode = DeidMode::Mask;
    std::vector<std::string> dictionary;  // substitute mode only
};

/// Placeholder for a type: upper-cased, spaces removed, in angle brackets.
inline std::string placeholder(std::string_view type) {
    std::string out = "<";
    for (char c : type) {
        if (c == ' ') continue;
        out += (c >= 'a' && c <= 'z') ? static_cast<char>(c - 'a' + 'A') : c;
    }
    return out + ">";
}

/// Key used to match chunk types against policy entries: upper case with
/// spaces, underscores and hyphens dropped ("patient ID" == "Patient_Id").
inline std::string type_key(std::string_view type) {
    std::string out;
    for (char c : type) {
        if (c == ' ' || c == '_' || c == '-') continue;
        out += (c >= 'a' && c <= 'z') ? static_cast<char>(c - 'a' + 'A') : c;
    }
    return out;
}

struct DeidPolicy {
    std::map<std::string, DeidRule> rules;  // by type_key
    std::uint64_t seed = 0;

    /// Identifier types protected by default.
    static std::vector<std::string> default_protected_types() {
        return {"age",          "contact", "date",         "patient ID", "location", "name",    "profession",
                "city",         "country", "doctor",       "hospital",   "medical record", "organization",
                "patient",      "phone",   "street",       "username",   "zip",      "account", "license"};
    }

    static DeidPolicy default_masking(std::uint64_t seed = 0) {
        DeidPolicy p;
        p.seed = seed;
        for (const auto& t : default_protected_types()) p.rules[type_key(t)] = {DeidMode::Mask, {}};
        return p;
    }

    void protect(std::string_view type, DeidMode mode, std::vector<std::string> dictionary = {}) {
        rules[type_key(type)] = DeidRule{mode, std::move(dictionary)};
    }

    const DeidRule* rule_for(std::string_view type) const {
        auto it = rules.find(type_key(type));
        return it == rules.end() ? nullptr : &it->second;
    }

    void validate() const {
        for (const auto& [key, rule] : rules) {
            if (rule.mode == DeidMode::Substitute && rule.dictionary.empty()) {
                throw ValidationError("substitute mode for " + key + " needs a non-empty dictionary");
            }
        }
    }

    /// Policy file, one rule per line:
    ///   <type> = mask
    ///   <type> = substitute <dictionary file>
    ///   defaults = mask          (every default type, masked)
    ///   seed = <n>
    /// Dictionary paths are relative to `base_dir`; dictionaries hold one
    /// replacement per line.
    static DeidPolicy parse(std::string_view text, const std::filesystem::path& base_dir = {}) {
        DeidPolicy p;
        std::istringstream in{std::string(text)};
        std::string line;
        std::size_t lineno = 0;
        auto trim = [](const std::string& s) {
            auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
        };
        while (std::getline(in, line)) {
            ++lineno;
            line = trim(line);
            if (line.empty() || line[0] == '#') continue;
            auto eq = line.find('=');
            if (eq == std::string::npos) throw ParseError("expected '<type> = <mode>'", lineno);
            const std::string type = trim(line.substr(0, eq));
            const std::string rest = trim(line.substr(eq + 1));
            if (type.empty()) throw ParseError("missing entity type", lineno);
            if (type == "seed") {
                try {
                    p.seed = std::stoull(rest);
                } catch (const std::logic_error&) {
                    throw ParseError("bad seed '" + rest + "'", lineno);
                }
                continue;
            }
            std::istringstream rs(rest);
            std::string mode, dict_path;
            rs >> mode;
            std::getline(rs, dict_path);
            dict_path = trim(dict_path);
            if (type == "defaults") {
                if (mode != "mask") throw ParseError("defaults only supports mask", lineno);
                for (const auto& t : default_protected_types()) p.protect(t, DeidMode::Mask);
            } else if (mode == "mask") {
                p.protect(type, DeidMode::Mask);
            } else if (mode == "substitute") {
                if (dict_path.empty()) throw ParseError("substitute needs a dictionary file", lineno);
                auto full = base_dir.empty() ? std::filesystem::path(dict_path) : base_dir / dict_path;
                std::vector<std::string> dict;
                std::istringstream ds(read_file(full.string()));
                std::string entry;
                while (std::getline(ds, entry)) {
                    entry = trim(entry);
                    if (!entry.empty()) dict.push_back(entry);
                }
                if (dict.empty()) throw ParseError("dictionary " + full.string() + " is empty", lineno);
                p.protect(type, DeidMode::Substitute, std::move(dict));
            } else {
                throw ParseError("unknown mode '" + mode + "' (expected mask or substitute)", lineno);
            }
        }
        return p;
    }
};

/// One applied replacement. Offsets are inclusive code point positions in the
/// original text.
struct Replacement {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::string original;
    std::string entity_type;
    std::string replacement;

    bool operator==(const Replacement&) const = default;
};

struct DeidResult {
    std::string text;
    std::vector<Replacement> log;  // ascending by begin
};

namespace detail {

inline std::string substitute_for(const DeidRule& rule, std::string_view type, const std::string& surface,
                                  std::uint64_t seed) {
    const auto& dict = rule.dictionary;
    const std::uint64_t h = splitmix64(seed ^ fnv1a64(surface, fnv1a64(type_key(type) + '\x1f')));
    std::size_t idx = static_cast<std::size_t>(h % dict.size());
    if (dict[idx] == surface) {
        if (dict.size() == 1) return placeholder(type);
        idx = (idx + 1) % dict.size();
    }
    return dict[idx];
}

}  // namespace detail

/// Replaces every protected chunk: "<TYPE>" in mask mode, a dictionary entry
/// in substitute mode. Identical surfaces of one type always get the same
/// substitute for a given seed. Chunks of unprotected types are left alone.
inline DeidResult apply_policy(std::string_view text, const std::vector<Chunk>& chunks, const DeidPolicy& policy) {
    policy.validate();
    const std::u32string src = utf8::decode(text);
    std::vector<const Chunk*> protected_chunks;
    for (const auto& c : chunks) {
        if (!policy.rule_for(c.entity_type)) continue;
        if (c.begin > c.end || c.end >= src.size()) {
            throw ValidationError("chunk [" + std::to_string(c.begin) + ", " + std::to_string(c.end) +
                                  "] is outside a text of length " + std::to_string(src.size()));
        }
        protected_chunks.push_back(&c);
    }
    std::sort(protected_chunks.begin(), protected_chunks.end(),
              [](const Chunk* a, const Chunk* b) { return a->begin < b->begin; });
    for (std::size_t k = 1; k < protected_chunks.size(); ++k) {
        if (protected_chunks[k]->begin <= protected_chunks[k - 1]->end) {
            throw ValidationError("overlapping protected chunks at offsets " +
                                  std::to_string(protected_chunks[k - 1]->begin) + " and " +
                                  std::to_string(protected_chunks[k]->begin));
        }
    }

    DeidResult out;
    for (const Chunk* c : protected_chunks) {
        const DeidRule& rule = *policy.rule_for(c->entity_type);
        Replacement r;
        r.begin = c->begin;
        r.end = c->end;
        r.original = utf8::encode(std::u32string_view(src).substr(c->begin, c->end - c->begin + 1));
        r.entity_type = c->entity_type;
        r.replacement = rule.mode == DeidMode::Mask ? placeholder(c->entity_type)
                                                    : detail::substitute_for(rule, c->entity_type, r.original, policy.seed);
        out.log.push_back(std::move(r));
    }
    // Right to left, so earlier offsets stay valid.
    std::u32string dst = src;
    for (auto it = out.log.rbegin(); it != out.log.rend(); ++it) {
        dst.replace(it->begin, it->end - it->begin + 1, utf8::decode(it->replacement));
    }
    out.text = utf8::encode(dst);
    return out;
}

/// Undoes apply_policy from its log. Throws if the log does not describe the
/// text.
inline std::string reverse(const DeidResult& result) {
    std::u32string text = utf8::decode(result.text);
    std::vector<std::size_t> out_begin;
    std::ptrdiff_t shift = 0;
    std::size_t prev_end = 0;
    for (std::size_t k = 0; k < result.log.size(); ++k) {
        const auto& r = result.log[k];
        const auto orig_len = utf8::length(r.original);
        if (r.end < r.begin || r.end - r.begin + 1 != orig_len || (k > 0 && r.begin <= prev_end)) {
            throw ValidationError("replacement log entry " + std::to_string(k) + " has an inconsistent span");
        }
        prev_end = r.end;
        const auto pos = static_cast<std::ptrdiff_t>(r.begin) + shift;
        const auto repl = utf8::decode(r.replacement);
        if (pos < 0 || static_cast<std::size_t>(pos) + repl.size() > text.size() ||
            text.compare(static_cast<std::size_t>(pos), repl.size(), repl) != 0) {
            throw ValidationError("replacement log entry " + std::to_string(k) + " does not match the text");
        }
        out_begin.push_back(static_cast<std::size_t>(pos));
        shift += static_cast<std::ptrdiff_t>(repl.size()) - static_cast<std::ptrdiff_t>(orig_len);
    }
    for (std::size_t k = result.log.size(); k-- > 0;) {
        const auto& r = result.log[k];
        text.replace(out_begin[k], utf8::length(r.replacement), utf8::decode(r.original));
    }
    return utf8::encode(text);
}

inline nlohmann::json replacement_json(const Replacement& r, std::string_view doc_id = {}) {
    nlohmann::json j;
    if (!doc_id.empty()) j["doc"] = doc_id;
    j["begin"] = r.begin;
    j["end"] = r.end;
    j["original"] = r.original;
    j["type"] = r.entity_type;
    j["replacement"] = r.replacement;
    return j;
}

inline Replacement replacement_from_json(const nlohmann::json& j) {
    return Replacement{j.at("begin").get<std::size_t>(), j.at("end").get<std::size_t>(),
                       j.at("original").get<std::string>(), j.at("type").get<std::string>(),
                       j.at("replacement").get<std::string>()};
}

}  // namespace medner

#endif  // MEDNER_DEID_HPP
