#ifndef MEDNER_CORPUS_SCHEMA_HPP
#define MEDNER_CORPUS_SCHEMA_HPP

#include <algorithm>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "medner/util/error.hpp"

namespace medner {

enum class Scheme { IOB1, IOB2 };

inline std::string_view to_string(Scheme s) { return s == Scheme::IOB1 ? "IOB1" : "IOB2"; }

inline Scheme parse_scheme(std::string_view s) {
    if (s == "IOB1" || s == "iob1") return Scheme::IOB1;
    if (s == "IOB2" || s == "iob2" || s == "BIO" || s == "bio") return Scheme::IOB2;
    throw UsageError("unknown tagging scheme '" + std::string(s) + "' (expected IOB1 or IOB2)");
}

/// A tag split into its prefix ('O', 'B' or 'I') and entity type.
struct TagParts {
    char prefix = 'O';
    std::string_view type;
};

/// Splits "B-X" / "I-X" / "O". Returns nullopt for anything else.
inline std::optional<TagParts> split_tag(std::string_view tag) {
    if (tag == "O") return TagParts{'O', {}};
    if (tag.size() >= 3 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') {
        return TagParts{tag[0], tag.substr(2)};
    }
    return std::nullopt;
}

/// A typed token span [first, last] (inclusive) decoded from a tag sequence.
struct Span {
    std::string type;
    std::size_t first = 0;
    std::size_t last = 0;

    bool operator==(const Span&) const = default;
    auto operator<=>(const Span&) const = default;
};

/// Chunk spans of a tag sequence. B-X always opens a chunk; I-X continues an
/// open X chunk and otherwise opens one. This reading is correct for both IOB1
/// and IOB2 input, and lenient on invalid IOB2.
inline std::vector<Span> extract_spans(const std::vector<std::string>& tags) {
    std::vector<Span> out;
    bool open = false;
    for (std::size_t i = 0; i < tags.size(); ++i) {
        auto parts = split_tag(tags[i]);
        if (!parts || parts->prefix == 'O') {
            open = false;
            continue;
        }
        if (parts->prefix == 'I' && open && out.back().type == parts->type) {
            out.back().last = i;
            continue;
        }
        out.push_back(Span{std::string(parts->type), i, i});
        open = true;
    }
    return out;
}

struct IobViolation {
    std::size_t index = 0;
    std::string reason;

    bool operator==(const IobViolation&) const = default;
};

/// Checks a tag sequence against the rules of `scheme`.
///   IOB2: I-X only directly after B-X or I-X.
///   IOB1: I-X may open a chunk; B-X only directly after an X chunk.
inline std::vector<IobViolation> validate_iob(const std::vector<std::string>& tags, Scheme scheme) {
    std::vector<IobViolation> out;
    std::optional<std::string_view> prev_type;  // type of the chunk the previous token belongs to
    for (std::size_t i = 0; i < tags.size(); ++i) {
        auto parts = split_tag(tags[i]);
        if (!parts) {
            out.push_back({i, "malformed tag '" + tags[i] + "'"});
            prev_type.reset();
            continue;
        }
        if (parts->prefix == 'O') {
            prev_type.reset();
            continue;
        }
        if (scheme == Scheme::IOB2 && parts->prefix == 'I') {
            if (!prev_type) {
                out.push_back({i, tags[i] + " does not continue a chunk"});
            } else if (*prev_type != parts->type) {
                out.push_back({i, tags[i] + " continues a " + std::string(*prev_type) + " chunk"});
            }
        }
        if (scheme == Scheme::IOB1 && parts->prefix == 'B') {
            if (!prev_type || *prev_type != parts->type) {
                out.push_back({i, tags[i] + " does not follow a " + std::string(parts->type) + " chunk"});
            }
        }
        prev_type = parts->type;
    }
    return out;
}

inline std::string describe(const std::vector<IobViolation>& v) {
    std::ostringstream os;
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (k) os << "; ";
        os << "index " << v[k].index << ": " << v[k].reason;
    }
    return os.str();
}

/// Renders spans as tags of length `n` under `scheme`.
inline std::vector<std::string> render_spans(const std::vector<Span>& spans, std::size_t n, Scheme scheme) {
    std::vector<std::string> tags(n, "O");
    for (std::size_t k = 0; k < spans.size(); ++k) {
        const Span& s = spans[k];
        bool need_b = true;
        if (scheme == Scheme::IOB1) {
            need_b = k > 0 && spans[k - 1].last + 1 == s.first && spans[k - 1].type == s.type;
        }
        for (std::size_t i = s.first; i <= s.last; ++i) {
            tags[i] = (i == s.first && need_b ? "B-" : "I-") + s.type;
        }
    }
    return tags;
}

/// Rewrites tags between schemes. Chunk spans and types are preserved exactly.
inline std::vector<std::string> convert_scheme(const std::vector<std::string>& tags, Scheme from, Scheme to) {
    auto violations = validate_iob(tags, from);
    if (!violations.empty()) {
        throw ValidationError("invalid " + std::string(to_string(from)) + " sequence: " + describe(violations));
    }
    if (from == to) return tags;
    return render_spans(extract_spans(tags), tags.size(), to);
}

/// Entity-type inventory plus the derived tag set and IOB2 transition mask.
///
/// Tag indices: 0 is O; type k owns B- at 1 + 2k and I- at 2 + 2k. The mask is
/// (tags + 2) square with the virtual START at index `start()` and STOP at
/// `stop()`. START has no incoming and STOP no outgoing transitions.
class LabelSchema {
public:
    LabelSchema() : LabelSchema(std::vector<std::string>{}) {}

    explicit LabelSchema(std::vector<std::string> entity_types, Scheme scheme = Scheme::IOB2)
        : types_(std::move(entity_types)), scheme_(scheme) {
        tags_.push_back("O");
        for (std::size_t k = 0; k < types_.size(); ++k) {
            const auto& t = types_[k];
            if (t.empty()) throw SchemaError("empty entity type name");
            if (type_index_.count(t)) throw SchemaError("duplicate entity type '" + t + "'");
            type_index_.emplace(t, k);
            tags_.push_back("B-" + t);
            tags_.push_back("I-" + t);
        }
        for (std::size_t i = 0; i < tags_.size(); ++i) tag_index_.emplace(tags_[i], i);
        build_mask();
    }

    const std::vector<std::string>& entity_types() const noexcept { return types_; }
    Scheme scheme() const noexcept { return scheme_; }
    const std::vector<std::string>& tags() const noexcept { return tags_; }
    std::size_t num_tags() const noexcept { return tags_.size(); }
    std::size_t start() const noexcept { return tags_.size(); }
    std::size_t stop() const noexcept { return tags_.size() + 1; }

    const std::string& tag(std::size_t i) const { return tags_.at(i); }

    std::optional<std::size_t> find_tag(std::string_view tag) const {
        auto it = tag_index_.find(std::string(tag));
        if (it == tag_index_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t tag_index(std::string_view tag) const {
        auto i = find_tag(tag);
        if (!i) throw SchemaError("tag '" + std::string(tag) + "' is not in the label schema");
        return *i;
    }

    bool has_type(std::string_view type) const { return type_index_.count(std::string(type)) != 0; }

    /// Entity type index of a tag, or nullopt for O.
    std::optional<std::size_t> type_of(std::size_t tag) const {
        if (tag == 0 || tag >= tags_.size()) return std::nullopt;
        return (tag - 1) / 2;
    }
    bool is_begin(std::size_t tag) const { return tag > 0 && tag < tags_.size() && tag % 2 == 1; }

    /// Whether transition from -> to is legal. Indices range over tags plus
    /// START and STOP.
    bool allowed(std::size_t from, std::size_t to) const { return mask_[from * (tags_.size() + 2) + to] != 0; }

    std::vector<std::string> tags_of(const std::vector<std::size_t>& idx) const {
        std::vector<std::string> out;
        out.reserve(idx.size());
        for (auto i : idx) out.push_back(tag(i));
        return out;
    }

    std::vector<std::size_t> indices_of(const std::vector<std::string>& tags) const {
        std::vector<std::size_t> out;
        out.reserve(tags.size());
        for (const auto& t : tags) out.push_back(tag_index(t));
        return out;
    }

    bool operator==(const LabelSchema& o) const { return types_ == o.types_ && scheme_ == o.scheme_; }

    /// Schema file: one entity type per line, plus one "scheme=IOB1|IOB2"
    /// line. Blank lines and lines starting with '#' are ignored.
    static LabelSchema parse(std::string_view text) {
        std::vector<std::string> types;
        Scheme scheme = Scheme::IOB2;
        std::size_t lineno = 0;
        std::istringstream in{std::string(text)};
        std::string line;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            auto b = line.find_first_not_of(" \t");
            if (b == std::string::npos || line[b] == '#') continue;
            auto e = line.find_last_not_of(" \t");
            std::string item = line.substr(b, e - b + 1);
            if (item.rfind("scheme", 0) == 0) {
                auto eq = item.find_first_of("=:");
                if (eq == std::string::npos) throw ParseError("scheme line needs '=': " + item, lineno);
                auto v = item.substr(eq + 1);
                v.erase(0, v.find_first_not_of(" \t"));
                try {
                    scheme = parse_scheme(v);
                } catch (const UsageError& err) {
                    throw ParseError(err.what(), lineno);
                }
                continue;
            }
            if (std::find(types.begin(), types.end(), item) != types.end()) {
                throw ParseError("duplicate entity type '" + item + "'", lineno);
            }
            types.push_back(item);
        }
        return LabelSchema(std::move(types), scheme);
    }

    std::string serialize() const {
        std::string out = "scheme=" + std::string(to_string(scheme_)) + "\n";
        for (const auto& t : types_) out += t + "\n";
        return out;
    }

    std::string summary() const {
        std::string out = std::string(to_string(scheme_)) + "[";
        for (std::size_t k = 0; k < types_.size(); ++k) out += (k ? "," : "") + types_[k];
        return out + "]";
    }

private:
    void build_mask() {
        const std::size_t n = tags_.size() + 2;
        mask_.assign(n * n, 0);
        auto set = [&](std::size_t a, std::size_t b) { mask_[a * n + b] = 1; };
        const std::size_t start = tags_.size(), stop = tags_.size() + 1;
        for (std::size_t to = 0; to < tags_.size(); ++to) {
            bool is_inside = to > 0 && to % 2 == 0;
            if (!is_inside) set(start, to);
            for (std::size_t from = 0; from < tags_.size(); ++from) {
                // I-X is reachable only from B-X (to - 1) or I-X (to).
                if (!is_inside || from == to - 1 || from == to) set(from, to);
            }
        }
        for (std::size_t from = 0; from < tags_.size(); ++from) set(from, stop);
    }

    std::vector<std::string> types_;
    Scheme scheme_;
    std::vector<std::string> tags_;
    std::unordered_map<std::string, std::size_t> type_index_;
    std::unordered_map<std::string, std::size_t> tag_index_;
    std::vector<unsigned char> mask_;
};

}  // namespace medner

#endif  // MEDNER_CORPUS_SCHEMA_HPP
