#ifndef MEDNER_EMBEDDINGS_HPP
#define MEDNER_EMBEDDINGS_HPP

#include <charconv>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "medner/corpus/corpus.hpp"
#include "medner/util/error.hpp"
#include "medner/util/log.hpp"

namespace medner {

enum class OovPolicy { Zero, UnkRow, LowercaseThenUnk };

inline std::string_view to_string(OovPolicy p) {
    switch (p) {
        case OovPolicy::Zero: return "zero";
        case OovPolicy::UnkRow: return "unk_row";
        case OovPolicy::LowercaseThenUnk: return "lowercase_then_unk";
    }
    return "unk_row";
}

inline OovPolicy parse_oov_policy(std::string_view s) {
    if (s == "zero") return OovPolicy::Zero;
    if (s == "unk_row" || s == "unk") return OovPolicy::UnkRow;
    if (s == "lowercase_then_unk" || s == "lowercase") return OovPolicy::LowercaseThenUnk;
    throw UsageError("unknown OOV policy '" + std::string(s) + "' (expected zero, unk_row, lowercase_then_unk)");
}

/// ASCII lower-casing; other code points are left alone.
inline std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

/// Immutable word -> vector table. Lookup is total: unknown words resolve
/// through the OOV policy.
class EmbeddingTable {
public:
    EmbeddingTable() = default;

    /// `data` is row-major, words.size() x dimension. Without an explicit
    /// unk vector the element-wise mean of all rows is used.
    EmbeddingTable(std::size_t dimension, std::vector<std::string> words, std::vector<double> data,
                   std::optional<std::vector<double>> unk = std::nullopt, OovPolicy policy = OovPolicy::UnkRow)
        : dim_(dimension), words_(std::move(words)), data_(std::move(data)), policy_(policy) {
        if (dim_ == 0) throw ValidationError("embedding dimension must be positive");
        if (data_.size() != words_.size() * dim_) throw ValidationError("embedding matrix size does not match rows");
        for (std::size_t i = 0; i < words_.size(); ++i) {
            if (!index_.emplace(words_[i], i).second) throw ValidationError("duplicate embedding word " + words_[i]);
        }
        zero_.assign(dim_, 0.0);
        if (unk) {
            if (unk->size() != dim_) throw ValidationError("unk vector has wrong dimension");
            unk_ = std::move(*unk);
        } else {
            unk_.assign(dim_, 0.0);
            for (std::size_t r = 0; r < words_.size(); ++r) {
                for (std::size_t d = 0; d < dim_; ++d) unk_[d] += data_[r * dim_ + d];
            }
            if (!words_.empty()) {
                for (auto& v : unk_) v /= static_cast<double>(words_.size());
            }
        }
    }

    std::size_t dimension() const noexcept { return dim_; }
    std::size_t size() const noexcept { return words_.size(); }
    OovPolicy policy() const noexcept { return policy_; }
    void set_policy(OovPolicy p) noexcept { policy_ = p; }
    const std::vector<std::string>& words() const noexcept { return words_; }
    std::span<const double> unk_vector() const noexcept { return unk_; }

    std::optional<std::size_t> find(std::string_view word) const {
        auto it = index_.find(std::string(word));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::span<const double> row(std::size_t i) const { return std::span<const double>(data_).subspan(i * dim_, dim_); }

    std::span<const double> lookup(std::string_view token) const {
        if (auto i = find(token)) return row(*i);
        if (policy_ == OovPolicy::LowercaseThenUnk) {
            if (auto i = find(ascii_lower(token))) return row(*i);
        }
        return policy_ == OovPolicy::Zero ? std::span<const double>(zero_) : std::span<const double>(unk_);
    }

private:
    std::size_t dim_ = 0;
    std::vector<std::string> words_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<double> data_;
    std::vector<double> unk_;
    std::vector<double> zero_;
    OovPolicy policy_ = OovPolicy::UnkRow;
};

namespace detail {

inline bool all_digits(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s) {
        if (c < '0' || c > '9') return false;
    }
    return true;
}

inline std::optional<double> parse_double(std::string_view s) {
    double v = 0.0;
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

}  // namespace detail

/// Parses the text embedding format: "word v1 ... vd" per line, with an
/// optional "count dim" header line. `expected_dimension` 0 takes the width
/// of the first row. Duplicate words keep their first row. A literal "<unk>"
/// row becomes the unk vector.
inline EmbeddingTable parse_embeddings(std::string_view text, std::size_t expected_dimension,
                                       OovPolicy policy = OovPolicy::UnkRow) {
    std::size_t dim = expected_dimension;
    std::vector<std::string> words;
    std::vector<double> data;
    std::unordered_map<std::string, bool> seen;
    std::optional<std::vector<double>> unk;

    std::size_t lineno = 0, pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        auto fields = detail::split_ws(line);
        if (fields.empty()) continue;
        if (lineno == 1 && fields.size() == 2 && detail::all_digits(fields[0]) && detail::all_digits(fields[1]) &&
            (dim == 0 || std::stoul(fields[1]) == dim)) {
            if (dim == 0) dim = std::stoul(fields[1]);
            continue;
        }
        if (dim == 0) dim = fields.size() - 1;
        if (dim == 0 || fields.size() != dim + 1) {
            throw ParseError("expected " + std::to_string(dim) + " values after the word, found " +
                                 std::to_string(fields.size() - 1),
                             lineno);
        }
        std::vector<double> row;
        row.reserve(dim);
        for (std::size_t k = 1; k < fields.size(); ++k) {
            auto v = detail::parse_double(fields[k]);
            if (!v || !std::isfinite(*v)) throw ParseError("bad number '" + fields[k] + "'", lineno);
            row.push_back(*v);
        }
        if (seen.count(fields[0])) {
            log::warn("embedding line " + std::to_string(lineno) + ": duplicate word '" + fields[0] +
                      "', keeping the first row");
            continue;
        }
        seen.emplace(fields[0], true);
        if (fields[0] == "<unk>") unk = row;
        words.push_back(fields[0]);
        data.insert(data.end(), row.begin(), row.end());
    }
    if (words.empty()) throw ParseError("embedding file has no vectors");
    return EmbeddingTable(dim, std::move(words), std::move(data), std::move(unk), policy);
}

inline EmbeddingTable load_embeddings(const std::string& path, std::size_t expected_dimension,
                                      OovPolicy policy = OovPolicy::UnkRow) {
    try {
        return parse_embeddings(read_file(path), expected_dimension, policy);
    } catch (const ParseError& e) {
        throw e.in_file(path);
    }
}

/// Shortest round-trip formatting, so parsing the output restores every value
/// exactly.
inline std::string write_embeddings(const EmbeddingTable& table, bool header = true) {
    std::string out;
    if (header) out += std::to_string(table.size()) + " " + std::to_string(table.dimension()) + "\n";
    char buf[64];
    for (std::size_t r = 0; r < table.size(); ++r) {
        out += table.words()[r];
        for (double v : table.row(r)) {
            auto res = std::to_chars(buf, buf + sizeof buf, v);
            out += ' ';
            out.append(buf, res.ptr);
        }
        out += '\n';
    }
    return out;
}

/// Element-wise mean of equal-length vectors.
inline std::vector<double> pool_mean(const std::vector<std::span<const double>>& vectors) {
    if (vectors.empty()) throw ValidationError("pool_mean of an empty list");
    const std::size_t d = vectors.front().size();
    std::vector<double> out(d, 0.0);
    for (const auto& v : vectors) {
        if (v.size() != d) throw ValidationError("pool_mean over vectors of different lengths");
        for (std::size_t k = 0; k < d; ++k) out[k] += v[k];
    }
    for (auto& x : out) x /= static_cast<double>(vectors.size());
    return out;
}

inline std::vector<double> pool_mean(const std::vector<std::vector<double>>& vectors) {
    std::vector<std::span<const double>> views(vectors.begin(), vectors.end());
    return pool_mean(views);
}

}  // namespace medner

#endif  // MEDNER_EMBEDDINGS_HPP
