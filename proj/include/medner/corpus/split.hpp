#ifndef MEDNER_CORPUS_SPLIT_HPP
#define MEDNER_CORPUS_SPLIT_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "medner/corpus/corpus.hpp"
#include "medner/util/error.hpp"
#include "medner/util/random.hpp"

namespace medner {

struct CorpusSplits {
    Corpus train;
    Corpus validation;
    Corpus test;
};

struct Fold {
    Corpus train;
    Corpus test;
};

namespace detail {

inline Corpus subset(const Corpus& c, const std::vector<std::size_t>& idx) {
    Corpus out;
    out.schema = c.schema;
    out.documents = c.documents;
    out.sentences.reserve(idx.size());
    for (auto i : idx) out.sentences.push_back(c.sentences[i]);
    return out;
}

/// Sizes floor(r_i * n), then the remainder one at a time to the largest
/// fractional parts (ties to the lower index).
inline std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& ratios) {
    std::array<std::size_t, 3> sizes{};
    std::array<double, 3> frac{};
    std::size_t used = 0;
    for (int i = 0; i < 3; ++i) {
        const double exact = ratios[i] * static_cast<double>(n);
        // Absorb representation error so 0.15 * 100 counts as exactly 15.
        const double fl = std::floor(exact + 1e-9);
        sizes[i] = static_cast<std::size_t>(fl);
        frac[i] = std::max(0.0, exact - fl);
        used += sizes[i];
    }
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
    for (std::size_t k = 0; used < n; ++k, ++used) ++sizes[order[k % 3]];
    return sizes;
}

inline std::string strat_key(const Sentence& s) {
    std::set<std::string> types;
    for (const auto& sp : extract_spans(s.tags())) types.insert(sp.type);
    std::string key;
    for (const auto& t : types) key += t + '|';
    return key;
}

}  // namespace detail

/// Seeded shuffle, then a train/validation/test partition.
inline CorpusSplits split_corpus(const Corpus& corpus, const std::array<double, 3>& ratios, std::uint64_t seed) {
    double sum = 0.0;
    for (double r : ratios) {
        if (!(r >= 0.0)) throw ValidationError("split ratios must be non-negative");
        sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("split ratios must sum to 1, got " + std::to_string(sum));

    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);

    const auto sizes = detail::split_sizes(corpus.size(), ratios);
    auto first = order.begin();
    std::vector<std::size_t> a(first, first + sizes[0]);
    std::vector<std::size_t> b(first + sizes[0], first + sizes[0] + sizes[1]);
    std::vector<std::size_t> c(first + sizes[0] + sizes[1], order.end());
    return {detail::subset(corpus, a), detail::subset(corpus, b), detail::subset(corpus, c)};
}

/// k folds stratified by the set of entity types in each sentence. Sentences
/// are bucketed by that set; buckets are visited in key order, shuffled, and
/// dealt round-robin with one counter running across all buckets, so fold
/// sizes differ by at most one.
inline std::vector<Fold> stratified_kfold(const Corpus& corpus, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw ValidationError("k-fold needs k >= 2");
    if (k > corpus.size()) {
        throw ValidationError("k = " + std::to_string(k) + " exceeds corpus size " + std::to_string(corpus.size()));
    }
    std::map<std::string, std::vector<std::size_t>> buckets;
    for (std::size_t i = 0; i < corpus.size(); ++i) buckets[detail::strat_key(corpus.sentences[i])].push_back(i);

    Rng rng(seed);
    std::vector<std::size_t> fold_of(corpus.size());
    std::size_t counter = 0;
    for (auto& [key, members] : buckets) {
        rng.shuffle(members);
        for (auto i : members) fold_of[i] = counter++ % k;
    }

    std::vector<Fold> folds;
    folds.reserve(k);
    for (std::size_t f = 0; f < k; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < corpus.size(); ++i) (fold_of[i] == f ? test : train).push_back(i);
        folds.push_back({detail::subset(corpus, train), detail::subset(corpus, test)});
    }
    return folds;
}

}  // namespace medner

#endif  // MEDNER_CORPUS_SPLIT_HPP
