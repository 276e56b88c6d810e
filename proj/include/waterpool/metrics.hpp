// Evaluation metrics. Scores are p-values throughout: smaller means "more
// watermarked".

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "waterpool/rng.hpp"
#include "waterpool/toy_lm.hpp"

namespace waterpool {

/// True-positive rate at a fixed false-positive rate. The threshold is the
/// fpr-quantile of the negative scores with lower interpolation
/// (sorted index floor(fpr * (n - 1))); positives at or below it count.
inline double tpr_at_fpr(std::span<const double> pos, std::span<const double> neg, double fpr) {
    if (pos.empty() || neg.empty()) throw std::invalid_argument("tpr_at_fpr: empty score list");
    if (!(fpr > 0.0 && fpr < 1.0)) throw std::invalid_argument("tpr_at_fpr: fpr must lie in (0,1)");
    std::vector<double> sorted_neg(neg.begin(), neg.end());
    std::sort(sorted_neg.begin(), sorted_neg.end());
    const std::size_t idx = static_cast<std::size_t>(
        std::floor(fpr * static_cast<double>(sorted_neg.size() - 1)));
    const double threshold = sorted_neg[idx];
    std::size_t hits = 0;
    for (double p : pos)
        if (p <= threshold) ++hits;
    return static_cast<double>(hits) / static_cast<double>(pos.size());
}

/// Mann-Whitney formulation: the probability that a random positive scores
/// more watermarked (smaller) than a random negative, ties counted 1/2.
inline double roc_auc(std::span<const double> pos, std::span<const double> neg) {
    if (pos.empty() || neg.empty()) throw std::invalid_argument("roc_auc: empty score list");
    std::vector<double> sorted_neg(neg.begin(), neg.end());
    std::sort(sorted_neg.begin(), sorted_neg.end());
    double wins = 0.0;
    for (double p : pos) {
        const auto lo = std::lower_bound(sorted_neg.begin(), sorted_neg.end(), p);
        const auto hi = std::upper_bound(lo, sorted_neg.end(), p);
        const double greater = static_cast<double>(sorted_neg.end() - hi);
        const double equal = static_cast<double>(hi - lo);
        wins += greater + 0.5 * equal;
    }
    return wins / (static_cast<double>(pos.size()) * static_cast<double>(sorted_neg.size()));
}

namespace detail {
inline std::uint64_t ngram_fingerprint(std::span<const Token> window) {
    std::uint64_t h = 0x6E6772616D736967ULL;
    for (Token t : window) h = derive_u64(h, static_cast<std::uint64_t>(t) + 1);
    return h;
}

inline void count_ngrams(std::span<const TokenSeq> outputs, std::size_t n,
                         std::unordered_set<std::uint64_t>& unique, std::size_t& total) {
    for (const TokenSeq& out : outputs) {
        if (out.size() < n) continue;
        for (std::size_t i = 0; i + n <= out.size(); ++i) {
            unique.insert(ngram_fingerprint(std::span<const Token>(out.data() + i, n)));
            ++total;
        }
    }
}
}  // namespace detail

/// Percentage of distinct n-grams over all n-grams, pooled across outputs.
inline double distinct_n_global(std::span<const TokenSeq> outputs, std::size_t n) {
    if (outputs.empty()) throw std::invalid_argument("distinct_n: no outputs");
    std::unordered_set<std::uint64_t> unique;
    std::size_t total = 0;
    detail::count_ngrams(outputs, n, unique, total);
    if (total == 0) return 100.0;
    return 100.0 * static_cast<double>(unique.size()) / static_cast<double>(total);
}

/// Distinct-n computed within each prompt's group of outputs, averaged
/// over prompts.
inline double distinct_n_grouped(std::span<const std::vector<TokenSeq>> groups, std::size_t n) {
    if (groups.empty()) throw std::invalid_argument("distinct_n: no groups");
    double sum = 0.0;
    for (const std::vector<TokenSeq>& group : groups) sum += distinct_n_global(group, n);
    return sum / static_cast<double>(groups.size());
}

/// Bootstrap standard error of a statistic of one sample, resampling with
/// replacement. `statistic` is called on index vectors into the sample.
template <typename Statistic>
double bootstrap_stderr(std::size_t sample_size, int resamples, std::uint64_t seed,
                        Statistic&& statistic) {
    if (sample_size == 0 || resamples < 2) return 0.0;
    std::vector<double> values(static_cast<std::size_t>(resamples));
    std::vector<std::size_t> indices(sample_size);
    for (int r = 0; r < resamples; ++r) {
        SplitMix64 rng(derive_u64(seed, static_cast<std::uint64_t>(r)));
        for (std::size_t i = 0; i < sample_size; ++i)
            indices[i] = static_cast<std::size_t>(rng.next_below(sample_size));
        values[static_cast<std::size_t>(r)] = statistic(indices);
    }
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    return std::sqrt(var / static_cast<double>(values.size() - 1));
}

}  // namespace waterpool
