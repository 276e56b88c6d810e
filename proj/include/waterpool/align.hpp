// Edit-distance alignment of a per-position key sequence against a
// candidate token sequence.
//
// The score is the three-branch max recursion
//
//   d(k, y) = max{ d(k[1:], y[1:]) + S(k[0], y[0]),
//                  d(k,     y[1:]) - eta,
//                  d(k[1:], y    ) - eta }
//
// with base value -eta * remaining_length, computed by dynamic programming
// over an (n+1) x (len+1) table in O(n * len).
//
// Per-token statistics are supplied as "row statistics": bound to one key
// they evaluate against every candidate token, which lets the inverse-sample
// statistic build its vocabulary permutation once per key instead of once
// per cell.

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "waterpool/mark.hpp"
#include "waterpool/rng.hpp"

namespace waterpool {

/// Alignment reward for gumbel_sample keys: -log(1 - u_{k, y}), where u is
/// the uniform behind the key's Gumbel component for token y. Under an
/// independent key this is Exp(1); for the token actually picked by
/// Gumbel-max sampling u is close to 1 and the reward is large.
struct ExpAlignStat {
    double operator()(SubKey key, Token token) const {
        return -std::log1p(-gumbel_unit(key, static_cast<std::size_t>(token)));
    }

    void fill_row(SubKey key, std::span<const Token> candidate, std::span<double> out) const {
        const std::uint64_t root = derive_u64(key.value, detail::kTagGumbel);
        for (std::size_t j = 0; j < candidate.size(); ++j) {
            const double u =
                detail::to_unit_open(derive_u64(root, static_cast<std::uint64_t>(candidate[j])));
            out[j] = -std::log1p(-u);
        }
    }
};

/// Alignment reward for inverse_sample keys: the centered-product statistic
/// (u - 1/2)((slot)/(|V|-1) - 1/2). Zero-mean under an independent key.
struct ItsAlignStat {
    std::size_t vocab_size = 0;

    double operator()(SubKey key, Token token) const {
        return its_statistic(key, token, vocab_size);
    }

    void fill_row(SubKey key, std::span<const Token> candidate, std::span<double> out) const {
        const TokenPermutation perm = key_permutation(key, vocab_size);
        const double centered_u = uniform_unit(key) - 0.5;
        const double scale = 1.0 / static_cast<double>(vocab_size - 1);
        for (std::size_t j = 0; j < candidate.size(); ++j) {
            const double rank =
                static_cast<double>(perm.token_to_slot[static_cast<std::size_t>(candidate[j])]) *
                scale;
            out[j] = centered_u * (rank - 0.5);
        }
    }
};

template <typename Stat>
double alignment_score(std::span<const SubKey> keys, std::span<const Token> candidate,
                       const Stat& stat, double eta) {
    const std::size_t n = keys.size();
    const std::size_t len = candidate.size();

    // below[j] = d(k[i+1:], y[j:]); current[j] = d(k[i:], y[j:])
    std::vector<double> below(len + 1), current(len + 1), row_stats(len);
    for (std::size_t j = 0; j <= len; ++j)
        below[j] = -eta * static_cast<double>(len - j);

    for (std::size_t i = n; i-- > 0;) {
        stat.fill_row(keys[i], candidate, row_stats);
        current[len] = -eta * static_cast<double>(n - i);
        for (std::size_t j = len; j-- > 0;) {
            const double match = below[j + 1] + row_stats[j];
            const double skip_token = current[j + 1] - eta;
            const double skip_key = below[j] - eta;
            double best = match > skip_token ? match : skip_token;
            if (skip_key > best) best = skip_key;
            current[j] = best;
        }
        std::swap(below, current);
    }
    return below[0];
}

/// Per-position keys of a master key, positions [0, count).
inline std::vector<SubKey> subkey_sequence(const MasterKey& master, std::size_t count) {
    std::vector<SubKey> keys(count);
    for (std::size_t i = 0; i < count; ++i) keys[i] = derive_subkey(master, i);
    return keys;
}

}  // namespace waterpool
