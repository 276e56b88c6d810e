// Deterministic sentence encoder: signed feature hashing of token 1- to
// 3-grams into 128 buckets, L2-normalized. A dependency-free stand-in for
// a neural sentence embedding; what matters for key retrieval is only that
// lightly edited texts stay closer to their original than to anything else.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>

#include "waterpool/rng.hpp"
#include "waterpool/toy_lm.hpp"

namespace waterpool {

inline constexpr std::size_t kEmbedDim = 128;

using Embedding = std::array<float, kEmbedDim>;

inline Embedding encode(std::span<const Token> seq) {
    if (seq.empty()) throw std::invalid_argument("encode: empty sequence");

    std::array<double, kEmbedDim> acc{};
    for (std::size_t n = 1; n <= 3; ++n) {
        if (seq.size() < n) break;
        const std::uint64_t ngram_seed = derive_u64(0x77504F4F4C454E43ULL, n);
        for (std::size_t i = 0; i + n <= seq.size(); ++i) {
            std::uint64_t h = ngram_seed;
            for (std::size_t j = 0; j < n; ++j)
                h = derive_u64(h, static_cast<std::uint64_t>(seq[i + j]) + 1);
            const double sign = (h >> 63) ? 1.0 : -1.0;
            acc[h % kEmbedDim] += sign;
        }
    }

    double norm_sq = 0.0;
    for (double v : acc) norm_sq += v * v;
    if (norm_sq == 0.0) {  // unreachable for realistic inputs
        acc[0] = 1.0;
        norm_sq = 1.0;
    }
    const double inv_norm = 1.0 / std::sqrt(norm_sq);

    Embedding out;
    for (std::size_t d = 0; d < kEmbedDim; ++d)
        out[d] = static_cast<float>(acc[d] * inv_norm);
    return out;
}

inline double cosine(const Embedding& a, const Embedding& b) {
    double dot = 0.0;
    for (std::size_t d = 0; d < kEmbedDim; ++d)
        dot += static_cast<double>(a[d]) * static_cast<double>(b[d]);
    return dot;
}

}  // namespace waterpool
