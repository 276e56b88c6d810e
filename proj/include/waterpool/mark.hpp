// Mark modules: the reweight functions F(k, P) that stochastically modify
// a next-token distribution under a private key, and the per-token
// statistics S(k, y) their detectors score with.
//
//   logits_add    - boost a keyed green list by delta in logit space (KGW, Unigram)
//   inverse_sample- keyed permutation + inverse transform sampling (ITS)
//   gumbel_sample - Gumbel-max sampling with keyed noise (EXP)
//   prob_scale    - keyed permutation + doubled-and-clipped CDF (Gamma)
//
// inverse_sample and gumbel_sample return one token (F is the degenerate
// distribution at it); the other kinds return a full distribution.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "waterpool/rng.hpp"
#include "waterpool/toy_lm.hpp"

namespace waterpool {

enum class MarkKind { none, logits_add, inverse_sample, gumbel_sample, prob_scale };

struct MarkModule {
    MarkKind kind = MarkKind::none;
    double delta = 0.0;  // logits_add boost
    double gamma = 0.0;  // logits_add green fraction

    friend bool operator==(const MarkModule&, const MarkModule&) = default;
};

/// True for marks whose F is a degenerate distribution: they consume one
/// SubKey per token and decide the token themselves.
constexpr bool is_degenerate(MarkKind kind) {
    return kind == MarkKind::inverse_sample || kind == MarkKind::gumbel_sample;
}

inline MarkModule make_mark(MarkKind kind, double delta = 0.0, double gamma = 0.0) {
    if (kind == MarkKind::logits_add) {
        if (!(delta > 0.0)) throw std::invalid_argument("logits_add requires delta > 0");
        if (!(gamma > 0.0 && gamma < 1.0))
            throw std::invalid_argument("logits_add requires gamma in (0, 1)");
    }
    return MarkModule{kind, delta, gamma};
}

// ---------------------------------------------------------------------------
// logits_add (KGW / Unigram)

/// Green-list probabilities scaled by e^delta, renormalized. Identical to
/// adding delta to green logits before the softmax.
inline ProbVec kgw_reweight(SubKey key, const ProbVec& p, double delta, double gamma) {
    if (delta == 0.0) return p;
    const std::size_t vocab = p.size();
    const std::size_t g = green_size(vocab, gamma);
    const TokenPermutation perm = key_permutation(key, vocab);
    const double boost = std::exp(delta);

    ProbVec out(vocab);
    double total = 0.0;
    for (std::size_t t = 0; t < vocab; ++t) {
        out[t] = static_cast<std::size_t>(perm.token_to_slot[t]) < g ? p[t] * boost : p[t];
        total += out[t];
    }
    for (double& v : out) v /= total;
    return out;
}

inline bool in_green_list(SubKey key, Token token, std::size_t vocab_size, double gamma) {
    const std::size_t g = green_size(vocab_size, gamma);
    const TokenPermutation perm = key_permutation(key, vocab_size);
    return static_cast<std::size_t>(perm.token_to_slot[static_cast<std::size_t>(token)]) < g;
}

/// (1_{y in G} - gamma) / sqrt(len * gamma * (1 - gamma)); summing over a
/// sequence yields a standard-normal z under the null.
inline double kgw_statistic(SubKey key, Token token, std::size_t seq_len,
                            std::size_t vocab_size, double gamma) {
    if (seq_len < 1) throw std::invalid_argument("kgw_statistic: seq_len must be >= 1");
    const double indicator = in_green_list(key, token, vocab_size, gamma) ? 1.0 : 0.0;
    return (indicator - gamma) / std::sqrt(static_cast<double>(seq_len) * gamma * (1.0 - gamma));
}

// ---------------------------------------------------------------------------
// inverse_sample (ITS)

/// Smallest slot whose inclusive cumulative mass exceeds u; falls back to
/// the last slot carrying mass when u reaches the total.
inline std::size_t inverse_sample_slot(const ProbVec& permuted, double u) {
    double cum = 0.0;
    std::size_t last_mass = 0;
    for (std::size_t z = 0; z < permuted.size(); ++z) {
        if (permuted[z] > 0.0) last_mass = z;
        cum += permuted[z];
        if (cum > u) return z;
    }
    return last_mass;
}

inline Token its_transform(SubKey key, const ProbVec& p) {
    const TokenPermutation perm = key_permutation(key, p.size());
    const double u = uniform_unit(key);
    double cum = 0.0;
    std::size_t last_mass = 0;
    for (std::size_t z = 0; z < p.size(); ++z) {
        const double mass = p[static_cast<std::size_t>(perm.slot_to_token[z])];
        if (mass > 0.0) last_mass = z;
        cum += mass;
        if (cum > u) return perm.slot_to_token[z];
    }
    return perm.slot_to_token[last_mass];
}

/// Centered-product form evaluated from raw ingredients; slot is 0-based.
inline double its_statistic_terms(double u, std::size_t slot, std::size_t vocab_size) {
    if (vocab_size < 2) throw std::invalid_argument("its_statistic: vocab_size must be >= 2");
    const double rank = static_cast<double>(slot) / static_cast<double>(vocab_size - 1);
    return (u - 0.5) * (rank - 0.5);
}

inline double its_statistic(SubKey key, Token token, std::size_t vocab_size) {
    const TokenPermutation perm = key_permutation(key, vocab_size);
    const std::size_t slot =
        static_cast<std::size_t>(perm.token_to_slot[static_cast<std::size_t>(token)]);
    return its_statistic_terms(uniform_unit(key), slot, vocab_size);
}

// ---------------------------------------------------------------------------
// gumbel_sample (EXP)

/// argmax_t log p_t + g_t with keyed Gumbel noise; zero-probability tokens
/// are excluded (log 0 = -inf).
inline Token exp_transform(SubKey key, const ProbVec& p) {
    Token best = -1;
    double best_score = -1e300;
    for (std::size_t t = 0; t < p.size(); ++t) {
        if (p[t] <= 0.0) continue;
        const double score = std::log(p[t]) + gumbel_component(key, t);
        if (score > best_score) {
            best_score = score;
            best = static_cast<Token>(t);
        }
    }
    if (best < 0) throw std::invalid_argument("exp_transform: distribution has no mass");
    return best;
}

/// S = -exp(-g_{k, y}); under an independent key, -S ~ Exp(1).
inline double exp_statistic(SubKey key, Token token) {
    return -std::exp(-gumbel_component(key, static_cast<std::size_t>(token)));
}

// ---------------------------------------------------------------------------
// prob_scale (Gamma)

/// Double-and-clip the permuted CDF, difference back to a PMF. The value
/// before the first permuted position is taken as 0.
inline ProbVec doubled_cdf_pmf(const ProbVec& permuted) {
    ProbVec out(permuted.size());
    double cum = 0.0;
    double prev_clipped = 0.0;
    for (std::size_t z = 0; z < permuted.size(); ++z) {
        cum += permuted[z];
        const double clipped = std::min(2.0 * cum, 1.0);
        out[z] = clipped - prev_clipped;
        prev_clipped = clipped;
    }
    return out;
}

inline ProbVec gamma_reweight(SubKey key, const ProbVec& p) {
    const TokenPermutation perm = key_permutation(key, p.size());
    ProbVec permuted(p.size());
    for (std::size_t z = 0; z < p.size(); ++z)
        permuted[z] = p[static_cast<std::size_t>(perm.slot_to_token[z])];
    const ProbVec reweighted = doubled_cdf_pmf(permuted);
    ProbVec out(p.size());
    for (std::size_t t = 0; t < p.size(); ++t)
        out[t] = reweighted[static_cast<std::size_t>(perm.token_to_slot[t])];
    return out;
}

inline constexpr double kGammaStatFloor = -30.0;

/// Log-likelihood ratio of modified vs original probability of the token.
/// Needs the original distribution, i.e. model access at detection time.
inline double gamma_statistic(SubKey key, Token token, const ProbVec& p) {
    const double orig = p[static_cast<std::size_t>(token)];
    if (orig <= 0.0) throw std::invalid_argument("gamma_statistic: P(token) must be > 0");
    const double modified = gamma_reweight(key, p)[static_cast<std::size_t>(token)];
    if (modified <= 0.0) return kGammaStatFloor;
    const double value = std::log(modified) - std::log(orig);
    return value < kGammaStatFloor ? kGammaStatFloor : value;
}

inline std::string mark_kind_name(MarkKind kind) {
    switch (kind) {
        case MarkKind::none: return "none";
        case MarkKind::logits_add: return "logits_add";
        case MarkKind::inverse_sample: return "inverse_sample";
        case MarkKind::gumbel_sample: return "gumbel_sample";
        case MarkKind::prob_scale: return "prob_scale";
    }
    return "unknown";
}

inline MarkKind mark_kind_from_name(const std::string& name) {
    if (name == "none") return MarkKind::none;
    if (name == "logits_add") return MarkKind::logits_add;
    if (name == "inverse_sample") return MarkKind::inverse_sample;
    if (name == "gumbel_sample") return MarkKind::gumbel_sample;
    if (name == "prob_scale") return MarkKind::prob_scale;
    throw std::invalid_argument("unknown mark kind: " + name);
}

}  // namespace waterpool
