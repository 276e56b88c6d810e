// Deterministic toy language model over an abstract token vocabulary.
//
// Stands in for a real LLM during experiments: maps any context window to
// a fixed next-token distribution whose entropy is controlled by a single
// temperature knob. All values are pure functions of (params, context).

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "waterpool/rng.hpp"

namespace waterpool {

using Token = std::int32_t;
using TokenSeq = std::vector<Token>;
using ProbVec = std::vector<double>;

struct LmParams {
    std::int32_t vocab_size = 128;
    std::int32_t context_order = 3;   // tokens of history folded into the logit seed
    double temperature = 1.0;         // ->0 one-hot, ->inf uniform
    std::uint64_t model_seed = 0;

    friend bool operator==(const LmParams&, const LmParams&) = default;
};

namespace detail {
// Fold the last `order` context tokens (fewer when the context is shorter)
// plus the window length into one seed.
inline std::uint64_t context_seed(const LmParams& params, std::span<const Token> context) {
    const std::size_t order = static_cast<std::size_t>(params.context_order);
    const std::size_t window = context.size() < order ? context.size() : order;
    std::uint64_t seed = derive_u64(params.model_seed, window);
    for (std::size_t i = context.size() - window; i < context.size(); ++i)
        seed = derive_u64(seed, static_cast<std::uint64_t>(context[i]) + 1);
    return seed;
}

// Standard normal via Box-Muller on two counter-derived uniforms.
inline double gaussian(std::uint64_t seed, std::uint64_t index) {
    const double u1 = to_unit_open(derive_u64(seed, 2 * index));
    const double u2 = to_unit_half_open(derive_u64(seed, 2 * index + 1));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}
}  // namespace detail

/// Next-token distribution: softmax of hashed standard-normal logits
/// scaled by 1/temperature.
inline ProbVec next_dist(const LmParams& params, std::span<const Token> context) {
    for (Token t : context)
        if (t < 0 || t >= params.vocab_size)
            throw std::out_of_range("next_dist: context token outside vocabulary");
    const std::size_t vocab = static_cast<std::size_t>(params.vocab_size);
    const std::uint64_t seed = detail::context_seed(params, context);
    const double inv_temp = 1.0 / params.temperature;

    std::vector<double> logits(vocab);
    double max_logit = -1e300;
    for (std::size_t t = 0; t < vocab; ++t) {
        logits[t] = detail::gaussian(seed, t) * inv_temp;
        if (logits[t] > max_logit) max_logit = logits[t];
    }
    double total = 0.0;
    for (std::size_t t = 0; t < vocab; ++t) {
        logits[t] = std::exp(logits[t] - max_logit);
        total += logits[t];
    }
    for (std::size_t t = 0; t < vocab; ++t) logits[t] /= total;
    return logits;
}

/// Inverse-transform draw from a probability vector with a given uniform.
inline Token sample_token(const ProbVec& probs, double u) {
    double cum = 0.0;
    for (std::size_t t = 0; t < probs.size(); ++t) {
        cum += probs[t];
        if (cum > u) return static_cast<Token>(t);
    }
    return static_cast<Token>(probs.size() - 1);  // guards rounding at u ~ 1
}

/// exp of the mean negative log-probability of `seq`, each token scored
/// against the model's distribution given the preceding tokens.
inline double log_perplexity(const LmParams& params, std::span<const Token> seq,
                             std::span<const Token> prompt = {}) {
    if (seq.empty()) throw std::invalid_argument("log_perplexity: empty sequence");
    TokenSeq context(prompt.begin(), prompt.end());
    double nll = 0.0;
    for (Token t : seq) {
        const ProbVec p = next_dist(params, context);
        const double prob = p[static_cast<std::size_t>(t)] < 1e-12
                                ? 1e-12
                                : p[static_cast<std::size_t>(t)];
        nll -= std::log(prob);
        context.push_back(t);
    }
    return std::exp(nll / static_cast<double>(seq.size()));
}

/// Per-step watermark potential sum_t (1 - p_t) p_t = 1 - sum_t p_t^2.
inline double watermark_potential(const ProbVec& probs) {
    double sum_sq = 0.0;
    for (double p : probs) sum_sq += p * p;
    return 1.0 - sum_sq;
}

}  // namespace waterpool
