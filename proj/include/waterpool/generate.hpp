// Auto-regressive watermarked generation: at every step the key source
// supplies a private key, the mark module modifies (or replaces) the model
// distribution, and a token is emitted. Returns the provenance detection
// will need.

#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "waterpool/keysource.hpp"
#include "waterpool/mark.hpp"
#include "waterpool/rng.hpp"
#include "waterpool/toy_lm.hpp"

namespace waterpool {

struct GenerateResult {
    TokenSeq tokens;
    KeyProvenance provenance;
};

struct KeyExhaustedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {
inline std::span<const Token> tail_window(const TokenSeq& context, std::size_t c) {
    const std::size_t take = context.size() < c ? context.size() : c;
    return std::span<const Token>(context.data() + (context.size() - take), take);
}
}  // namespace detail

inline GenerateResult generate(const LmParams& params, std::span<const Token> prompt,
                               std::int32_t length_min, std::int32_t length_max,
                               const MarkModule& mark, const KeySource& keys,
                               SplitMix64& rng) {
    if (length_min > length_max || length_min < 1)
        throw std::invalid_argument("generate: bad length range");

    const std::size_t length =
        static_cast<std::size_t>(length_min) +
        static_cast<std::size_t>(rng.next_below(
            static_cast<std::uint64_t>(length_max - length_min) + 1));

    KeyProvenance provenance;
    provenance.kind = keys.kind;
    MasterKey master;        // waterpool / greedy_pool expansion root
    bool per_position = is_degenerate(mark.kind);

    switch (keys.kind) {
        case KeySourceKind::fixed:
            master = keys.fixed_key;
            per_position = false;
            break;
        case KeySourceKind::context_hash:
            break;
        case KeySourceKind::greedy_pool: {
            if (length > keys.key_length)
                throw KeyExhaustedError("generate: output length exceeds pool key length");
            provenance.pool_index = pool_sample(keys, rng);
            master = keys.pool[static_cast<std::size_t>(provenance.pool_index)];
            per_position = true;
            break;
        }
        case KeySourceKind::waterpool:
            master = sample_master_key(rng);
            provenance.master = master;
            break;
    }

    TokenSeq context(prompt.begin(), prompt.end());
    TokenSeq output;
    output.reserve(length);

    for (std::size_t i = 0; i < length; ++i) {
        const ProbVec dist = next_dist(params, context);

        SubKey key{0};
        if (mark.kind != MarkKind::none) {
            if (keys.kind == KeySourceKind::context_hash) {
                key = context_hash_key(
                    detail::tail_window(context, static_cast<std::size_t>(keys.context_order)),
                    keys.salt);
            } else {
                key = derive_subkey(master, per_position ? i : 0);
            }
        }

        Token token;
        switch (mark.kind) {
            case MarkKind::none:
                token = sample_token(dist, rng.next_unit());
                break;
            case MarkKind::inverse_sample:
                token = its_transform(key, dist);
                break;
            case MarkKind::gumbel_sample:
                token = exp_transform(key, dist);
                break;
            case MarkKind::logits_add:
                token = sample_token(kgw_reweight(key, dist, mark.delta, mark.gamma),
                                     rng.next_unit());
                break;
            case MarkKind::prob_scale:
                token = sample_token(gamma_reweight(key, dist), rng.next_unit());
                break;
            default:
                throw std::invalid_argument("generate: unknown mark kind");
        }

        output.push_back(token);
        context.push_back(token);
    }

    return GenerateResult{std::move(output), provenance};
}

/// Sequence-level z-score of an output under its own generation key;
/// used to pick the best of several key resamples for logits_add marks.
inline double sequence_green_z(const MarkModule& mark, SubKey key, std::span<const Token> output,
                               std::int32_t vocab_size) {
    double z = 0.0;
    for (Token t : output)
        z += kgw_statistic(key, t, output.size(), static_cast<std::size_t>(vocab_size),
                           mark.gamma);
    return z;
}

/// Runs `attempts` independent generations and keeps the one whose output
/// scores the highest sequence-level z under its own key. Only meaningful
/// for logits_add marks with per-output keys.
inline GenerateResult generate_best_of(const LmParams& params, std::span<const Token> prompt,
                                       std::int32_t length_min, std::int32_t length_max,
                                       const MarkModule& mark, const KeySource& keys,
                                       SplitMix64& rng, int attempts) {
    if (attempts <= 1) return generate(params, prompt, length_min, length_max, mark, keys, rng);
    GenerateResult best;
    double best_z = 0.0;
    for (int a = 0; a < attempts; ++a) {
        GenerateResult r = generate(params, prompt, length_min, length_max, mark, keys, rng);
        const double z = sequence_green_z(mark, derive_subkey(r.provenance.master, 0), r.tokens,
                                          params.vocab_size);
        if (a == 0 || z > best_z) {
            best = std::move(r);
            best_z = z;
        }
    }
    return best;
}

}  // namespace waterpool
