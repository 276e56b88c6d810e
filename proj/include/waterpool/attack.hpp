// Semantic-preserving corruption of candidate texts, used to measure
// robustness. The lexical attack applies a budget of random add/delete/
// replace edits; the crop attack keeps one contiguous window.

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

#include "waterpool/rng.hpp"
#include "waterpool/toy_lm.hpp"

namespace waterpool {

enum class AttackKind { none, lexical, crop };

struct AttackSpec {
    AttackKind kind = AttackKind::none;
    double rate = 0.1;           // lexical: edits = round(rate * len)
    double keep_fraction = 0.5;  // crop
    std::uint64_t seed = 0;
};

/// round(rate * len) edits; each edit picks add/delete/replace uniformly
/// and a uniform position; inserted and replacement tokens are uniform
/// over the vocabulary.
inline TokenSeq lexical_attack(std::span<const Token> seq, double rate, std::int32_t vocab_size,
                               SplitMix64& rng) {
    if (rate < 0.0 || rate > 1.0)
        throw std::invalid_argument("lexical_attack: rate must lie in [0, 1]");
    TokenSeq out(seq.begin(), seq.end());
    const std::size_t edits =
        static_cast<std::size_t>(std::floor(rate * static_cast<double>(seq.size()) + 0.5));
    for (std::size_t e = 0; e < edits; ++e) {
        const std::uint64_t op = out.empty() ? 0 : rng.next_below(3);
        const auto random_token = [&] {
            return static_cast<Token>(rng.next_below(static_cast<std::uint64_t>(vocab_size)));
        };
        if (op == 0) {  // add
            const std::size_t pos = static_cast<std::size_t>(rng.next_below(out.size() + 1));
            out.insert(out.begin() + static_cast<std::ptrdiff_t>(pos), random_token());
        } else if (op == 1) {  // delete
            const std::size_t pos = static_cast<std::size_t>(rng.next_below(out.size()));
            out.erase(out.begin() + static_cast<std::ptrdiff_t>(pos));
        } else {  // replace
            const std::size_t pos = static_cast<std::size_t>(rng.next_below(out.size()));
            out[pos] = random_token();
        }
    }
    return out;
}

/// Keeps a contiguous window of round(keep_fraction * len) tokens at a
/// uniform offset.
inline TokenSeq crop_attack(std::span<const Token> seq, double keep_fraction, SplitMix64& rng) {
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
        throw std::invalid_argument("crop_attack: keep_fraction must lie in (0, 1]");
    const std::size_t window =
        static_cast<std::size_t>(std::floor(keep_fraction * static_cast<double>(seq.size()) + 0.5));
    if (window == 0) throw std::invalid_argument("crop_attack: window rounds to zero");
    const std::size_t offset = static_cast<std::size_t>(rng.next_below(seq.size() - window + 1));
    return TokenSeq(seq.begin() + static_cast<std::ptrdiff_t>(offset),
                    seq.begin() + static_cast<std::ptrdiff_t>(offset + window));
}

inline TokenSeq apply_attack(const AttackSpec& spec, std::span<const Token> seq,
                             std::int32_t vocab_size, SplitMix64& rng) {
    switch (spec.kind) {
        case AttackKind::none: return TokenSeq(seq.begin(), seq.end());
        case AttackKind::lexical: return lexical_attack(seq, spec.rate, vocab_size, rng);
        case AttackKind::crop: return crop_attack(seq, spec.keep_fraction, rng);
    }
    throw std::invalid_argument("apply_attack: unknown attack kind");
}

inline std::string attack_kind_name(AttackKind kind) {
    switch (kind) {
        case AttackKind::none: return "none";
        case AttackKind::lexical: return "lexical";
        case AttackKind::crop: return "crop";
    }
    return "unknown";
}

inline AttackKind attack_kind_from_name(const std::string& name) {
    if (name == "none") return AttackKind::none;
    if (name == "lexical") return AttackKind::lexical;
    if (name == "crop") return AttackKind::crop;
    throw std::invalid_argument("unknown attack kind: " + name);
}

/// Stable label for report rows, e.g. "lexical@0.10".
inline std::string attack_label(const AttackSpec& spec) {
    if (spec.kind == AttackKind::none) return "none";
    char buf[48];
    if (spec.kind == AttackKind::lexical)
        std::snprintf(buf, sizeof(buf), "lexical@%.2f", spec.rate);
    else
        std::snprintf(buf, sizeof(buf), "crop@%.2f", spec.keep_fraction);
    return buf;
}

}  // namespace waterpool
