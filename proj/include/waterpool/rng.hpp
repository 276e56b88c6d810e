// Deterministic key derivation and keyed random objects.
//
// Every random object used by the watermark pipeline (uniforms, Gumbel
// noise, vocabulary permutations, green lists) is a pure function of a
// 64-bit key, so generation and detection reconstruct identical objects
// from identical keys, on any host, under any thread schedule.
//
// The mixing function is the SplitMix64 finalizer (Steele, Lea, Flood 2014).
// derive(seed, i) equals the (i+1)-th output of a SplitMix64 stream seeded
// with `seed`, evaluated statelessly.

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace waterpool {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 output function: full-avalanche 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Stateless child derivation. Injective in `index` for a fixed seed
/// before mixing, then avalanched.
constexpr std::uint64_t derive_u64(std::uint64_t seed, std::uint64_t index) noexcept {
    return mix64(seed + kGolden * (index + 1));
}

/// Minimal seeded generator; used wherever a consumable stream is needed
/// (sampling, attacks, Fisher-Yates). Satisfies uniform_random_bit_generator.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    constexpr std::uint64_t next() noexcept {
        state_ += kGolden;
        return mix64(state_);
    }
    constexpr std::uint64_t operator()() noexcept { return next(); }

    /// Unbiased-enough bounded draw (multiply-shift; bias is O(n / 2^64)).
    constexpr std::uint64_t next_below(std::uint64_t n) noexcept {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    /// Uniform double in [0, 1).
    constexpr double next_unit() noexcept {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    static constexpr std::uint64_t min() { return 0; }
    static constexpr std::uint64_t max() { return ~0ULL; }

private:
    std::uint64_t state_;
};

/// Per-generation private key: an 8-byte seed standing in for the full
/// per-position key vector, which is expanded on demand via derive_subkey.
struct MasterKey {
    std::uint64_t seed = 0;
    friend bool operator==(const MasterKey&, const MasterKey&) = default;
};

/// Per-position key. All keyed objects below are pure functions of it.
struct SubKey {
    std::uint64_t value = 0;
    friend bool operator==(const SubKey&, const SubKey&) = default;
};

/// Draw a fresh master key from an entropy source (seeded generator in
/// tests, OS entropy in production callers).
template <typename Engine>
MasterKey sample_master_key(Engine& entropy) {
    return MasterKey{static_cast<std::uint64_t>(entropy())};
}

/// Expand a master key into the per-position key k_i. Pure and stateless.
constexpr SubKey derive_subkey(const MasterKey& master, std::uint64_t position) noexcept {
    return SubKey{derive_u64(master.seed, position)};
}

// Domain tags keep the uniform, the Gumbel vector and the permutation of
// one subkey statistically unrelated.
namespace detail {
inline constexpr std::uint64_t kTagUniform = 1;
inline constexpr std::uint64_t kTagGumbel = 2;
inline constexpr std::uint64_t kTagPermutation = 3;

constexpr double to_unit_half_open(std::uint64_t x) noexcept {  // [0, 1)
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}
constexpr double to_unit_open(std::uint64_t x) noexcept {  // (0, 1)
    return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}
}  // namespace detail

/// The keyed uniform u_k in [0, 1).
constexpr double uniform_unit(SubKey key) noexcept {
    return detail::to_unit_half_open(derive_u64(key.value, detail::kTagUniform));
}

/// Gumbel(0,1) from a uniform: -log(-log u).
inline double gumbel_from_unit(double u) { return -std::log(-std::log(u)); }

/// The keyed uniform underlying Gumbel component j; strictly inside (0, 1).
constexpr double gumbel_unit(SubKey key, std::size_t component) noexcept {
    const std::uint64_t root = derive_u64(key.value, detail::kTagGumbel);
    return detail::to_unit_open(derive_u64(root, component));
}

/// Component j of the keyed Gumbel vector g_k.
inline double gumbel_component(SubKey key, std::size_t component) {
    return gumbel_from_unit(gumbel_unit(key, component));
}

inline std::vector<double> gumbel_vector(SubKey key, std::size_t size) {
    std::vector<double> g(size);
    for (std::size_t j = 0; j < size; ++j) g[j] = gumbel_component(key, j);
    return g;
}

/// Keyed random permutation of {0..size-1}, with its inverse.
/// slot_to_token[z] is the token occupying permuted position z;
/// token_to_slot is the inverse map.
struct TokenPermutation {
    std::vector<std::int32_t> slot_to_token;
    std::vector<std::int32_t> token_to_slot;

    std::size_t size() const { return slot_to_token.size(); }
};

inline TokenPermutation key_permutation(SubKey key, std::size_t size) {
    TokenPermutation perm;
    perm.slot_to_token.resize(size);
    for (std::size_t i = 0; i < size; ++i)
        perm.slot_to_token[i] = static_cast<std::int32_t>(i);
    SplitMix64 rng(derive_u64(key.value, detail::kTagPermutation));
    for (std::size_t i = size; i > 1; --i) {  // Fisher-Yates
        const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(perm.slot_to_token[i - 1], perm.slot_to_token[j]);
    }
    perm.token_to_slot.resize(size);
    for (std::size_t z = 0; z < size; ++z)
        perm.token_to_slot[perm.slot_to_token[z]] = static_cast<std::int32_t>(z);
    return perm;
}

/// Number of green tokens: round-half-up of gamma * size.
inline std::size_t green_size(std::size_t vocab_size, double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("green_list: gamma must lie in (0, 1)");
    return static_cast<std::size_t>(std::floor(gamma * static_cast<double>(vocab_size) + 0.5));
}

/// The keyed green list: the first green_size() entries of the key's
/// permutation, so every token is green with probability exactly gamma.
inline std::vector<std::int32_t> green_list(SubKey key, std::size_t vocab_size, double gamma) {
    const std::size_t g = green_size(vocab_size, gamma);
    const TokenPermutation perm = key_permutation(key, vocab_size);
    return std::vector<std::int32_t>(perm.slot_to_token.begin(),
                                     perm.slot_to_token.begin() + static_cast<std::ptrdiff_t>(g));
}

}  // namespace waterpool
