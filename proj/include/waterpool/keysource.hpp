// Key modules: how private keys are sampled during generation and restored
// during detection.
//
//   fixed        - one constant key for every position of every output
//   context_hash - per-position key hashed from the preceding token window
//   greedy_pool  - a fixed pool of K key sequences; restoration maximizes
//                  the alignment score over the pool
//   waterpool    - a fresh independent key per output, stored with the
//                  output's embedding; restoration retrieves the key of the
//                  most similar stored text

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "waterpool/align.hpp"
#include "waterpool/embedding.hpp"
#include "waterpool/rng.hpp"
#include "waterpool/toy_lm.hpp"
#include "waterpool/vector_db.hpp"

namespace waterpool {

enum class KeySourceKind { fixed, context_hash, greedy_pool, waterpool };

struct KeySource {
    KeySourceKind kind = KeySourceKind::fixed;

    MasterKey fixed_key;  // fixed

    std::int32_t context_order = 1;  // context_hash window c
    std::uint64_t salt = 0;

    std::vector<MasterKey> pool;   // greedy_pool members
    std::size_t key_length = 80;   // greedy_pool per-sequence key length n

    VectorDb* store = nullptr;  // waterpool
};

/// What detection needs to know about the key used for one output.
struct KeyProvenance {
    KeySourceKind kind = KeySourceKind::fixed;
    std::int32_t pool_index = -1;                 // greedy_pool
    MasterKey master;                             // waterpool
    std::optional<std::uint64_t> record_id;       // waterpool, once registered
};

/// k_i = hash(salt, y_{i-c:i-1}); pure in the window contents and length.
inline SubKey context_hash_key(std::span<const Token> window, std::uint64_t salt) {
    std::uint64_t h = derive_u64(salt, window.size());
    for (Token t : window) h = derive_u64(h, static_cast<std::uint64_t>(t) + 1);
    return SubKey{h};
}

/// Uniform draw of one pool member.
inline std::int32_t pool_sample(const KeySource& source, SplitMix64& rng) {
    if (source.pool.empty()) throw std::invalid_argument("pool_sample: empty pool");
    return static_cast<std::int32_t>(rng.next_below(source.pool.size()));
}

struct PoolRestoreResult {
    MasterKey master;
    std::int32_t index = -1;
    double score = 0.0;
};

/// Greedy restoration: align every pool key sequence against the candidate
/// and keep the maximizer. Ties break to the lowest pool index.
template <typename Stat>
PoolRestoreResult pool_restore(const KeySource& source, std::span<const Token> candidate,
                               const Stat& stat, double eta) {
    if (source.pool.empty()) throw std::invalid_argument("pool_restore: empty pool");
    PoolRestoreResult best;
    for (std::size_t k = 0; k < source.pool.size(); ++k) {
        const std::vector<SubKey> keys = subkey_sequence(source.pool[k], source.key_length);
        const double score = alignment_score<Stat>(keys, candidate, stat, eta);
        if (k == 0 || score > best.score) {
            best = PoolRestoreResult{source.pool[k], static_cast<std::int32_t>(k), score};
        }
    }
    return best;
}

/// Store (Enc(output), master) for later detection; returns the record id.
inline std::uint64_t waterpool_register(VectorDb& store, std::span<const Token> output,
                                        const MasterKey& master) {
    if (output.empty()) throw std::invalid_argument("waterpool_register: empty output");
    return store.insert(encode(output), master);
}

/// Retrieve the key of the most similar stored text. Non-watermarked
/// candidates get some stored key, which is independent of them by
/// construction and therefore harmless to the downstream test.
inline MasterKey waterpool_restore(const VectorDb& store, std::span<const Token> candidate,
                                   int threads = 1) {
    return MasterKey{store.nearest(encode(candidate), threads).seed};
}

inline std::string key_source_kind_name(KeySourceKind kind) {
    switch (kind) {
        case KeySourceKind::fixed: return "fixed";
        case KeySourceKind::context_hash: return "context_hash";
        case KeySourceKind::greedy_pool: return "greedy_pool";
        case KeySourceKind::waterpool: return "waterpool";
    }
    return "unknown";
}

inline KeySourceKind key_source_kind_from_name(const std::string& name) {
    if (name == "fixed") return KeySourceKind::fixed;
    if (name == "context_hash") return KeySourceKind::context_hash;
    if (name == "greedy_pool") return KeySourceKind::greedy_pool;
    if (name == "waterpool") return KeySourceKind::waterpool;
    throw std::invalid_argument("unknown key source kind: " + name);
}

}  // namespace waterpool
