// Append-only brute-force vector database mapping sentence embeddings to
// master key seeds. Search is exact (full scan, cosine on unit vectors =
// dot product); ties resolve to the lowest record id.
//
// On-disk format, little-endian:
//   16-byte header: magic "WPOOLDB1" | u32 dims | u32 reserved(0)
//   then fixed 528-byte records: dims x f32 | u64 seed | u64 id

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "waterpool/embedding.hpp"
#include "waterpool/parallel.hpp"
#include "waterpool/rng.hpp"

namespace waterpool {

static_assert(std::endian::native == std::endian::little,
              "store format assumes a little-endian host");

struct StoreEntry {
    Embedding embedding;
    std::uint64_t seed = 0;
    std::uint64_t id = 0;
};

struct StoreIoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct StoreHeaderError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct StoreDimsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct StoreTruncatedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class VectorDb {
public:
    static constexpr char kMagic[8] = {'W', 'P', 'O', 'O', 'L', 'D', 'B', '1'};
    static constexpr std::size_t kHeaderBytes = 16;
    static constexpr std::size_t kRecordBytes = kEmbedDim * sizeof(float) + 2 * sizeof(std::uint64_t);

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const StoreEntry& entry(std::size_t i) const { return entries_[i]; }

    /// Appends and returns the new id (= previous count). Appends are
    /// serialized; concurrent readers see a consistent prefix.
    std::uint64_t insert(const Embedding& embedding, const MasterKey& master) {
        std::lock_guard lock(append_mutex_);
        const std::uint64_t id = entries_.size();
        entries_.push_back(StoreEntry{embedding, master.seed, id});
        return id;
    }

    /// Exact nearest entry by cosine similarity; lowest id wins ties.
    const StoreEntry& nearest(const Embedding& query, int threads = 1) const {
        if (entries_.empty()) throw std::invalid_argument("nearest: empty store");
        const std::size_t count = entries_.size();

        if (threads <= 1 || count < 4096) return entries_[scan_best(query, 0, count)];

        std::vector<std::size_t> shard_best(static_cast<std::size_t>(threads));
        parallel_for_shards(count, threads, [&](std::size_t shard, std::size_t begin, std::size_t end) {
            shard_best[shard] = scan_best(query, begin, end);
        });
        std::size_t best = shard_best[0];
        double best_score = cosine(query, entries_[best].embedding);
        for (std::size_t s = 1; s < shard_best.size(); ++s) {
            const double score = cosine(query, entries_[shard_best[s]].embedding);
            if (score > best_score || (score == best_score && shard_best[s] < best)) {
                best = shard_best[s];
                best_score = score;
            }
        }
        return entries_[best];
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw StoreIoError("cannot open for writing: " + path);
        out.write(kMagic, sizeof(kMagic));
        const std::uint32_t dims = kEmbedDim;
        const std::uint32_t reserved = 0;
        out.write(reinterpret_cast<const char*>(&dims), sizeof(dims));
        out.write(reinterpret_cast<const char*>(&reserved), sizeof(reserved));
        for (const StoreEntry& e : entries_) {
            out.write(reinterpret_cast<const char*>(e.embedding.data()),
                      kEmbedDim * sizeof(float));
            out.write(reinterpret_cast<const char*>(&e.seed), sizeof(e.seed));
            out.write(reinterpret_cast<const char*>(&e.id), sizeof(e.id));
        }
        if (!out) throw StoreIoError("write failed: " + path);
    }

    static VectorDb load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw StoreIoError("cannot open for reading: " + path);

        char magic[8];
        std::uint32_t dims = 0, reserved = 0;
        in.read(magic, sizeof(magic));
        in.read(reinterpret_cast<char*>(&dims), sizeof(dims));
        in.read(reinterpret_cast<char*>(&reserved), sizeof(reserved));
        if (!in || static_cast<std::size_t>(in.gcount()) != sizeof(reserved))
            throw StoreHeaderError("header shorter than 16 bytes: " + path);
        if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
            throw StoreHeaderError("bad magic: " + path);
        if (dims != kEmbedDim)
            throw StoreDimsError("store has " + std::to_string(dims) + " dims, expected " +
                                 std::to_string(kEmbedDim));

        VectorDb db;
        std::vector<char> buf(kRecordBytes);
        while (in.read(buf.data(), static_cast<std::streamsize>(kRecordBytes)) ||
               in.gcount() > 0) {
            if (static_cast<std::size_t>(in.gcount()) != kRecordBytes)
                throw StoreTruncatedError("truncated record at entry " +
                                          std::to_string(db.entries_.size()) + ": " + path);
            StoreEntry e;
            std::memcpy(e.embedding.data(), buf.data(), kEmbedDim * sizeof(float));
            std::memcpy(&e.seed, buf.data() + kEmbedDim * sizeof(float), sizeof(e.seed));
            std::memcpy(&e.id, buf.data() + kEmbedDim * sizeof(float) + sizeof(e.seed),
                        sizeof(e.id));
            db.entries_.push_back(e);
        }
        return db;
    }

private:
    std::size_t scan_best(const Embedding& query, std::size_t begin, std::size_t end) const {
        std::size_t best = begin;
        double best_score = -2.0;
        for (std::size_t i = begin; i < end; ++i) {
            const double score = cosine(query, entries_[i].embedding);
            if (score > best_score) {
                best = i;
                best_score = score;
            }
        }
        return best;
    }

    std::vector<StoreEntry> entries_;
    mutable std::mutex append_mutex_;
};

}  // namespace waterpool
