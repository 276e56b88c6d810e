#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace waterpool {

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Splits [0, total) into `threads` contiguous shards and runs
/// fn(shard_index, begin, end) on each. Results must be combined by the
/// caller in shard order so the reduction is schedule-independent.
template <typename Fn>
void parallel_for_shards(std::size_t total, int threads, Fn&& fn) {
    threads = resolve_threads(threads);
    if (threads <= 1 || total < 2) {
        fn(std::size_t{0}, std::size_t{0}, total);
        return;
    }
    const std::size_t shards = static_cast<std::size_t>(threads);
    std::vector<std::thread> workers;
    workers.reserve(shards);
    for (std::size_t s = 0; s < shards; ++s) {
        const std::size_t begin = total * s / shards;
        const std::size_t end = total * (s + 1) / shards;
        workers.emplace_back([&fn, s, begin, end] { fn(s, begin, end); });
    }
    for (auto& w : workers) w.join();
}

/// Element-wise parallel loop; fn(index) must only touch its own slot.
template <typename Fn>
void parallel_for(std::size_t total, int threads, Fn&& fn) {
    parallel_for_shards(total, threads, [&fn](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) fn(i);
    });
}

}  // namespace waterpool
