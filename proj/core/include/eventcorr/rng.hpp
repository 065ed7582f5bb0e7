#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <thread>
#include <vector>

namespace ecc {

/// Engine derived from (seed, task index). Tasks seeded this way are
/// statistically independent streams, so parallel work never splits one
/// stream and results do not depend on the thread count.
inline std::mt19937_64 derived_engine(std::uint64_t seed, std::uint64_t task) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(task & 0xffffffffu),
                      static_cast<std::uint32_t>(task >> 32)};
    return std::mt19937_64(seq);
}

inline unsigned effective_threads(unsigned requested) {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    return requested == 0 ? hw : requested;
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers.
/// Work is pre-partitioned by index so the schedule is deterministic; any
/// exception is rethrown after all workers join. fn must only write to
/// per-index slots.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn);

} // namespace ecc
