#pragma once

// Deterministic work partitioning for trajectory ensembles.
//
// Work is split into fixed-size chunks whose identity does not depend on the
// thread count. Threads claim chunks through an atomic counter; each chunk
// writes into its own slot, and callers reduce the slots serially in chunk
// order. Together with per-trajectory RNG streams this makes every ensemble
// statistic bit-identical at any --threads value.

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace ampsim {

// Runs fn(chunk_index, first, last) for the partition of [0, n) into chunks of
// size chunk_size. fn must only touch state owned by its chunk.
template <typename Fn>
void for_each_chunk(std::size_t n, std::size_t chunk_size, unsigned n_threads, Fn&& fn) {
    if (n == 0) return;
    if (chunk_size == 0) chunk_size = 1;
    const std::size_t n_chunks = (n + chunk_size - 1) / chunk_size;
    if (n_threads <= 1 || n_chunks == 1) {
        for (std::size_t c = 0; c < n_chunks; ++c)
            fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= n_chunks) return;
            fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
        }
    };
    std::vector<std::thread> pool;
    const unsigned spawn = static_cast<unsigned>(std::min<std::size_t>(n_threads, n_chunks));
    pool.reserve(spawn);
    for (unsigned i = 0; i + 1 < spawn; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
}

inline constexpr std::size_t default_chunk = 64;

// Kahan-compensated accumulator; used wherever a fixed summation order must
// also be accurate (large histograms, moment sums).
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double x) {
        const double y = x - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

}  // namespace ampsim
