#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

namespace natbound {

/// SplitMix64 finaliser, used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Generator for chunk `chunk` of a run seeded with `seed`. The stream depends
/// only on the pair, so chunks can be processed in any order or in parallel.
inline std::mt19937_64 chunk_engine(std::uint64_t seed, std::uint64_t chunk) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(chunk + 0x632BE59BD9B4E019ULL)));
}

/// Runs body(chunk) for chunk = 0..n_chunks-1 on up to `threads` workers.
/// Each chunk must write only to its own slot; results then do not depend on
/// the thread count.
template <class Body>
void for_each_chunk(std::size_t n_chunks, int threads, Body&& body) {
    if (threads <= 1 || n_chunks <= 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) body(c);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&]() {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= n_chunks) return;
            try {
                body(c);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(threads), n_chunks);
    for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace natbound
