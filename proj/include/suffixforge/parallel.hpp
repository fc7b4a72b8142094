#pragma once

#include <cstdlib>
#include <thread>
#include <vector>

namespace suffixforge {

// Worker cap: SUFFIXFORGE_THREADS if set and positive, else hardware count.
inline unsigned thread_cap() {
    if (const char* env = std::getenv("SUFFIXFORGE_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Runs fn(i) for i in [0, n). Each index writes only its own slot, so the
// result is identical for any worker count; reductions happen afterwards in
// index order.
template <typename Fn>
void parallel_for(size_t n, Fn&& fn) {
    const unsigned workers = std::min<size_t>(thread_cap(), n);
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            for (size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace suffixforge
