#pragma once

// Deterministic parallel map: results are collected by index, so the output
// never depends on scheduling. Thread count comes from OPACK_THREADS or the
// hardware default.

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace opack {

inline int default_thread_count() {
    if (const char* env = std::getenv("OPACK_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? int(hw) : 1;
}

// Applies fn(i) for i in [0, n) on up to `threads` workers; fn must write its
// result into caller-owned slot i.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    threads = std::max(1, std::min(threads, n));
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (int i = w; i < n; i += threads) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace opack
