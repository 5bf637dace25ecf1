#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "swinvid/errors.hpp"

// Deterministic worker pool for embarrassingly parallel per-index jobs. Each
// index runs exactly once; callers own any output slots (pre-sized vectors
// indexed by job id), so results are identical regardless of thread count.

namespace swinvid {

// worker cap: SWINVID_THREADS if set, otherwise the hardware concurrency
inline size_t worker_count() {
    if (const char* env = std::getenv("SWINVID_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1) {
            throw contract_error(std::string("SWINVID_THREADS: expected a positive integer, got '") +
                                 env + "'");
        }
        return static_cast<size_t>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

inline void parallel_for(size_t n, const std::function<void(size_t)>& fn) {
    const size_t workers = std::min(worker_count(), n == 0 ? size_t{1} : n);
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= n || failed.load()) return;
                try {
                    fn(i);
                } catch (...) {
                    if (!failed.exchange(true)) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failed.load()) std::rethrow_exception(error);
}

}  // namespace swinvid
