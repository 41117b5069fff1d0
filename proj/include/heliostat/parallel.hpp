#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace helio {

/// Default worker count: HELIO_THREADS if set and positive, else the hardware concurrency.
inline int default_threads() {
    if (const char *env = std::getenv("HELIO_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0)
                return n;
        } catch (...) {
        }
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Tasks are claimed dynamically,
/// so callers must write results by index. The first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn &&fn) {
    if (threads <= 0)
        threads = default_threads();
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto run = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n)
                return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error)
                    error = std::current_exception();
                next = n;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w)
        pool.emplace_back(run);
    run();
    for (auto &t : pool)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

} // namespace helio
