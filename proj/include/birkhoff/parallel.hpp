#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace birkhoff {

// Worker count used by parallel loops; the CLI sets this from --threads.
inline int& worker_threads() {
    static int n = int(std::thread::hardware_concurrency());
    return n;
}

// Runs fn(i) for i in [0, n). Items must be independent (each writes its own
// slot), which keeps results identical under any schedule or thread count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const int workers = std::max(1, worker_threads());
    if (workers == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n || failed.load()) return;
            try {
                fn(i);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const int spawn = int(std::min<std::size_t>(std::size_t(workers), n));
    pool.reserve(std::size_t(spawn));
    for (int t = 0; t < spawn; ++t) pool.emplace_back(body);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace birkhoff
