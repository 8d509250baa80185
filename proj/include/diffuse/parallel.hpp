#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace diffuse {

// Runs body(i) for i in [0, n) on up to `threads` workers. Tasks must be
// independent; callers that aggregate results should write into
// preallocated slots indexed by i and reduce sequentially afterwards, so the
// outcome is identical for any worker count. The first exception thrown by
// any task is rethrown on the calling thread after all workers join.
inline void parallel_for(int n, int threads, const std::function<void(int)>& body) {
    if (n <= 0)
        return;
    if (threads < 1)
        threads = 1;
    if (threads == 1 || n == 1) {
        for (int i = 0; i < n; ++i)
            body(i);
        return;
    }
    const int workers = std::min(threads, n);
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto run = [&]() {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n)
                return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error)
                    first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back(run);
    for (auto& t : pool)
        t.join();
    if (first_error)
        std::rethrow_exception(first_error);
}

} // namespace diffuse
