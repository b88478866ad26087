// Deterministic data-parallel loop: results are written by index, so the
// outcome is independent of the thread count. The global thread budget is
// what the CLI --threads flag sets.

#ifndef EITSENSE_PARALLEL_HPP
#define EITSENSE_PARALLEL_HPP

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace eitsense {

void set_thread_count(int threads);  // <= 0 restores hardware concurrency
int thread_count();

// Runs fn(i) for i in [0, n) on the configured number of threads. fn must
// only write to per-index slots. The first exception thrown by any worker
// is rethrown on the caller.
template <typename Fn>
void parallel_for(int n, Fn&& fn) {
    int workers = std::min(thread_count(), n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                int i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace eitsense

#endif
