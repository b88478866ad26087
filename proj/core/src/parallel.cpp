#include "eitsense/parallel.hpp"

namespace eitsense {

namespace {
int g_threads = 0;
}

void set_thread_count(int threads) { g_threads = threads; }

int thread_count() {
    if (g_threads > 0) return g_threads;
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace eitsense
