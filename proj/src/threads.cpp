#include "amdl/threads.hpp"

#include <cstdlib>
#include <thread>
#include <vector>

namespace amdl {

namespace {

int resolve_from_env() {
    const char* v = std::getenv("AMDL_THREADS");
    if (!v || !*v) return 1;
    int n = std::atoi(v);
    return n > 0 ? n : 1;
}

int g_threads = resolve_from_env();

}  // namespace

int thread_count() { return g_threads; }

void set_thread_count(int n) { g_threads = n > 0 ? n : 1; }

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& body) {
    if (n <= 0) return;
    int workers = thread_count();
    if (workers > n) workers = static_cast<int>(n);
    if (workers <= 1) {
        body(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    int64_t chunk = (n + workers - 1) / workers;
    for (int t = 0; t < workers; ++t) {
        int64_t b = t * chunk;
        int64_t e = b + chunk < n ? b + chunk : n;
        if (b >= e) break;
        pool.emplace_back([&body, b, e] { body(b, e); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace amdl
