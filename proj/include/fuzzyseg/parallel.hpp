#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace fuzzyseg {

// Worker cap: min(hardware, FUZZYSEG_THREADS when set).
inline int thread_cap() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
    if (const char* env = std::getenv("FUZZYSEG_THREADS")) {
        int cap = std::atoi(env);
        if (cap >= 1) n = std::min(n, cap);
    }
    return n;
}

// Runs fn(i) for i in [0, count). Each index is processed exactly once and
// writes only its own outputs, so results are independent of the worker count.
inline void parallel_for(int count, const std::function<void(int)>& fn) {
    int workers = std::min(thread_cap(), count);
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (int i = w; i < count; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

inline void maybe_parallel_for(bool parallel, int count, const std::function<void(int)>& fn) {
    if (parallel) {
        parallel_for(count, fn);
    } else {
        for (int i = 0; i < count; ++i) fn(i);
    }
}

}  // namespace fuzzyseg
