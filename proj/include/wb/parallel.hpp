#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace wb {

// Strided static partition: the result never depends on the thread count as
// long as f(i) only writes slot i.
template <class F>
void parallel_for(size_t n, int threads, F&& f) {
    if (threads <= 1 || n < 2) {
        for (size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::thread> pool;
    const size_t T = std::min<size_t>(threads, n);
    for (size_t t = 0; t < T; ++t)
        pool.emplace_back([&, t] {
            for (size_t i = t; i < n; i += T) f(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace wb
