#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace hidim {

/// Run body(i) for i in [0, n) across hardware threads. The body must be
/// thread-safe; iteration order is unspecified but every index runs once.
inline void parallel_for(int n, const std::function<void(int)>& body) {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (n <= 1 || hw == 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> workers;
    const unsigned count = std::min<unsigned>(hw, static_cast<unsigned>(n));
    workers.reserve(count);
    for (unsigned t = 0; t < count; ++t) {
        workers.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
        });
    }
    for (auto& w : workers) w.join();
}

}  // namespace hidim
