#pragma once

#include <cstdint>
#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace cdfi {

// Resolves a worker request: > 0 is taken as is, otherwise CDFI_WORKERS, otherwise 1.
int resolve_workers(int requested);

// Runs body(i) for i in [0, count) on 'workers' threads, contiguous blocks, no shared state
// besides what body touches.  Rethrows the first exception.
template <class Body>
void parallel_for(std::int64_t count, int workers, Body&& body) {
    if (workers <= 1 || count < 2) {
        for (std::int64_t i = 0; i < count; ++i) body(i);
        return;
    }
    const std::int64_t w = std::min<std::int64_t>(workers, count);
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(w));
    for (std::int64_t t = 0; t < w; ++t) {
        pool.emplace_back([&, t] {
            const std::int64_t lo = count * t / w, hi = count * (t + 1) / w;
            try {
                for (std::int64_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                errors[std::size_t(t)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace cdfi
