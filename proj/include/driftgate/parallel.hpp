#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace driftgate {

/// Worker count: DRIFTGATE_THREADS if set to a positive integer, else hardware concurrency.
inline std::size_t thread_budget() {
    std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("DRIFTGATE_THREADS")) {
        try {
            long requested = std::stol(env);
            if (requested > 0) return static_cast<std::size_t>(requested);
        } catch (const std::exception&) {
        }
    }
    return hw;
}

/// Runs body(begin, end) over contiguous chunks of [0, n). Chunk boundaries depend only on
/// n and the thread budget, and every index is visited exactly once, so results written
/// per index are independent of scheduling.
template <typename Body>
void parallel_chunks(std::size_t n, Body&& body, std::size_t min_chunk = 256) {
    if (n == 0) return;
    std::size_t workers = std::min(thread_budget(), (n + min_chunk - 1) / min_chunk);
    if (workers <= 1) {
        body(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> failures(workers);
    std::size_t step = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        std::size_t begin = w * step;
        std::size_t end = std::min(n, begin + step);
        if (begin >= end) break;
        pool.emplace_back([&, w, begin, end] {
            try {
                body(begin, end);
            } catch (...) {
                failures[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& f : failures)
        if (f) std::rethrow_exception(f);
}

} // namespace driftgate
