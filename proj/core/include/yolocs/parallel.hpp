#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace yolocs {

// Process-wide worker count for the optional parallel path. 1 = serial.
// Kernels split work so that each output element is produced by exactly one
// worker with an unchanged per-element accumulation order, so results are
// bit-identical to the serial path.
inline int& num_threads_ref() {
    static int n = 1;
    return n;
}

inline void set_num_threads(int n) { num_threads_ref() = n < 1 ? 1 : n; }
inline int num_threads() { return num_threads_ref(); }

// Runs fn(begin, end) over contiguous chunks of [0, total). Chunk boundaries
// depend only on (total, workers), never on scheduling.
template <typename Fn>
void parallel_for(std::int64_t total, const Fn& fn) {
    const int workers = std::min<std::int64_t>(num_threads(), total > 0 ? total : 1);
    if (workers <= 1) {
        if (total > 0) fn(std::int64_t(0), total);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    const std::int64_t chunk = (total + workers - 1) / workers;
    for (int t = 0; t < workers; ++t) {
        const std::int64_t b = t * chunk;
        const std::int64_t e = std::min(total, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace yolocs
