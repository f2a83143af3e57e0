#pragma once

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace pifield {

// Worker cap: PIFIELD_THREADS if set, else hardware concurrency. Read on
// every call so tests can vary it between runs of one process.
inline int max_threads() {
    if (const char* env = std::getenv("PIFIELD_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? int(hc) : 1;
}

// Runs f(chunk_index, begin, end) over [0, n) split into fixed-size chunks.
// The chunk grid depends only on n and grain, never on the worker count, so
// any per-chunk partial results merged in chunk order are bitwise
// reproducible under any PIFIELD_THREADS setting.
template <class F>
void parallel_chunks(std::size_t n, std::size_t grain, F&& f) {
    if (n == 0) return;
    if (grain == 0) grain = 1;
    std::size_t nchunks = (n + grain - 1) / grain;
    int nthreads = std::min<std::size_t>(max_threads(), nchunks);
    if (nthreads <= 1) {
        for (std::size_t c = 0; c < nchunks; ++c)
            f(c, c * grain, std::min(n, (c + 1) * grain));
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t c = next.fetch_add(1);
            if (c >= nchunks) return;
            f(c, c * grain, std::min(n, (c + 1) * grain));
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(nthreads - 1);
    for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
}

// Element-wise parallel loop; f(i) must write only to slot i's outputs.
template <class F>
void parallel_for(std::size_t n, F&& f) {
    std::size_t grain = std::max<std::size_t>(1, n / (4 * std::size_t(max_threads()) + 1));
    parallel_chunks(n, grain, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) f(i);
    });
}

} // namespace pifield
