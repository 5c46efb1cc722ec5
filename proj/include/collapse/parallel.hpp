#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace collapse {

// Worker cap: COLLAPSE_LAB_THREADS if set and positive, else hardware concurrency.
inline int worker_count()
{
    if (const char* env = std::getenv("COLLAPSE_LAB_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

// Runs body(i) for i in [0, count) on up to worker_count() threads. The first
// exception (lowest index) is rethrown after all workers join.
inline void parallel_for(int count, const std::function<void(int)>& body)
{
    int workers = std::min(worker_count(), count);
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::mutex mu;
    int failed_at = count;
    std::exception_ptr err;
    auto run = [&] {
        for (;;) {
            int i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (i < failed_at) {
                    failed_at = i;
                    err = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

// Processes [0, count) in blocks: produce(i) runs in parallel inside a block,
// consume(i, result) runs on the calling thread in index order.
template <class T, class Produce, class Consume>
void ordered_blocks(int count, int block, Produce produce, Consume consume)
{
    std::vector<T> buf;
    for (int start = 0; start < count; start += block) {
        int len = std::min(block, count - start);
        buf.assign(len, T{});
        parallel_for(len, [&](int k) { buf[k] = produce(start + k); });
        for (int k = 0; k < len; ++k) consume(start + k, buf[k]);
    }
}

}  // namespace collapse
