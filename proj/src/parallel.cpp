#include "nnloc/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace nnloc {

namespace {
std::atomic<int> g_default_threads{0};
}

void set_default_threads(int threads) { g_default_threads.store(std::max(0, threads)); }

int default_threads() {
    const int t = g_default_threads.load();
    if (t > 0) {
        return t;
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void parallel_for(std::size_t count, FunctionRef<void(std::size_t)> body, int threads) {
    if (count == 0) {
        return;
    }
    const int want = threads > 0 ? threads : default_threads();
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(want), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first;
    std::mutex mu;
    auto run = [&]() {
        while (!failed.load()) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) {
                return;
            }
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!first) {
                    first = std::current_exception();
                }
                failed.store(true);
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) {
        pool.emplace_back(run);
    }
    run();
    for (auto& t : pool) {
        t.join();
    }
    if (first) {
        std::rethrow_exception(first);
    }
}

} // namespace nnloc
