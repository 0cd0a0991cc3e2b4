#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <type_traits>
#include <vector>

namespace rost {

// Runs independent task units on a fixed number of threads. Results are
// stored by task index so reductions done afterwards see the same order for
// any thread count.
class Executor {
public:
    explicit Executor(unsigned threads = 1) : threads_(std::max(1u, threads)) {}

    unsigned threads() const noexcept { return threads_; }

    template <class Fn>
    auto map(std::size_t n, Fn&& fn) const -> std::vector<std::invoke_result_t<Fn&, std::size_t>> {
        using R = std::invoke_result_t<Fn&, std::size_t>;
        std::vector<R> out(n);
        for_each(n, [&](std::size_t i) { out[i] = fn(i); });
        return out;
    }

    template <class Fn>
    void for_each(std::size_t n, Fn&& fn) const {
        const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads_, n));
        if (workers <= 1) {
            for (std::size_t i = 0; i < n; ++i) fn(i);
            return;
        }
        std::atomic<std::size_t> next{0};
        std::exception_ptr first_error;
        std::mutex error_mutex;
        auto work = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    next.store(n, std::memory_order_relaxed);
                    return;
                }
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(workers - 1);
        for (unsigned t = 1; t < workers; ++t) pool.emplace_back(work);
        work();
        for (auto& th : pool) th.join();
        if (first_error) std::rethrow_exception(first_error);
    }

private:
    unsigned threads_;
};

}  // namespace rost
