#include "stochint/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace stochint {

SampleTable run_paths(std::size_t n_paths, std::size_t n_metrics, std::size_t workers,
                      const PathTask& task) {
    SampleTable table(n_metrics, n_paths);
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n_paths, 1));

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    constexpr std::size_t chunk = 64;

    auto work = [&] {
        std::vector<double> out(n_metrics);
        for (;;) {
            const std::size_t begin = next.fetch_add(chunk);
            if (begin >= n_paths || failed.load(std::memory_order_relaxed)) return;
            const std::size_t end = std::min(begin + chunk, n_paths);
            for (std::size_t p = begin; p < end; ++p) {
                try {
                    std::fill(out.begin(), out.end(), 0.0);
                    task(p, out);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    failed = true;
                    return;
                }
                for (std::size_t m = 0; m < n_metrics; ++m) table.at(m, p) = out[m];
            }
        }
    };

    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    if (error) std::rethrow_exception(error);
    return table;
}

}  // namespace stochint
