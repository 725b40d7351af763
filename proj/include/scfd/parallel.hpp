#ifndef SCFD_PARALLEL_HPP
#define SCFD_PARALLEL_HPP

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace scfd {

inline unsigned default_workers() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1u : n;
}

// Runs fn(batch) for batch in [0, nbatches). Each batch must write only to
// its own output slot; results are then combined in batch order by the
// caller, so the outcome is identical for every worker count.
inline void parallel_batches(std::size_t nbatches, unsigned workers,
                             const std::function<void(std::size_t)>& fn) {
    if (nbatches == 0) return;
    if (workers <= 1 || nbatches == 1) {
        for (std::size_t b = 0; b < nbatches; ++b) fn(b);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto work = [&]() {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= nbatches || failed.load()) return;
            try {
                fn(b);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const unsigned nthreads = static_cast<unsigned>(
        std::min<std::size_t>(workers, nbatches));
    pool.reserve(nthreads);
    for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

// Batch layout shared by the Monte Carlo loops.
struct BatchRange {
    std::size_t begin;
    std::size_t count;
};

inline std::size_t batch_count(std::size_t total, std::size_t batch_size) {
    return (total + batch_size - 1) / batch_size;
}

inline BatchRange batch_range(std::size_t total, std::size_t batch_size,
                              std::size_t batch) {
    const std::size_t begin = batch * batch_size;
    const std::size_t end = std::min(total, begin + batch_size);
    return {begin, end > begin ? end - begin : 0};
}

} // namespace scfd

#endif
