#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <type_traits>
#include <vector>

namespace natgrow {

namespace detail {
inline std::atomic<unsigned>& default_jobs_ref() {
    static std::atomic<unsigned> jobs{0};
    return jobs;
}
} // namespace detail

/// Worker count used when a call does not specify one; 0 means hardware concurrency.
inline void set_default_jobs(unsigned jobs) { detail::default_jobs_ref() = jobs; }

inline unsigned resolve_jobs(unsigned jobs) {
    if (jobs == 0) jobs = detail::default_jobs_ref();
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    return jobs;
}

/// out[i] = fn(i) for i < n, evaluated on up to `jobs` threads. Results keep their
/// index order; the first exception (by index) is rethrown after all workers finish.
template <class F>
auto parallel_map(std::size_t n, F&& fn, unsigned jobs = 0) {
    using R = std::decay_t<decltype(fn(std::size_t{0}))>;
    std::vector<R> out(n);
    std::vector<std::exception_ptr> errors(n);
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(resolve_jobs(jobs), n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                out[i] = fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

} // namespace natgrow
