#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace vcdf
{
//! Worker count to use when the caller passes zero.
inline unsigned default_workers()
{
    return std::max(1u, std::thread::hardware_concurrency());
}

//---------------------------------------------------------------------------//
/*!
 * Call fn(i) for every i in [0, n) on up to `workers` threads.
 *
 * Indices are handed out dynamically, so fn must write its result into a
 * slot owned by i; any reduction happens afterwards in index order. The
 * first exception thrown by fn is rethrown on the calling thread.
 */
template<class F>
void parallel_for(std::size_t n, unsigned workers, F&& fn)
{
    if (workers == 0)
        workers = default_workers();
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
    if (workers <= 1)
    {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++)
        {
            try
            {
                fn(i);
            }
            catch (...)
            {
                std::lock_guard lock(error_mutex);
                if (!error)
                    error = std::current_exception();
                next = n;
            }
        }
    };

    std::vector<std::jthread> threads;
    threads.reserve(workers - 1);
    for (unsigned t = 1; t < workers; ++t)
        threads.emplace_back(work);
    work();
    threads.clear();
    if (error)
        std::rethrow_exception(error);
}

}  // namespace vcdf
