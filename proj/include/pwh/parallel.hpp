#pragma once

#include <cstddef>
#include <exception>
#include <vector>

namespace pwh {

/// Kernels take this to pick the OpenMP path or the serial reference loop.
enum class Execution { serial, parallel };

/// Runs fn(i) for i in [0, n). Results must be written to per-index slots so
/// that both paths produce identical output. The first exception (by index) is rethrown.
template <class Fn>
void for_each_index(std::size_t n, Execution exec, Fn&& fn) {
    if (exec == Execution::serial || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < count; ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Number of worker threads the parallel path would use.
int worker_threads();

}  // namespace pwh
