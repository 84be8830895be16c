#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace stochci {

//! Worker count from STOCHCI_THREADS (default 1). Results never depend on it.
inline int thread_count()
{
    const char* s = std::getenv("STOCHCI_THREADS");
    if (!s) return 1;
    int v = std::atoi(s);
    return std::clamp(v, 1, 256);
}

//! Runs f(i) for i in [0, count). Each index writes only its own slot, so
//! any reduction the caller does afterwards in index order is deterministic.
template <typename F>
void parallel_for(int count, F&& f)
{
    const int nt = std::min(thread_count(), count);
    if (nt <= 1) {
        for (int i = 0; i < count; ++i) f(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(nt);
    for (int t = 0; t < nt; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (int i = t; i < count; i += nt) f(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace stochci
