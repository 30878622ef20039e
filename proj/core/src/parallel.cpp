#include "plpde/parallel.hpp"

#include <algorithm>
#include <exception>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace plpde {

unsigned worker_count() {
    static const unsigned count = [] {
        unsigned hw = std::max(1u, std::thread::hardware_concurrency());
        if (const char* env = std::getenv("PLPDE_THREADS")) {
            try {
                const long cap = std::stol(env);
                if (cap >= 1) hw = std::min<unsigned>(hw, static_cast<unsigned>(cap));
            } catch (...) {
                // unparsable value: keep the hardware default
            }
        }
        return hw;
    }();
    return count;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)>& body) {
    constexpr std::size_t min_chunk = 4096;
    const std::size_t workers = std::min<std::size_t>(worker_count(), (count + min_chunk - 1) / min_chunk);
    if (workers <= 1) {
        if (count > 0) body(0, count);
        return;
    }
    const std::size_t chunk = (count + workers - 1) / workers;
    std::vector<std::thread> threads;
    threads.reserve(workers - 1);
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 1; w < workers; ++w) {
        const std::size_t b = w * chunk;
        const std::size_t e = std::min(count, b + chunk);
        threads.emplace_back([&, w, b, e] {
            try {
                if (b < e) body(b, e);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    try {
        body(0, std::min(count, chunk));
    } catch (...) {
        errors[0] = std::current_exception();
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace plpde
