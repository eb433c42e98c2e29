#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <memory>
#include <optional>
#include <thread>
#include <vector>

#include "cglmix/dynamics.hpp"

namespace cglmix {

/// 0 means one worker per hardware thread.
unsigned resolve_workers(unsigned requested) noexcept;

/// Evaluates f(index, worker) for index < count on `workers` threads and
/// returns the results in index order. Indices are claimed dynamically, so
/// f must depend on the index only; the output is then independent of the
/// worker count. The exception of the lowest failing index is rethrown.
template <class R, class F>
std::vector<R> parallel_map(std::size_t count, unsigned workers, F&& f) {
    workers = std::max(1u, std::min<unsigned>(resolve_workers(workers), static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    std::vector<std::optional<R>> slots(count);
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    auto body = [&](unsigned worker) {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            if (failed.load()) continue;
            try {
                slots[i].emplace(f(i, worker));
            } catch (...) {
                errors[i] = std::current_exception();
                failed.store(true);
            }
        }
    };
    if (workers == 1) {
        body(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body, w);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    std::vector<R> out;
    out.reserve(count);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

/// One Integrator per worker over a shared model and propagator.
class IntegratorPool {
public:
    IntegratorPool(const Model& model, unsigned workers, bool track_energy = false);
    Integrator& operator[](unsigned worker) { return *pool_.at(worker); }
    unsigned size() const noexcept { return static_cast<unsigned>(pool_.size()); }

private:
    std::vector<std::unique_ptr<Integrator>> pool_;
};

}  // namespace cglmix
