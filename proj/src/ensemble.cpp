#include "cglmix/ensemble.hpp"

namespace cglmix {

unsigned resolve_workers(unsigned requested) noexcept {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

IntegratorPool::IntegratorPool(const Model& model, unsigned workers, bool track_energy) {
    auto prop = std::make_shared<const Propagator>(*model.grid, model.params, model.dt);
    const unsigned n = resolve_workers(workers);
    pool_.reserve(n);
    for (unsigned w = 0; w < n; ++w) {
        pool_.push_back(std::make_unique<Integrator>(model, prop));
        pool_.back()->set_energy_tracking(track_energy);
    }
}

}  // namespace cglmix
