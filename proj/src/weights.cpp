#include "cglmix/weights.hpp"

#include <cmath>

#include "cglmix/errors.hpp"

namespace cglmix {

double WeightTable::phi_at(double x) noexcept { return std::log(x * x + 2.0); }

double WeightTable::psi_at(double t, double x) noexcept {
    const double p = phi_at(x);
    // -expm1 keeps psi accurate for t << phi.
    return -p * std::expm1(-t / p);
}

WeightTable::WeightTable(GridPtr grid) : grid_(std::move(grid)) {
    const auto n = grid_->size();
    phi_.resize(n);
    phi_prime_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = grid_->x(i);
        phi_[i] = phi_at(x);
        phi_prime_[i] = 2.0 * x / (x * x + 2.0);
    }
}

void WeightTable::psi_from_decay(double t, const std::vector<double>& decay,
                                 std::vector<double>& psi, std::vector<double>& psi_x) const {
    const auto n = phi_.size();
    psi.resize(n);
    psi_x.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double p = phi_[i];
        const double e = decay[i];
        psi[i] = p * (1.0 - e);
        // d/dx [phi (1 - e^{-t/phi})] = phi' (1 - e^{-t/phi} (1 + t/phi))
        psi_x[i] = phi_prime_[i] * (1.0 - e * (1.0 + t / p));
    }
}

WeightTable phi_weight(const GridPtr& grid) { return WeightTable(grid); }

Field psi_weight(const WeightTable& table, double t) {
    if (!(t >= 0.0)) throw DomainError("psi weight requires t >= 0");
    Field out(table.grid_ptr());
    const auto& phi = table.phi();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = -phi[i] * std::expm1(-t / phi[i]);
    }
    return out;
}

double smooth_ramp(double s) noexcept {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / s);
    const double b = std::exp(-1.0 / (1.0 - s));
    return a / (a + b);
}

Field cutoff_chi(double A, const GridPtr& grid) {
    if (!(A > 0.0) || A > grid->length()) {
        throw DomainError("cutoff width A must satisfy 0 < A <= 2X");
    }
    Field out(grid);
    const double band = A / 2.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double ax = std::abs(grid->x(i));
        out[i] = smooth_ramp((A - ax) / band);
    }
    return out;
}

}  // namespace cglmix
