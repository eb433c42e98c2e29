#pragma once

#include <vector>

#include "cglmix/grid.hpp"

namespace cglmix {

/// Samples of phi(x) = log(x^2 + 2) on the grid, and the space-time weight
/// psi(t, x) = phi(x) (1 - exp(-t / phi(x))) built from them.
///
/// phi is not periodic; it is evaluated on [-X, X) as is.
class WeightTable {
public:
    explicit WeightTable(GridPtr grid);

    const Grid& grid() const noexcept { return *grid_; }
    const GridPtr& grid_ptr() const noexcept { return grid_; }

    const std::vector<double>& phi() const noexcept { return phi_; }
    /// phi'(x) = 2x / (x^2 + 2).
    const std::vector<double>& phi_prime() const noexcept { return phi_prime_; }

    /// psi(t, x_i) and its x-derivative written into caller buffers.
    /// `decay` must hold exp(-t / phi(x_i)).
    void psi_from_decay(double t, const std::vector<double>& decay, std::vector<double>& psi,
                        std::vector<double>& psi_x) const;

    static double phi_at(double x) noexcept;
    static double psi_at(double t, double x) noexcept;

private:
    GridPtr grid_;
    std::vector<double> phi_;
    std::vector<double> phi_prime_;
};

WeightTable phi_weight(const GridPtr& grid);

/// psi(t, .) as a (real-valued) field; t must be nonnegative.
Field psi_weight(const WeightTable& table, double t);

/// Smooth cutoff equal to 1 on [-A/2, A/2] and 0 outside [-A, A], with a
/// C-infinity ramp s -> e^{-1/s} / (e^{-1/s} + e^{-1/(1-s)}) across each
/// transition band of width A/2. Requires 0 < A <= 2X.
Field cutoff_chi(double A, const GridPtr& grid);

/// The ramp itself on [0, 1]; 0 at s <= 0 and 1 at s >= 1.
double smooth_ramp(double s) noexcept;

}  // namespace cglmix
