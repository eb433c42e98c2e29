#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cglmix/basis.hpp"
#include "cglmix/rng.hpp"

namespace cglmix {

/// Coefficients b_j of the noise sum_j b_j beta_j(t) e_j over the first M
/// trigonometric basis elements, with the summability constants evaluated on
/// the grid.
struct NoiseSpec {
    std::size_t M = 0;
    double b0 = 0.0;
    double p = 0.0;
    std::vector<double> b;  // b[j-1] = b_j

    double B1 = 0.0;  // sum b_j^2
    double B2 = 0.0;  // sum b_j^2 ||phi e_j||^2
    double B3 = 0.0;  // sum b_j^2 ||d/dx e_j||^2
    // Value of sum_{j>M} b_j^2 for the infinite power law, i.e. what the
    // truncation to M modes discards.
    double B1_tail = 0.0;
    bool explicit_coefficients = false;

    bool active() const noexcept { return B1 > 0.0; }
};

/// b_j = b0 (1 + j)^{-p}. Requires b0 > 0 and p > 3/2 so that sum b_j^2 k_j^2
/// stays finite as M grows.
NoiseSpec make_coefficients(double b0, double p, std::size_t M, const TrigBasis& basis);

/// Explicit coefficient list; entries must be nonnegative.
NoiseSpec make_explicit_coefficients(std::vector<double> b, const TrigBasis& basis);

/// All-zero noise on M modes.
NoiseSpec make_silent_noise(std::size_t M);

/// Throws PreconditionError when some b_j vanishes for j <= N.
void require_controllable(const NoiseSpec& spec, std::size_t N);

struct WienerIncrement {
    double dt = 0.0;
    std::vector<double> g;   // standard normal draws
    std::vector<double> dW;  // b_j sqrt(dt) g_j
};

WienerIncrement sample_increment(const NoiseSpec& spec, double dt, const StreamKey& stream,
                                 std::uint64_t step);

/// In-place variant for hot loops; reuses the buffers of `out`.
void sample_increment_into(const NoiseSpec& spec, double dt, const StreamKey& stream,
                           std::uint64_t step, WienerIncrement& out);

/// sum_j dW_j e_j.
Field assemble_noise_field(const WienerIncrement& increment, const TrigBasis& basis);

}  // namespace cglmix
