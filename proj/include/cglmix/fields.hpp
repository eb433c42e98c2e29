#pragma once

#include <cstddef>

#include "cglmix/grid.hpp"
#include "cglmix/rng.hpp"

namespace cglmix {

/// c exp(-(x - center)^2 / (2 width^2)) scaled to the requested L^2 norm.
Field gaussian_bump(const GridPtr& grid, double norm, double width = 1.0, double center = 0.0);

/// Smooth localized random field with the requested norm: a cubic with
/// standard complex normal coefficients times exp(-x^2 / (2 width^2)).
/// A norm of 0 gives the zero field.
Field random_localized_field(const GridPtr& grid, double norm, const StreamKey& stream, double width = 2.0);

/// Random trigonometric polynomial with |m| <= max_mode and independent
/// standard complex normal coefficients, normalized to unit L^2 norm.
Field random_band_limited_field(const GridPtr& grid, int max_mode, const StreamKey& stream);

}  // namespace cglmix
