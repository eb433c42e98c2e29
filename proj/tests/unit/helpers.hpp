#pragma once

#include <cmath>
#include <random>

#include "cglmix/grid.hpp"

namespace testing_util {

using cglmix::cplx;

inline cglmix::Field random_field(const cglmix::GridPtr& g, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> nd;
    cglmix::Field f(g);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = scale * cplx{nd(rng), nd(rng)};
    return f;
}

// Smooth, localized random field: random complex polynomial times a Gaussian.
inline cglmix::Field random_bump(const cglmix::GridPtr& g, std::mt19937_64& rng, double norm = 1.0) {
    std::normal_distribution<double> nd;
    cplx c[4];
    for (auto& z : c) z = {nd(rng), nd(rng)};
    const double shift = nd(rng);
    cglmix::Field f(g);
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double x = g->x(i) - shift;
        f[i] = (c[0] + x * (c[1] + x * (c[2] + x * c[3]))) * std::exp(-x * x / 8.0);
    }
    f *= norm / cglmix::l2_norm(f);
    return f;
}

inline cglmix::Field fourier_mode(const cglmix::GridPtr& g, int m) {
    cglmix::Field f(g);
    const double k = M_PI * m / g->half_width();
    const double amp = 1.0 / std::sqrt(g->length());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = amp * std::exp(cplx{0.0, k * g->x(i)});
    return f;
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace testing_util

#include <memory>

#include "cglmix/dynamics.hpp"
#include "cglmix/fields.hpp"

namespace testing_util {

struct ModelOptions {
    double X = 40.0;
    std::size_t n = 1024;
    bool forced = true;
    bool noisy = true;
    cplx alpha{1.0, 1.0};
    double dt = 1e-3;
    std::size_t M = 64;
    double b0 = 1.0;
};

inline cglmix::Model make_model(const ModelOptions& o = {}) {
    cglmix::Model m;
    m.grid = cglmix::Grid::make(o.X, o.n);
    m.basis = std::make_shared<cglmix::TrigBasis>(cglmix::make_basis(m.grid, std::max<std::size_t>(o.M, 64)));
    m.noise = o.noisy ? cglmix::make_coefficients(o.b0, 2.0, o.M, *m.basis) : cglmix::make_silent_noise(o.M);
    m.params.alpha = o.alpha;
    if (o.forced) m.params.h = cglmix::gaussian_bump(m.grid, 1.0);
    m.dt = o.dt;
    return m;
}

}  // namespace testing_util
