#include <cmath>
#include <vector>

#include "cglmix/errors.hpp"
#include "cglmix/noise.hpp"
#include "doctest.h"

using namespace cglmix;

namespace {

struct Setup {
    GridPtr g = Grid::make(40.0, 1024);
    TrigBasis basis = make_basis(g, 64);
};

}  // namespace

TEST_CASE("coefficients follow the power law") {
    Setup s;
    auto spec = make_coefficients(1.0, 2.0, 4, s.basis);
    REQUIRE(spec.b.size() == 4);
    CHECK(spec.b[0] == 1.0 / 4);
    CHECK(spec.b[1] == 1.0 / 9);
    CHECK(spec.b[2] == 1.0 / 16);
    CHECK(spec.b[3] == 1.0 / 25);
    CHECK(spec.B1 == 1.0 / 16 + 1.0 / 81 + 1.0 / 256 + 1.0 / 625);

    auto full = make_coefficients(1.0, 2.0, 64, s.basis);
    double b1 = 0, b3 = 0, b2 = 0;
    for (std::size_t j = 0; j < 64; ++j) {
        const double bj = std::pow(2.0 + j, -2.0);
        const double k = s.basis.mode(j).k;
        b1 += bj * bj;
        b3 += bj * bj * k * k;
        double w = 0.0;
        for (std::size_t i = 0; i < s.g->size(); ++i) {
            const double x = s.g->x(i);
            w += std::pow(std::log(x * x + 2.0), 2) * std::norm(s.basis.field(j)[i]);
        }
        b2 += bj * bj * w * s.g->dx();
    }
    CHECK(full.B1 == doctest::Approx(b1).epsilon(1e-14));
    CHECK(full.B3 == doctest::Approx(b3).epsilon(1e-10));
    CHECK(full.B2 == doctest::Approx(b2).epsilon(1e-12));
    // tail of sum (1+j)^{-4} for j > 64
    double tail = 0;
    for (int j = 65; j < 2000000; ++j) tail += std::pow(1.0 + j, -4.0);
    CHECK(full.B1_tail == doctest::Approx(tail).epsilon(1e-6));
}

TEST_CASE("coefficient domain errors") {
    Setup s;
    CHECK_THROWS_AS(make_coefficients(0.0, 2.0, 4, s.basis), DomainError);
    try {
        make_coefficients(1.0, 1.0, 4, s.basis);
        FAIL("expected rejection");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("B3") != std::string::npos);
    }
    CHECK_THROWS_AS(make_coefficients(1.0, 2.0, 65, s.basis), StructuralError);
    auto spec = make_explicit_coefficients({0.5, 0.5, 0.0, 0.5}, s.basis);
    CHECK_NOTHROW(require_controllable(spec, 2));
    try {
        require_controllable(spec, 4);
        FAIL("expected rejection");
    } catch (const PreconditionError& e) {
        CHECK(std::string(e.what()).find("b_3 = 0 but N = 4") != std::string::npos);
    }
}

TEST_CASE("increments: degenerate, deterministic and unbiased") {
    Setup s;
    auto silent = make_silent_noise(8);
    auto z = sample_increment(silent, 1e-3, {1, 0}, 0);
    for (double v : z.dW) CHECK(v == 0.0);
    CHECK_THROWS_AS(sample_increment(silent, 0.0, {1, 0}, 0), DomainError);

    auto spec = make_coefficients(1.0, 2.0, 16, s.basis);
    auto a = sample_increment(spec, 1e-3, {9, 2}, 77);
    auto b = sample_increment(spec, 1e-3, {9, 2}, 77);
    CHECK(a.dW == b.dW);

    const int n = 100000;
    const double dt = 1e-3;
    std::vector<double> m1(16), m2(16);
    std::vector<std::vector<double>> x(16, std::vector<double>(n));
    std::vector<double> other(n);
    WienerIncrement inc, inc2;
    for (int step = 0; step < n; ++step) {
        sample_increment_into(spec, dt, {3, 0}, step, inc);
        sample_increment_into(spec, dt, {3, 1}, step, inc2);
        for (int j = 0; j < 16; ++j) x[j][step] = inc.dW[j];
        other[step] = inc2.dW[0];
    }
    auto corr = [&](const std::vector<double>& p, const std::vector<double>& q) {
        double sp = 0, sq = 0, spp = 0, sqq = 0, spq = 0;
        for (int i = 0; i < n; ++i) {
            sp += p[i];
            sq += q[i];
            spp += p[i] * p[i];
            sqq += q[i] * q[i];
            spq += p[i] * q[i];
        }
        const double cp = spp / n - (sp / n) * (sp / n), cq = sqq / n - (sq / n) * (sq / n);
        return (spq / n - sp / n * sq / n) / std::sqrt(cp * cq);
    };
    for (int j = 0; j < 16; ++j) {
        double mean = 0, var = 0;
        for (double v : x[j]) mean += v;
        mean /= n;
        for (double v : x[j]) var += (v - mean) * (v - mean);
        var /= (n - 1);
        const double bj = spec.b[j];
        CHECK(std::abs(mean) <= 4 * bj * std::sqrt(dt / n));
        if (j < 8) {
            CHECK(var / (bj * bj * dt) >= 0.95);
            CHECK(var / (bj * bj * dt) <= 1.05);
        }
    }
    for (int i = 0; i < 8; ++i) {
        for (int j = i + 1; j < 8; ++j) CHECK(std::abs(corr(x[i], x[j])) <= 0.02);
    }
    CHECK(std::abs(corr(x[0], other)) <= 0.02);
}

TEST_CASE("noise field assembly") {
    Setup s;
    WienerIncrement inc;
    inc.dW = {0.7, 0, 0, 0};
    auto f = assemble_noise_field(inc, s.basis);
    for (std::size_t i = 0; i < s.g->size(); i += 31) CHECK(std::abs(f[i] - 0.7 * s.basis.field(0)[i]) < 1e-15);

    auto spec = make_coefficients(1.0, 2.0, 64, s.basis);
    auto a = sample_increment(spec, 1e-2, {5, 0}, 3);
    auto b = sample_increment(spec, 1e-2, {5, 1}, 3);
    double sq = 0;
    for (double v : a.dW) sq += v * v;
    CHECK(norm_sq(assemble_noise_field(a, s.basis)) == doctest::Approx(sq).epsilon(1e-10));

    WienerIncrement c;
    c.dW.resize(64);
    for (int j = 0; j < 64; ++j) c.dW[j] = 2.0 * a.dW[j] - b.dW[j];
    auto lhs = assemble_noise_field(c, s.basis);
    auto rhs = 2.0 * assemble_noise_field(a, s.basis) - assemble_noise_field(b, s.basis);
    for (std::size_t i = 0; i < s.g->size(); i += 7) CHECK(std::abs(lhs[i] - rhs[i]) < 1e-13);

    WienerIncrement big;
    big.dW.resize(65);
    CHECK_THROWS_AS(assemble_noise_field(big, s.basis), StructuralError);
}
