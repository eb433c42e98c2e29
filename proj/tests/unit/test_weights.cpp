#include <cmath>
#include <random>

#include "cglmix/errors.hpp"
#include "cglmix/weights.hpp"
#include "doctest.h"

using namespace cglmix;

TEST_CASE("phi and psi examples") {
    auto g = Grid::make(40.0, 1024);
    auto table = phi_weight(g);
    CHECK(WeightTable::phi_at(0.0) == doctest::Approx(0.693147).epsilon(1e-6));
    CHECK(table.phi()[512] == doctest::Approx(std::log(2.0)).epsilon(1e-15));  // x_512 = 0

    auto psi0 = psi_weight(table, 0.0);
    for (std::size_t i = 0; i < g->size(); ++i) CHECK(psi0[i] == cplx{});

    CHECK(WeightTable::psi_at(100.0, 0.0) == doctest::Approx(0.693147).epsilon(1e-6));
    CHECK_THROWS_AS(psi_weight(table, -0.1), DomainError);
}

TEST_CASE("phi is even and bounded below by log 2") {
    auto g = Grid::make(40.0, 1024);
    auto table = phi_weight(g);
    const std::size_t n = g->size();
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(table.phi()[i] >= std::log(2.0));
        if (i > 0) CHECK(table.phi()[i] == doctest::Approx(table.phi()[n - i]).epsilon(1e-15));
    }
}

TEST_CASE("psi lies strictly between 0 and phi and grows in t") {
    auto g = Grid::make(40.0, 1024);
    auto table = phi_weight(g);
    const double times[] = {1e-6, 0.1, 1.0, 3.0, 10.0};
    std::vector<double> prev(g->size(), 0.0);
    for (double t : times) {
        auto psi = psi_weight(table, t);
        for (std::size_t i = 0; i < g->size(); ++i) {
            const double v = psi[i].real();
            CHECK(v > 0.0);
            CHECK(v < table.phi()[i]);
            CHECK(v >= prev[i]);
            prev[i] = v;
        }
    }
}

TEST_CASE("psi_from_decay agrees with the closed form and its derivative") {
    auto g = Grid::make(20.0, 256);
    WeightTable table(g);
    const double t = 2.5;
    std::vector<double> decay(g->size()), psi, psi_x;
    for (std::size_t i = 0; i < g->size(); ++i) decay[i] = std::exp(-t / table.phi()[i]);
    table.psi_from_decay(t, decay, psi, psi_x);
    const double h = 1e-5;
    for (std::size_t i = 0; i < g->size(); i += 7) {
        const double x = g->x(i);
        CHECK(psi[i] == doctest::Approx(WeightTable::psi_at(t, x)).epsilon(1e-13));
        const double fd = (WeightTable::psi_at(t, x + h) - WeightTable::psi_at(t, x - h)) / (2 * h);
        CHECK(psi_x[i] == doctest::Approx(fd).epsilon(1e-7));
    }
}

TEST_CASE("cutoff examples") {
    auto g = Grid::make(40.0, 1024);
    const double A = 20.0;
    auto chi = cutoff_chi(A, g);
    CHECK(chi[512].real() == 1.0);
    for (std::size_t i = 0; i < g->size(); ++i) {
        const double ax = std::abs(g->x(i));
        if (ax <= A / 2) CHECK(chi[i].real() == 1.0);
        if (ax >= A) CHECK(chi[i].real() == 0.0);
    }
    CHECK(smooth_ramp(0.0) == 0.0);
    CHECK(smooth_ramp(1.0) == 1.0);
    CHECK(smooth_ramp(0.5) == doctest::Approx(0.5));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-0.5, 1.5);
    for (int r = 0; r < 10000; ++r) {
        const double v = smooth_ramp(U(rng));
        CHECK((v >= 0.0 && v <= 1.0));
    }
    CHECK_THROWS_AS(cutoff_chi(0.0, g), DomainError);
    CHECK_THROWS_AS(cutoff_chi(80.5, g), DomainError);
}
