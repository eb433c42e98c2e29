#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <random>
#include <sstream>

#include "cglmix/coupling.hpp"
#include "cglmix/ensemble.hpp"
#include "cglmix/errors.hpp"
#include "cglmix/fields.hpp"
#include "cglmix/functionals.hpp"
#include "cglmix/stats.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace cglmix;
using testing_util::make_model;
using testing_util::ModelOptions;
using testing_util::rel;

namespace {

std::vector<EnergySample> run_samples(Integrator& integ, const Field& u0, std::uint64_t steps, const StreamKey& key) {
    std::vector<EnergySample> out;
    auto s = integ.initial_state(u0);
    out.push_back(*s.last);
    evolve_truncated(integ, s, key, steps, std::nullopt, [&](const TrajectoryState& st) { out.push_back(*st.last); });
    return out;
}

Model small_model(bool noisy, bool forced, cplx alpha = {1.0, 1.0}, double dt = 1e-3) {
    ModelOptions o;
    o.X = 20.0;
    o.n = 256;
    o.noisy = noisy;
    o.forced = forced;
    o.alpha = alpha;
    o.dt = dt;
    o.M = 32;
    return make_model(o);
}

}  // namespace

TEST_CASE("weighted energy at t = 0 and on the zero trajectory") {
    auto m = small_model(true, true);
    Integrator integ(m);
    integ.set_energy_tracking(true);
    auto u0 = gaussian_bump(m.grid, 2.0, 1.5);
    auto samples = run_samples(integ, u0, 10, stream_for(3, 0));
    auto rec = energy_psi(samples, m.params.dissipation());
    CHECK(rec.E_psi[0] == rec.norm_sq[0]);
    CHECK(rec.E[0] == rec.norm_sq[0]);
    CHECK(rel(rec.norm_sq[0], norm_sq(u0)) < 1e-14);
    CHECK(rec.E_hat[0] == 0.0);

    auto quiet = small_model(false, false);
    Integrator q(quiet);
    q.set_energy_tracking(true);
    auto zs = run_samples(q, Field(quiet.grid), 50, stream_for(3, 0));
    auto zr = energy_psi(zs, quiet.params.dissipation());
    for (std::size_t i = 0; i < zr.size(); ++i) {
        CHECK(zr.E_psi[i] == 0.0);
        CHECK(zr.E[i] == 0.0);
        CHECK(zr.E_hat[i] == 0.0);
    }
}

TEST_CASE("weighted energy of a decaying Fourier mode matches time quadrature") {
    auto m = small_model(false, false, cplx{});
    const auto& g = *m.grid;
    const int mode = 3;
    const double k = M_PI * mode / g.half_width();
    const double lambda = m.params.a + m.params.nu.real() * k * k;
    const double T = 2.0;
    Integrator integ(m);
    integ.set_energy_tracking(true);
    auto samples = run_samples(integ, testing_util::fourier_mode(m.grid, mode), 2000, stream_for(0, 0));
    auto rec = energy_psi(samples, m.params.dissipation());
    const double D = m.params.dissipation();

    // |u(t, x)|^2 = exp(-2 lambda t) / (2X); psi and psi_x from their closed forms.
    const double dens = 1.0 / g.length();
    auto psi = [](double t, double x) {
        const double phi = std::log(x * x + 2.0);
        return phi * (1.0 - std::exp(-t / phi));
    };
    auto psi_x = [](double t, double x) {
        const double phi = std::log(x * x + 2.0);
        const double dphi = 2.0 * x / (x * x + 2.0);
        const double e = std::exp(-t / phi);
        return dphi * (1.0 - e) - dphi * (t / phi) * e;
    };
    auto spatial = [&](double t, int which) {
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double x = g.x(i), p = psi(t, x), px = psi_x(t, x);
            acc += which == 0 ? p * p : p * p + px * px + p * p * k * k;
        }
        return acc * g.dx() * dens;
    };
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    const double decay = std::exp(-2.0 * lambda * T);
    const double int_h1 = (1.0 + k * k) * (1.0 - decay) / (2.0 * lambda);
    const double int_psi_h1 =
        GK::integrate([&](double s) { return std::exp(-2.0 * lambda * s) * spatial(s, 1); }, 0.0, T, 10, 1e-12);
    const double E = decay + D * int_h1;
    const double E_psi = decay + decay * spatial(T, 0) + D * (int_h1 + int_psi_h1);
    CHECK(rel(rec.E.back(), E) < 1e-4);
    CHECK(rel(rec.E_psi.back(), E_psi) < 1e-4);
    CHECK(rel(integ.weighted_energy(integ.initial_state(testing_util::fourier_mode(m.grid, mode))), 1.0) < 1e-12);
}

TEST_CASE("energy record invariants along forced noisy paths") {
    auto m = small_model(true, true);
    Integrator integ(m);
    integ.set_energy_tracking(true);
    auto u0 = random_localized_field(m.grid, 3.0, stream_for(9, 0, 5));
    for (std::uint64_t path = 0; path < 5; ++path) {
        auto samples = run_samples(integ, u0, 2000, stream_for(9, path));
        auto r = energy_psi(samples, m.params.dissipation());
        for (std::size_t i = 0; i < r.size(); ++i) {
            CHECK(r.E_psi[i] >= r.norm_sq[i]);
            CHECK(r.E_psi[i] >= r.dissipation * r.int_h1[i]);
            CHECK(r.E_psi[i] >= r.E[i]);
            if (i > 0) {
                CHECK(r.int_h1[i] >= r.int_h1[i - 1]);
                CHECK(r.int_psi_h1[i] >= r.int_psi_h1[i - 1]);
            }
        }
    }
}

TEST_CASE("stopping time examples") {
    EnergyRecord r;
    r.dissipation = 1.0;
    for (int i = 0; i <= 100; ++i) {
        const double t = 0.1 * i;
        r.t.push_back(t);
        r.norm_sq.push_back(4.0);
        r.psi_norm_sq.push_back(0.0);
        r.int_h1.push_back(0.0);
        r.int_psi_h1.push_back(0.0);
        r.E.push_back(4.0);
        r.E_hat.push_back(0.0);
        r.E_psi.push_back(4.0 + 3.0 * t);
    }
    StoppingParams sp{1.0, 0.0, 0.0, 4.0};
    auto tau = stopping_tau(r, sp);
    CHECK(tau.triggered);
    CHECK(tau.time == 0.0);

    sp = {1e6, 0.0, 4.0, 1e9};
    tau = stopping_tau(r, sp);
    CHECK_FALSE(tau.triggered);
    CHECK(tau.time == doctest::Approx(11.0));

    // 4 + 3t first reaches t + 2 + 4 at t = 1.
    sp = {0.5, 0.5, 1.0, 2.0};
    tau = stopping_tau(r, sp);
    CHECK(tau.triggered);
    CHECK(tau.time == doctest::Approx(1.0));

    CHECK_THROWS_AS(stopping_tau(r, {0.0, 1.0, 1.0, 1.0}), DomainError);
    CHECK_THROWS_AS(stopping_tau(r, {1.0, 1.0, 1.0, 0.0}), DomainError);
    CHECK_THROWS_AS(stopping_tau(r, {1.0, -1.0, 1.0, 1.0}), DomainError);
    CHECK_THROWS_AS(stopping_tau(r, {1.0, 1.0, -1.0, 1.0}), DomainError);
}

TEST_CASE("stopping time is monotone in every threshold parameter") {
    auto m = small_model(true, true);
    Integrator integ(m);
    integ.set_energy_tracking(true);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(0.0, 2.0);
    for (int path = 0; path < 6; ++path) {
        auto u0 = random_localized_field(m.grid, 2.0, stream_for(21, path, 5));
        auto r = energy_psi(run_samples(integ, u0, 3000, stream_for(21, path)), m.params.dissipation());
        for (int trial = 0; trial < 40; ++trial) {
            StoppingParams sp{0.05 + U(rng), U(rng), U(rng), 0.05 + U(rng)};
            const auto base = stopping_tau(r, sp);
            for (int which = 0; which < 4; ++which) {
                StoppingParams bigger = sp;
                double* field[] = {&bigger.K, &bigger.L, &bigger.M, &bigger.rho};
                *field[which] += U(rng);
                const auto t2 = stopping_tau(r, bigger);
                CHECK(t2.time >= base.time);
            }
        }
    }
}

TEST_CASE("stopping below the horizon becomes rarer when rho doubles") {
    auto m = small_model(true, true);
    IntegratorPool pool(m, 0, true);
    const auto u0 = gaussian_bump(m.grid, 2.0, 2.0);
    const std::uint64_t steps = 3000;
    auto records = parallel_map<EnergyRecord>(100, pool.size(), [&](std::size_t path, unsigned w) {
        return energy_psi(run_samples(pool[w], u0, steps, stream_for(77, path)), m.params.dissipation());
    });
    std::vector<double> slopes;
    for (const auto& r : records) slopes.push_back((r.E_psi.back() - r.E_psi.front()) / r.t.back());
    const double K = 1.5 * median(slopes);
    auto frequency = [&](double rho) {
        std::size_t hits = 0;
        for (const auto& r : records) hits += stopping_tau(r, {K, 0.0, 0.0, rho}).triggered;
        return static_cast<double>(hits) / static_cast<double>(records.size());
    };
    const double rho = norm_sq(u0) + 0.5;
    const double f1 = frequency(rho), f2 = frequency(2.0 * rho);
    CHECK(f1 > 0.0);
    CHECK(f2 < f1);
}

TEST_CASE("Novikov integrand vanishes for equal states and after tau") {
    auto m = small_model(true, true);
    Integrator integ(m);
    Projector proj(*m.basis, 16);
    auto u0 = random_localized_field(m.grid, 1.0, stream_for(1, 0, 5));
    auto u = integ.initial_state(u0);
    auto v = integ.initial_state(u0);
    auto A = novikov_integrand(u, v, m, proj, stopping_sentinel(1.0));
    CHECK(norm_sq(A) == 0.0);

    auto v2 = integ.initial_state(gaussian_bump(m.grid, 1.0));
    auto A2 = novikov_integrand(u, v2, m, proj, stopping_sentinel(1.0));
    CHECK(norm_sq(A2) > 0.0);
    CHECK(norm_sq(project_QN(A2, *m.basis, 16)) < 1e-20 * norm_sq(A2));

    auto inc = sample_increment(m.noise, m.dt, stream_for(1, 0), 0);
    integ.step(u, inc);
    integ.step(v2, inc);
    StoppingTime early;
    early.triggered = true;
    early.time = 0.0;
    CHECK(norm_sq(novikov_integrand(u, v2, m, proj, early)) == 0.0);

    integ.step(u, inc);
    CHECK_THROWS_AS(novikov_integrand(u, v2, m, proj, early), StructuralError);
}

TEST_CASE("Novikov integral scales like the squared initial distance") {
    auto m = small_model(false, true);
    Integrator integ(m);
    Projector proj(*m.basis, 32);
    auto u0 = gaussian_bump(m.grid, 1.5, 2.0);
    auto dir = random_band_limited_field(m.grid, 4, stream_for(4, 0, 6));
    std::vector<double> logd, logI;
    for (double d : {1e-3, 1e-2, 1e-1}) {
        auto cs = make_coupling(integ, u0, u0 + d * dir, 32);
        advance_pair(integ, cs, proj, stream_for(4, 1), {5000, 500, std::nullopt});
        logd.push_back(std::log(d));
        logI.push_back(std::log(cs.ledger.integral_A_sq()));
    }
    auto fit = linear_fit(logd, logI);
    CHECK(std::abs(fit.slope - 2.0) < 0.3);
}

TEST_CASE("Novikov ledgers over adjacent intervals add up") {
    auto m = small_model(true, true);
    Integrator integ(m);
    const std::size_t N = 12;
    Projector proj(*m.basis, N);
    auto u0 = random_localized_field(m.grid, 2.0, stream_for(8, 0, 5));
    auto cs = make_coupling(integ, u0, gaussian_bump(m.grid, 0.5), N);
    const auto key = stream_for(8, 0);
    advance_pair(integ, cs, proj, key, {1000, 100, std::nullopt});
    NovikovLedger first = cs.ledger;
    CouplingState tail = cs;
    tail.ledger = NovikovLedger(N);
    advance_pair(integ, cs, proj, key, {1000, 100, std::nullopt});
    advance_pair(integ, tail, proj, key, {1000, 100, std::nullopt});
    first.append(tail.ledger);
    CHECK(std::abs(first.integral_A_sq() - cs.ledger.integral_A_sq()) <= 1e-10 * std::max(1.0, cs.ledger.integral_A_sq()));
    for (std::size_t j = 0; j < N; ++j) {
        CHECK(std::abs(first.ito_sums()[j] - cs.ledger.ito_sums()[j]) < 1e-10);
        CHECK(std::abs(first.quadratic_sums()[j] - cs.ledger.quadratic_sums()[j]) < 1e-10);
    }
    CHECK(first.last_time() == cs.ledger.last_time());

    NovikovLedger gap(N);
    std::vector<double> a(N, 1.0);
    gap.add_sample(5.0, a);
    CHECK_THROWS_AS(first.append(gap), StructuralError);
    CHECK_THROWS_AS(first.append(NovikovLedger(N + 1)), StructuralError);
}

TEST_CASE("Girsanov density structure") {
    auto m = small_model(true, false);
    const std::size_t N = 4;
    NovikovLedger zero(N);
    std::vector<double> a0(N, 0.0), g(m.noise.M);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    for (int i = 0; i < 100; ++i) {
        for (auto& x : g) x = nd(rng);
        zero.add_increment(a0, g, m.dt);
    }
    CHECK(girsanov_log_density(zero, m.noise) == 0.0);

    NovikovLedger one(N), two(N);
    std::vector<double> a(N), a2(N);
    for (int i = 0; i < 100; ++i) {
        for (auto& x : g) x = nd(rng);
        for (std::size_t j = 0; j < N; ++j) {
            a[j] = std::sin(0.1 * i + j);
            a2[j] = 2.0 * a[j];
        }
        one.add_increment(a, g, m.dt);
        two.add_increment(a2, g, m.dt);
    }
    for (std::size_t j = 0; j < N; ++j) {
        CHECK(two.ito_sums()[j] == doctest::Approx(2.0 * one.ito_sums()[j]).epsilon(1e-14));
        CHECK(two.quadratic_sums()[j] == doctest::Approx(4.0 * one.quadratic_sums()[j]).epsilon(1e-14));
    }

    auto spec = make_explicit_coefficients({1.0, 0.5, 0.0, 0.2}, *m.basis);
    CHECK_THROWS_AS(girsanov_log_density(one, spec), PreconditionError);
    try {
        girsanov_log_density(one, spec);
    } catch (const PreconditionError& e) {
        CHECK(std::string(e.what()).find("b_3 = 0") != std::string::npos);
    }
}

TEST_CASE("Girsanov reweighting reproduces a shifted drift for the linear equation") {
    ModelOptions o;
    o.X = 10.0;
    o.n = 256;
    o.forced = false;
    o.alpha = {};
    o.dt = 1e-2;
    o.M = 8;
    o.b0 = 1.0;
    auto m = make_model(o);
    Integrator integ(m);
    const double c = 0.3;  // constant control c e_1
    const std::uint64_t steps = 100;
    const std::size_t paths = 4000;
    std::vector<double> weighted, weights;
    std::vector<double> coord(1);
    for (std::size_t p = 0; p < paths; ++p) {
        auto s = integ.initial_state(Field(m.grid));
        NovikovLedger led(1);
        const std::vector<double> a{c};
        WienerIncrement inc;
        const auto key = stream_for(314, p);
        for (std::uint64_t i = 0; i < steps; ++i) {
            sample_increment_into(m.noise, m.dt, key, s.step, inc);
            led.add_increment(a, inc.g, m.dt);
            integ.step(s, inc);
        }
        const double w = std::exp(girsanov_log_density(led, m.noise));
        m.basis->coordinates(s.spectral, 1, coord);
        weights.push_back(w);
        weighted.push_back(w * coord[0]);
    }
    // Lawson scheme with the shift added after propagation: m_{n+1} = e^{-a dt} m_n + c dt.
    const double E1 = std::exp(-m.params.a * m.dt);
    const double oracle = c * m.dt * (1.0 - std::pow(E1, steps)) / (1.0 - E1);
    auto ms = mean_se(weighted);
    CHECK(std::abs(ms.mean - oracle) <= 3.0 * ms.se);
    auto mw = mean_se(weights);
    CHECK(std::abs(mw.mean - 1.0) <= 3.0 * mw.se);
}

TEST_CASE("Girsanov density has unit mean along controlled pairs") {
    auto m = small_model(true, true, {1.0, 1.0}, 2e-3);
    const std::size_t N = 8;
    Projector proj(*m.basis, N);
    IntegratorPool pool(m, 0);
    auto u0 = gaussian_bump(m.grid, 1.0, 2.0);
    auto u1 = u0 + 0.05 * random_band_limited_field(m.grid, 2, stream_for(2, 0, 6));
    auto dens = parallel_map<double>(400, pool.size(), [&](std::size_t p, unsigned w) {
        auto cs = make_coupling(pool[w], u0, u1, N);
        advance_pair(pool[w], cs, proj, stream_for(55, p), {500, 100, std::nullopt});
        return std::exp(girsanov_log_density(cs.ledger, m.noise));
    });
    auto ms = mean_se(dens);
    CHECK(ms.se > 0.0);
    CHECK(std::abs(ms.mean - 1.0) <= 3.0 * ms.se);
}

TEST_CASE("functional table round-trips through CSV") {
    std::vector<FunctionalRow> rows{{0.0, 1.0, 0.0, 1.0, 0.0, 0.0}, {0.1, 1.0 / 3.0, 2e-300, M_PI, 1e-17, -0.25}};
    std::stringstream ss;
    write_functionals_csv(ss, rows);
    CHECK(ss.str().rfind("time,E,E_hat,E_psi,int_A_sq,log_rn\n", 0) == 0);
    auto back = read_functionals_csv(ss);
    REQUIRE(back.size() == 2);
    CHECK(back[1].E == rows[1].E);
    CHECK(back[1].E_hat == rows[1].E_hat);
    CHECK(back[1].E_psi == rows[1].E_psi);
    CHECK(back[1].log_rn == rows[1].log_rn);
    std::stringstream bad("t,E\n1,2\n");
    CHECK_THROWS_AS(read_functionals_csv(bad), IoError);
}
