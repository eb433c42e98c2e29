#include <cmath>
#include <functional>
#include <sstream>

#include "cglmix/coupling.hpp"
#include "cglmix/ensemble.hpp"
#include "cglmix/errors.hpp"
#include "cglmix/estimators.hpp"
#include "cglmix/experiments.hpp"
#include "cglmix/fields.hpp"
#include "cglmix/format.hpp"

namespace cglmix {

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

std::string short_num(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

Outcome within(double value, double limit, const std::string& what) {
    return {value <= limit, what + " = " + fmt17(value) + " (limit " + short_num(limit) + ")"};
}

class Suite {
public:
    void add(std::string name, const std::function<Outcome()>& check) {
        CheckResult r;
        r.name = std::move(name);
        try {
            auto o = check();
            r.pass = o.pass;
            r.detail = std::move(o.detail);
        } catch (const std::exception& e) {
            r.pass = false;
            r.detail = std::string("threw: ") + e.what();
        }
        results_.push_back(std::move(r));
    }
    std::vector<CheckResult> take() { return std::move(results_); }

private:
    std::vector<CheckResult> results_;
};

Model quiet_copy(const Model& m) {
    Model q = m;
    q.noise = make_silent_noise(m.noise.M);
    q.params.h.reset();
    return q;
}

double max_abs_diff(const Field& a, const Field& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

}  // namespace

std::vector<CheckResult> run_validation_suite(const ExperimentConfig& config, unsigned workers) {
    Suite suite;
    const Model model = build_model(config);
    const auto& grid = model.grid;
    const auto& basis = *model.basis;
    const std::size_t N = std::min(config.control.N, basis.size());
    const std::uint64_t seed = config.run.seed;
    const Field probe = random_localized_field(grid, 1.0, stream_for(seed, 0, 3));

    suite.add("config_round_trip", [&] {
        const bool same = parse_config(to_ini(config)) == config;
        return Outcome{same, same ? "echo reparses to an equal config" : "echo differs after reparse"};
    });

    suite.add("philox_known_answer", [&] {
        const bool ok = philox4x32_10({0, 0, 0, 0}, {0, 0}) == PhiloxCounter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8};
        return Outcome{ok, "Philox4x32-10 zero counter and key"};
    });

    suite.add("parseval", [&] {
        const Field f = random_band_limited_field(grid, static_cast<int>(grid->size() / 4), stream_for(seed, 0, 4));
        const double rel = std::abs(spectral_norm_sq(*grid, to_spectral(f)) - norm_sq(f)) / norm_sq(f);
        return within(rel, 1e-12, "relative norm mismatch");
    });

    suite.add("basis_orthonormal", [&] {
        const std::size_t J = std::min<std::size_t>(basis.size(), 24);
        double worst = 0.0;
        for (std::size_t i = 0; i < J; ++i) {
            for (std::size_t j = 0; j < J; ++j) {
                worst = std::max(worst, std::abs(inner(basis.field(i), basis.field(j)) - (i == j ? 1.0 : 0.0)));
            }
        }
        return within(worst, 1e-10, "max Gram deviation");
    });

    suite.add("projection_identities", [&] {
        const Field p = project_PN(probe, basis, N);
        const Field pp = project_PN(p, basis, N);
        const Field q = project_QN(probe, basis, N);
        const double idem = max_abs_diff(p, pp);
        const double split = max_abs_diff(p + q, probe);
        return within(std::max(idem, split), 1e-12, "max |P P f - P f|, |P f + Q f - f|");
    });

    suite.add("cutoff_shape", [&] {
        const double A = config.poincare.A;
        const Field chi = cutoff_chi(A, grid);
        double worst = 0.0;
        for (std::size_t i = 0; i < chi.size(); ++i) {
            const double x = std::abs(grid->x(i));
            const double c = chi[i].real();
            if (c < 0.0 || c > 1.0 || chi[i].imag() != 0.0) worst = std::max(worst, 1.0);
            if (x <= A / 2.0) worst = std::max(worst, std::abs(c - 1.0));
            if (x >= A) worst = std::max(worst, std::abs(c));
        }
        return within(worst, 0.0, "cutoff deviation from 1 inside, 0 outside");
    });

    suite.add("weight_at_zero_time", [&] {
        const WeightTable table(grid);
        const Field psi0 = psi_weight(table, 0.0);
        const Field psi5 = psi_weight(table, 5.0);
        double worst = 0.0;
        for (std::size_t i = 0; i < psi0.size(); ++i) {
            worst = std::max(worst, std::abs(psi0[i]));
            worst = std::max(worst, psi5[i].real() - table.phi()[i]);
        }
        return within(worst, 0.0, "max psi(0), max psi(5) - phi");
    });

    suite.add("nonlinearity_homogeneity", [&] {
        const Field zero(grid);
        const double z = norm_sq(nonlinearity(zero, model.params));
        const double c = 1.7;
        Field lhs = nonlinearity(c * probe, model.params);
        const Field rhs = std::pow(c, model.params.q + 1.0) * nonlinearity(probe, model.params);
        const double rel = max_abs_diff(lhs, rhs) / std::max(1e-300, std::sqrt(norm_sq(rhs)));
        return within(std::max(z, rel), 1e-12, "N(0) and relative |N(cu) - c^{q+1} N(u)|");
    });

    const Model quiet = quiet_copy(model);

    suite.add("deterministic_decay", [&] {
        Integrator integ(quiet);
        const Field u0 = random_localized_field(grid, 2.0, stream_for(seed, 1, 3));
        auto s = integ.initial_state(u0);
        const double n0 = l2_norm(u0);
        double worst = 0.0;
        const auto steps = static_cast<std::uint64_t>(std::llround(1.0 / quiet.dt));
        evolve_truncated(integ, s, stream_for(seed, 0), steps, std::nullopt, [&](const TrajectoryState& st) {
            worst = std::max(worst, l2_norm(st.u) / (std::exp(-quiet.params.a * st.t) * n0));
        });
        return within(worst, 1.0 + 1e-6, "max ||u(t)|| / (e^{-at} ||u0||)");
    });

    suite.add("linear_mode_exact", [&] {
        Model lin = quiet;
        lin.params.alpha = 0.0;
        Integrator integ(lin);
        const std::size_t j = std::min<std::size_t>(4, basis.size() - 1);
        auto s = integ.initial_state(basis.field(j));
        const auto steps = static_cast<std::uint64_t>(std::llround(1.0 / lin.dt));
        evolve_truncated(integ, s, stream_for(seed, 0), steps, std::nullopt, [](const TrajectoryState&) {});
        const double k = basis.mode(j).k;
        const cplx f = std::exp(-(lin.params.a + lin.params.nu * (k * k)) * s.t);
        const Field ref = f * basis.field(j);
        return within(max_abs_diff(s.u, ref), 1e-10, "max deviation from e^{-(a + nu k^2) t} e_j");
    });

    suite.add("energy_initial_and_zero", [&] {
        Integrator integ(quiet);
        integ.set_energy_tracking(true);
        auto s = integ.initial_state(probe);
        EnergyRecord rec;
        record_energy(rec, s, quiet.params.dissipation());
        const double e0 = std::abs(rec.E_psi[0] - rec.norm_sq[0]);
        auto z = integ.initial_state(Field(grid));
        EnergyRecord zr;
        evolve_truncated(integ, z, stream_for(seed, 0), 20, std::nullopt,
                         [&](const TrajectoryState& st) { record_energy(zr, st, quiet.params.dissipation()); });
        double zmax = 0.0;
        for (double v : zr.E_psi) zmax = std::max(zmax, std::abs(v));
        return within(std::max(e0, zmax), 0.0, "|Epsi(0) - ||u0||^2| and max Epsi of the zero path");
    });

    suite.add("stopping_boundaries", [&] {
        EnergyRecord rec;
        rec.t = {0.0, 1.0, 2.0};
        rec.norm_sq = {2.0, 2.0, 2.0};
        rec.E_psi = {2.0, 2.5, 3.0};
        rec.E = rec.E_psi;
        rec.E_hat = rec.E_psi;
        StoppingParams at_start{1.0, 0.0, 0.0, 2.0};
        const auto tau0 = stopping_tau(rec, at_start);
        StoppingParams unreachable{1e12, 1.0, 4.0, 1e12};
        const auto never = stopping_tau(rec, unreachable);
        const bool ok = tau0.triggered && tau0.time == 0.0 && !never.triggered && never.time == 3.0;
        return Outcome{ok, "tau = " + fmt17(tau0.time) + ", sentinel = " + fmt17(never.time)};
    });

    suite.add("novikov_zero_cases", [&] {
        Integrator integ(model);
        const Projector proj(basis, N);
        auto u = integ.initial_state(probe);
        auto v = integ.initial_state(probe);
        const double same = norm_sq(novikov_integrand(u, v, model, proj, stopping_sentinel(1.0)));
        auto v2 = integ.initial_state(gaussian_bump(grid, 1.0));
        StoppingTime past;
        past.triggered = true;
        past.time = -1.0;
        const double after = norm_sq(novikov_integrand(u, v2, model, proj, past));
        NovikovLedger empty(N);
        const double density = model.noise.active() ? girsanov_log_density(empty, model.noise) : 0.0;
        return within(std::max({same, after, std::abs(density)}), 0.0, "A for u = v, A after tau, log density for A = 0");
    });

    suite.add("identical_coupling", [&] {
        Integrator integ(model);
        const Projector proj(basis, N);
        auto cs = make_coupling(integ, probe, probe, N);
        CouplingOptions opt;
        opt.steps = 200;
        opt.sample_every = 20;
        advance_pair(integ, cs, proj, stream_for(seed, 0), opt);
        double worst = 0.0;
        for (const auto& s : cs.samples) worst = std::max(worst, std::sqrt(s.w_norm_sq));
        return within(worst, 1e-12, "max ||w||");
    });

    suite.add("projected_difference_decay", [&] {
        Integrator integ(model);
        const Projector proj(basis, N);
        const Field probe2 = probe + 0.1 * random_localized_field(grid, 1.0, stream_for(seed, 0, 5));
        auto cs = make_coupling(integ, probe, probe2, N);
        CouplingOptions opt;
        opt.steps = static_cast<std::uint64_t>(std::llround(1.0 / model.dt));
        opt.sample_every = opt.steps;
        advance_pair(integ, cs, proj, stream_for(seed, 0), opt);
        const auto& s0 = cs.samples.front();
        const auto& s1 = cs.samples.back();
        const double factor = std::sqrt(s1.pw_norm_sq / s0.pw_norm_sq);
        const double expect = std::exp(-model.params.a * (s1.t - s0.t));
        const int m = basis.max_mode(N);
        const double kN = M_PI * m / grid->half_width();
        const double tol = 2.0 * model.dt * (1.0 + std::abs(model.params.nu) * kN * kN);
        return within(std::abs(factor / expect - 1.0), tol, "relative deviation of the P_N w decay factor");
    });

    suite.add("ou_oracle_initial", [&] {
        PhysParams lin = model.params;
        lin.alpha = 0.0;
        const auto m = ou_oracle(lin, model.noise, basis, 0, 0.0);
        return within(std::abs(m.mean_factor - 1.0) + m.variance, 0.0, "|mean factor - 1| + variance at t = 0");
    });

    suite.add("hitting_whole_space", [&] {
        const auto h = hitting_probability(model, probe, 1e12, 10 * model.dt, 100, seed, workers);
        return Outcome{h.probability == 1.0, "probability = " + fmt17(h.probability)};
    });

    suite.add("tail_events_unreachable", [&] {
        const auto recs = energy_ensemble(model, probe, 20 * model.dt, 5, EnsembleOptions{4, seed, workers});
        const std::vector<double> rho{1e12, 2e12, 4e12};
        const auto et = check_energy_tails(recs, 1.0, 0.0, rho);
        const std::vector<double> l{1e6};
        const auto st = check_stopping_tails(recs, StoppingParams{1.0, 1.0, 4.0, 1.0}, l);
        const bool ok = et.vacuous && et.frequency.back() == 0.0 && st.frequency[0] == 0.0;
        return Outcome{ok, "energy tail frequency " + fmt17(et.frequency.back()) + ", stopping tail past horizon " +
                               fmt17(st.frequency[0])};
    });

    suite.add("mixing_identical_laws", [&] {
        const auto family = make_test_family(grid, 4, seed);
        const std::vector<double> times{0.0, 10 * model.dt, 20 * model.dt};
        const auto r = estimate_mixing_rate(model, probe, probe, times, family, EnsembleOptions{4, seed, workers}, 0.0, 1.0);
        double worst = 0.0;
        for (std::size_t i = 0; i < r.distance.size(); ++i) worst = std::max(worst, r.distance[i] - 2.0 * r.se[i]);
        return within(worst, 0.0, "max distance - 2 SE");
    });

    suite.add("worker_independence", [&] {
        auto finals = [&](unsigned w) {
            IntegratorPool pool(model, w);
            return parallel_map<Field>(4, pool.size(), [&](std::size_t p, unsigned k) {
                auto s = pool[k].initial_state(probe);
                evolve_truncated(pool[k], s, stream_for(seed, p), 30, std::nullopt, [](const TrajectoryState&) {});
                return s.u;
            });
        };
        const auto one = finals(1);
        const auto many = finals(std::max(2u, workers));
        double worst = 0.0;
        for (std::size_t p = 0; p < one.size(); ++p) worst = std::max(worst, max_abs_diff(one[p], many[p]));
        return within(worst, 0.0, "max difference between worker counts");
    });

    return suite.take();
}

}  // namespace cglmix
