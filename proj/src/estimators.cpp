#include "cglmix/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "cglmix/ensemble.hpp"
#include "cglmix/errors.hpp"
#include "cglmix/fields.hpp"

namespace cglmix {

namespace {

std::vector<std::uint64_t> steps_for_times(std::span<const double> times, double dt) {
    std::vector<std::uint64_t> steps;
    steps.reserve(times.size());
    double prev = -1.0;
    for (double t : times) {
        if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("sample times must be finite and nonnegative");
        if (t <= prev) throw DomainError("sample times must be strictly increasing");
        prev = t;
        steps.push_back(static_cast<std::uint64_t>(std::llround(t / dt)));
    }
    return steps;
}

// Advances s with noise from `key` until it reaches step `target`.
void run_to(Integrator& integ, TrajectoryState& s, const StreamKey& key, std::uint64_t target, WienerIncrement& inc) {
    const auto& model = integ.model();
    while (s.step < target) {
        sample_increment_into(model.noise, model.dt, key, s.step, inc);
        integ.step(s, inc);
    }
}

struct LogFit {
    double slope = 0.0;
    double r2 = 0.0;
    bool fitted = false;
    bool bound = false;
};

// Log-linear fit of a nonincreasing frequency sequence against x. With a
// single nonzero frequency followed by a zero one, the slope returned is the
// decay needed to fall below one count, i.e. a bound.
LogFit log_frequency_fit(std::span<const double> x, std::span<const double> freq, std::size_t n) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (freq[i] > 0.0) {
            xs.push_back(x[i]);
            ys.push_back(std::log(freq[i]));
        }
    }
    LogFit out;
    if (xs.size() >= 2) {
        auto f = linear_fit(xs, ys);
        out.slope = f.slope;
        out.r2 = f.r_squared;
        out.fitted = true;
        return out;
    }
    if (xs.size() == 1) {
        for (std::size_t i = 0; i + 1 < x.size(); ++i) {
            if (freq[i] > 0.0 && freq[i + 1] == 0.0) {
                out.slope = (std::log(1.0 / static_cast<double>(n)) - std::log(freq[i])) / (x[i + 1] - x[i]);
                out.fitted = true;
                out.bound = true;
            }
        }
    }
    return out;
}

bool nonincreasing(std::span<const double> v) {
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[i - 1]) return false;
    }
    return true;
}

}  // namespace

double moment_constant(const Model& model) {
    const double a = model.params.a;
    return (model.params.h_norm_sq() / a + model.noise.B1) / a;
}

MomentReport check_moment_bound(const Model& model, const Field& u0, std::span<const double> times,
                                const EnsembleOptions& ens) {
    if (ens.paths < 500) throw PreconditionError("moment bound check needs at least 500 paths");
    const auto steps = steps_for_times(times, model.dt);
    IntegratorPool pool(model, ens.workers);
    auto norms = parallel_map<std::vector<double>>(ens.paths, pool.size(), [&](std::size_t p, unsigned w) {
        Integrator& integ = pool[w];
        auto s = integ.initial_state(u0);
        const auto key = stream_for(ens.seed, p);
        WienerIncrement inc;
        std::vector<double> out;
        out.reserve(steps.size());
        for (auto target : steps) {
            run_to(integ, s, key, target, inc);
            out.push_back(norm_sq(s.u));
        }
        return out;
    });
    MomentReport r;
    r.times.assign(times.begin(), times.end());
    r.C_prime = moment_constant(model);
    r.u0_norm_sq = norm_sq(u0);
    r.paths = ens.paths;
    r.pass = true;
    std::vector<double> col(ens.paths);
    for (std::size_t i = 0; i < steps.size(); ++i) {
        for (std::size_t p = 0; p < ens.paths; ++p) col[p] = norms[p][i];
        const auto ms = mean_se(col);
        const double t = static_cast<double>(steps[i]) * model.dt;
        const double bound = std::exp(-model.params.a * t) * r.u0_norm_sq + r.C_prime;
        r.mean.push_back(ms.mean);
        r.se.push_back(ms.se);
        r.bound.push_back(bound);
        if (ms.mean > bound + 3.0 * ms.se) r.pass = false;
    }
    return r;
}

std::vector<EnergyRecord> energy_ensemble(const Model& model, const Field& u0, double horizon,
                                          std::uint64_t sample_every, const EnsembleOptions& ens,
                                          std::uint32_t channel) {
    if (sample_every == 0) throw DomainError("sample_every must be positive");
    if (!(horizon > 0.0)) throw DomainError("horizon must be positive");
    const auto steps = static_cast<std::uint64_t>(std::llround(horizon / model.dt));
    IntegratorPool pool(model, ens.workers, true);
    const double D = model.params.dissipation();
    return parallel_map<EnergyRecord>(ens.paths, pool.size(), [&](std::size_t p, unsigned w) {
        Integrator& integ = pool[w];
        auto s = integ.initial_state(u0);
        EnergyRecord rec;
        record_energy(rec, s, D);
        const auto key = stream_for(ens.seed, p, channel);
        evolve_truncated(integ, s, key, steps, std::nullopt, [&](const TrajectoryState& st) {
            if (st.step % sample_every == 0 || st.step == steps) record_energy(rec, st, D);
        });
        return rec;
    });
}

double calibrate_K(std::span<const EnergyRecord> pilot) {
    if (pilot.empty()) throw DomainError("calibration needs a nonempty pilot ensemble");
    std::vector<double> slopes;
    slopes.reserve(pilot.size());
    for (const auto& r : pilot) slopes.push_back(linear_fit(r.t, r.E_psi).slope);
    return 1.5 * median(slopes);
}

EnergyTailReport check_energy_tails(std::span<const EnergyRecord> records, double K, double C3,
                                    std::span<const double> rho_list) {
    if (records.empty()) throw DomainError("energy tails need a nonempty ensemble");
    if (rho_list.size() < 3) throw DomainError("energy tails need at least three levels");
    for (std::size_t i = 1; i < rho_list.size(); ++i) {
        if (!(rho_list[i] > rho_list[i - 1])) throw DomainError("tail levels must be increasing");
    }
    if (!(K > 0.0)) throw DomainError("tail slope K must be positive");
    if (!(C3 >= 0.0)) throw DomainError("tail coefficient C3 must be nonnegative");
    const std::size_t n = records.size();
    std::vector<double> excess(n);
    for (std::size_t p = 0; p < n; ++p) {
        const auto& r = records[p];
        double sup = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < r.size(); ++i) sup = std::max(sup, r.E_psi[i] - K * r.t[i]);
        excess[p] = sup - r.E_psi[0] - C3 * r.norm_sq[0];
    }
    EnergyTailReport rep;
    rep.K = K;
    rep.C3 = C3;
    rep.paths = n;
    for (double rho : rho_list) {
        const auto hits = static_cast<std::size_t>(std::count_if(excess.begin(), excess.end(), [&](double e) { return e >= rho; }));
        rep.rho.push_back(rho);
        rep.frequency.push_back(static_cast<double>(hits) / static_cast<double>(n));
        rep.ci95.push_back(wilson_interval(hits, n));
    }
    rep.monotone = nonincreasing(rep.frequency);
    rep.vacuous = std::all_of(rep.frequency.begin(), rep.frequency.end(), [](double f) { return f == 0.0; });
    if (rep.vacuous) {
        rep.warning = "no exceedance at any level; the tail check is vacuous";
        rep.pass = rep.monotone;
        return rep;
    }
    const auto fit = log_frequency_fit(rep.rho, rep.frequency, n);
    rep.gamma_hat = -fit.slope;
    rep.gamma_r2 = fit.r2;
    rep.gamma_is_bound = fit.bound;
    if (!fit.fitted) rep.warning = "tail frequencies do not decay within the levels; no rate fitted";
    rep.pass = rep.monotone && fit.fitted && rep.gamma_hat > 0.0;
    return rep;
}

StoppingTailReport check_stopping_tails(std::span<const EnergyRecord> records, const StoppingParams& sp,
                                        std::span<const double> l_list) {
    validate(sp);
    if (records.empty()) throw DomainError("stopping tails need a nonempty ensemble");
    if (l_list.empty()) throw DomainError("stopping tails need at least one level");
    const std::size_t n = records.size();
    StoppingTailReport rep;
    rep.horizon = records[0].t.back();
    std::vector<double> tau(n);
    std::vector<char> hit(n);
    for (std::size_t p = 0; p < n; ++p) {
        const auto st = stopping_tau(records[p], sp);
        tau[p] = st.time;
        hit[p] = st.triggered && st.time < records[p].t.back();
    }
    for (double l : l_list) {
        std::size_t k = 0;
        for (std::size_t p = 0; p < n; ++p) k += hit[p] && tau[p] >= l;
        rep.l.push_back(l);
        rep.frequency.push_back(static_cast<double>(k) / static_cast<double>(n));
        rep.ci95.push_back(wilson_interval(k, n));
    }
    const double lmax = *std::max_element(l_list.begin(), l_list.end());
    if (rep.horizon < 2.0 * lmax) rep.warning = "horizon is not much larger than the largest level";
    rep.monotone = nonincreasing(rep.frequency);
    rep.any = std::any_of(rep.frequency.begin(), rep.frequency.end(), [](double f) { return f > 0.0; });
    if (!rep.any) {
        rep.pass = rep.monotone;
        return rep;
    }
    const auto fit = log_frequency_fit(rep.l, rep.frequency, n);
    rep.slope = fit.slope;
    rep.slope_is_bound = fit.bound;
    rep.pass = rep.monotone && fit.fitted && fit.slope < 0.0;
    return rep;
}

TestFamily::TestFamily(std::vector<Field> directions, std::vector<Field> centers)
    : directions_(std::move(directions)), centers_(std::move(centers)) {
    for (auto& g : directions_) {
        const double nrm = l2_norm(g);
        if (!(nrm > 0.0)) throw DomainError("test direction must be nonzero");
        g *= 1.0 / nrm;
    }
    if (size() == 0) throw DomainError("empty test family");
}

double TestFamily::evaluate(const Field& u, std::size_t index) const {
    if (index < directions_.size()) return std::tanh(inner(u, directions_[index]));
    const Field& c = centers_.at(index - directions_.size());
    return std::exp(-0.5 * norm_sq(u - c));
}

void TestFamily::evaluate(const Field& u, std::span<double> out) const {
    if (out.size() < size()) throw StructuralError("test family output too short");
    const auto us = u.samples();
    const double dx = u.grid().dx();
    for (std::size_t i = 0; i < directions_.size(); ++i) {
        const auto gs = directions_[i].samples();
        double acc = 0.0;
        for (std::size_t x = 0; x < us.size(); ++x) acc += us[x].real() * gs[x].real() + us[x].imag() * gs[x].imag();
        out[i] = std::tanh(acc * dx);
    }
    for (std::size_t i = 0; i < centers_.size(); ++i) {
        const auto cs = centers_[i].samples();
        double acc = 0.0;
        for (std::size_t x = 0; x < us.size(); ++x) acc += abs2(us[x] - cs[x]);
        out[directions_.size() + i] = std::exp(-0.5 * acc * dx);
    }
}

TestFamily make_test_family(const GridPtr& grid, std::size_t size, std::uint64_t seed) {
    if (size < 2) throw DomainError("test family needs at least two members");
    const std::size_t nd = size / 2, nc = size - nd;
    std::vector<Field> dirs, centers;
    for (std::size_t i = 0; i < nd; ++i) {
        const double width = 1.0 + static_cast<double>(i % 4);
        dirs.push_back(random_localized_field(grid, 1.0, stream_for(seed, i, 6), width));
    }
    centers.emplace_back(grid);
    for (std::size_t i = 1; i < nc; ++i) {
        const double norm = 0.5 + 2.0 * static_cast<double>(i) / static_cast<double>(nc);
        centers.push_back(random_localized_field(grid, norm, stream_for(seed, i, 7), 2.0));
    }
    return TestFamily(std::move(dirs), std::move(centers));
}

MixingReport estimate_mixing_rate(const Model& model, const Field& u0_a, const Field& u0_b,
                                  std::span<const double> times, const TestFamily& family,
                                  const EnsembleOptions& ens, double fit_t_min, double fit_t_max) {
    if (ens.paths < 2) throw PreconditionError("mixing estimate needs at least two paths per ensemble");
    const auto steps = steps_for_times(times, model.dt);
    const std::size_t F = family.size(), T = steps.size();
    IntegratorPool pool(model, ens.workers);
    auto diffs = parallel_map<std::vector<double>>(ens.paths, pool.size(), [&](std::size_t p, unsigned w) {
        Integrator& integ = pool[w];
        auto a = integ.initial_state(u0_a);
        auto b = integ.initial_state(u0_b);
        const auto key = stream_for(ens.seed, p);
        WienerIncrement inc;
        std::vector<double> out(T * F), fa(F), fb(F);
        for (std::size_t i = 0; i < T; ++i) {
            while (a.step < steps[i]) {
                sample_increment_into(model.noise, model.dt, key, a.step, inc);
                integ.step(a, inc);
                integ.step(b, inc);
            }
            family.evaluate(a.u, fa);
            family.evaluate(b.u, fb);
            for (std::size_t f = 0; f < F; ++f) out[i * F + f] = fa[f] - fb[f];
        }
        return out;
    });
    MixingReport r;
    r.paths = ens.paths;
    r.family_size = F;
    r.fit_t_min = fit_t_min;
    r.fit_t_max = fit_t_max;
    std::vector<double> col(ens.paths);
    for (std::size_t i = 0; i < T; ++i) {
        double best = -1.0, best_se = 0.0;
        std::size_t arg = 0;
        for (std::size_t f = 0; f < F; ++f) {
            for (std::size_t p = 0; p < ens.paths; ++p) col[p] = diffs[p][i * F + f];
            const auto ms = mean_se(col);
            if (std::abs(ms.mean) > best) {
                best = std::abs(ms.mean);
                best_se = ms.se;
                arg = f;
            }
        }
        r.times.push_back(static_cast<double>(steps[i]) * model.dt);
        r.distance.push_back(best);
        r.se.push_back(best_se);
        r.argmax.push_back(arg);
    }
    std::vector<double> ft, fy;
    for (std::size_t i = 0; i < T; ++i) {
        const double t = r.times[i];
        if (t < fit_t_min || t > fit_t_max) continue;
        if (!(r.distance[i] > 2.0 * r.se[i]) || !(r.distance[i] > 0.0)) continue;
        ft.push_back(t);
        fy.push_back(std::log(r.distance[i]));
    }
    r.fit_points = ft.size();
    if (ft.size() < 3) {
        r.floor_limited = true;
        return r;
    }
    const auto fit = linear_fit(ft, fy);
    r.kappa = -fit.slope;
    r.intercept = fit.intercept;
    r.r_squared = fit.r_squared;
    return r;
}

OuMoments ou_oracle(const PhysParams& params, const NoiseSpec& spec, const TrigBasis& basis, std::size_t j,
                    double t) {
    if (params.alpha != cplx{}) throw DomainError("the OU oracle needs alpha = 0");
    if (!(t >= 0.0)) throw DomainError("oracle time must be nonnegative");
    const double k = basis.mode(j).k;
    const cplx lambda = params.a + params.nu * (k * k);
    const double lr = lambda.real();
    const double b = j < spec.b.size() ? spec.b[j] : 0.0;
    OuMoments m;
    m.mean_factor = std::exp(-lambda * t);
    m.variance = b * b * (-std::expm1(-2.0 * lr * t)) / (2.0 * lr);
    return m;
}

}  // namespace cglmix
