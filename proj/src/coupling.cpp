#include "cglmix/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "cglmix/ensemble.hpp"
#include "cglmix/errors.hpp"
#include "cglmix/format.hpp"

namespace cglmix {

namespace {

Field difference(const TrajectoryState& u, const TrajectoryState& v) {
    Field w = u.u;
    w -= v.u;
    return w;
}

PairSample make_sample(const CouplingState& cs, const Projector& proj) {
    PairSample s;
    s.t = cs.u.t;
    s.w_norm_sq = norm_sq(cs.w);
    const Grid& g = cs.u.u.grid();
    CVector pw(cs.u.spectral.size());
    for (std::size_t i = 0; i < pw.size(); ++i) pw[i] = cs.u.spectral[i] - cs.v.spectral[i];
    proj.apply(pw, pw);
    s.pw_norm_sq = spectral_norm_sq(g, pw);
    s.u_norm_sq = norm_sq(cs.u.u);
    s.v_norm_sq = norm_sq(cs.v.u);
    s.int_A_sq = cs.ledger.integral_A_sq();
    return s;
}

// Control coordinates a_j = <A, e_j> of A = -P_N[...] at the current pair.
void sample_control(const CouplingState& cs, const Model& model, const Projector& proj, std::vector<double>& a) {
    const Field A = novikov_integrand(cs.u, cs.v, model, proj, stopping_sentinel(cs.u.t));
    const CVector hat = to_spectral(A);
    control_coordinates(*model.basis, hat, proj.rank(), a);
}

StoppingTime triggered_at(double t, std::size_t index) {
    StoppingTime s;
    s.triggered = true;
    s.time = t;
    s.index = index;
    return s;
}

}  // namespace

CouplingState::CouplingState(TrajectoryState u_, TrajectoryState v_, std::size_t N)
    : u(std::move(u_)), v(std::move(v_)), w(difference(u, v)), ledger(N) {
    d = l2_norm(w);
    u0_norm_sq = norm_sq(u.u);
    v0_norm_sq = norm_sq(v.u);
    tau_u = stopping_sentinel(0.0);
    tau_v = stopping_sentinel(0.0);
}

CouplingState make_coupling(Integrator& integ, const Field& u0, const Field& u0_prime, std::size_t N) {
    if (N > integ.model().basis->size()) throw DomainError("control rank exceeds the basis size");
    return CouplingState(integ.initial_state(u0), integ.initial_state(u0_prime), N);
}

void advance_pair(Integrator& integ, CouplingState& cs, const Projector& proj, const StreamKey& stream,
                  const CouplingOptions& options) {
    const Model& model = integ.model();
    const std::size_t N = proj.rank();
    if (N != cs.ledger.rank()) throw StructuralError("projector rank differs from the ledger rank");
    if (options.sample_every == 0) throw DomainError("sample_every must be positive");
    if (options.stopping) {
        validate(*options.stopping);
        if (!integ.energy_tracking()) throw PreconditionError("online stopping needs energy tracking");
    }
    const std::size_t n = model.grid->size();
    CVector control(n);
    std::vector<double> a(N);
    WienerIncrement inc;

    auto check_stop = [&](std::size_t sample_index) {
        if (!options.stopping || cs.truncated) return;
        const auto& sp = *options.stopping;
        const double t = cs.u.t;
        if (integ.weighted_energy(cs.u) >= sp.threshold(t, cs.u0_norm_sq)) cs.tau_u = triggered_at(t, sample_index);
        if (integ.weighted_energy(cs.v) >= sp.threshold(t, cs.v0_norm_sq)) cs.tau_v = triggered_at(t, sample_index);
        if (cs.tau_u.triggered || cs.tau_v.triggered) cs.truncated = true;
    };

    if (cs.samples.empty()) {
        check_stop(0);
        cs.samples.push_back(make_sample(cs, proj));
    }
    for (std::uint64_t i = 0; i < options.steps; ++i) {
        if (cs.truncated) {
            integ.step_heat(cs.u);
            integ.step_heat(cs.v);
        } else {
            const double t0 = cs.u.t;
            sample_increment_into(model.noise, model.dt, stream, cs.u.step, inc);
            integ.step_pair(cs.u, cs.v, inc, proj, control);
            if (N > 0) {
                for (auto& c : control) c = -c;
                control_coordinates(*model.basis, control, N, a);
                cs.ledger.add_sample(t0, a);
                cs.ledger.add_increment(a, inc.g, model.dt);
            }
            check_stop(cs.samples.size());
            if (N > 0 && (cs.truncated || i + 1 == options.steps)) {
                sample_control(cs, model, proj, a);
                cs.ledger.add_sample(cs.u.t, a);
            }
        }
        if (cs.u.step % options.sample_every == 0 || i + 1 == options.steps) {
            cs.w = difference(cs.u, cs.v);
            if (cs.samples.empty() || cs.samples.back().t < cs.u.t) cs.samples.push_back(make_sample(cs, proj));
        }
    }
    cs.w = difference(cs.u, cs.v);
    if (cs.tau_u.triggered == false) cs.tau_u = stopping_sentinel(cs.u.t);
    if (cs.tau_v.triggered == false) cs.tau_v = stopping_sentinel(cs.u.t);
}

LinearFit fit_path_squeeze(const CouplingState& cs, double t_min, double t_max) {
    if (!(cs.d > 0.0)) throw DomainError("squeeze fit needs distinct initial conditions");
    std::vector<double> t, y;
    const double d2 = cs.d * cs.d;
    for (const auto& s : cs.samples) {
        if (s.t < t_min || s.t > t_max || !(s.w_norm_sq > 0.0)) continue;
        t.push_back(s.t);
        y.push_back(std::log(s.w_norm_sq / d2));
    }
    if (t.size() < 2) throw DomainError("squeeze fit needs at least two samples in the window");
    return linear_fit(t, y);
}

SqueezeFit fit_squeeze_rate(std::span<const CouplingState> ensemble, double t_min, double t_max) {
    if (ensemble.empty()) throw DomainError("squeeze fit over an empty ensemble");
    SqueezeFit out;
    std::size_t negative = 0;
    for (const auto& cs : ensemble) {
        const auto fit = fit_path_squeeze(cs, t_min, t_max);
        out.rates.push_back(-fit.slope);
        out.intercepts.push_back(fit.intercept);
        if (fit.slope < 0.0) ++negative;
    }
    out.c_prime = median(out.rates);
    out.c = std::exp(median(out.intercepts));
    out.rate_q1 = quantile(out.rates, 0.25);
    out.rate_q3 = quantile(out.rates, 0.75);
    out.success_fraction = static_cast<double>(negative) / static_cast<double>(ensemble.size());
    return out;
}

StoppingTime recurrence_time(Integrator& integ, const Field& u0, const Field& u0_prime, double d_ball,
                             std::uint64_t steps, const StreamKey& stream_u, const StreamKey& stream_u_prime) {
    if (!(d_ball >= 0.0)) throw DomainError("ball radius must be nonnegative");
    const Model& model = integ.model();
    const double r2 = d_ball * d_ball;
    auto u = integ.initial_state(u0);
    auto v = integ.initial_state(u0_prime);
    auto inside = [&] { return norm_sq(u.u) <= r2 && norm_sq(v.u) <= r2; };
    if (inside()) return triggered_at(0.0, 0);
    WienerIncrement inc;
    for (std::uint64_t i = 0; i < steps; ++i) {
        sample_increment_into(model.noise, model.dt, stream_u, u.step, inc);
        integ.step(u, inc);
        sample_increment_into(model.noise, model.dt, stream_u_prime, v.step, inc);
        integ.step(v, inc);
        if (inside()) return triggered_at(u.t, static_cast<std::size_t>(u.step));
    }
    return stopping_sentinel(static_cast<double>(steps) * model.dt);
}

HittingEstimate hitting_probability(const Model& model, const Field& u0, double d_ball, double T,
                                    std::size_t ensemble_size, std::uint64_t seed, unsigned workers) {
    if (ensemble_size < 100) throw PreconditionError("hitting probability needs at least 100 paths");
    if (!(T >= 0.0)) throw DomainError("hitting time horizon must be nonnegative");
    const auto steps = static_cast<std::uint64_t>(std::llround(T / model.dt));
    IntegratorPool pool(model, workers);
    const double r2 = d_ball * d_ball;
    auto hits = parallel_map<char>(ensemble_size, pool.size(), [&](std::size_t path, unsigned worker) {
        Integrator& integ = pool[worker];
        auto s = integ.initial_state(u0);
        const StreamKey key = stream_for(seed, path);
        evolve_truncated(integ, s, key, steps, std::nullopt, [](const TrajectoryState&) {});
        return static_cast<char>(norm_sq(s.u) < r2);
    });
    HittingEstimate h;
    h.paths = ensemble_size;
    h.hits = static_cast<std::size_t>(std::count(hits.begin(), hits.end(), 1));
    h.probability = static_cast<double>(h.hits) / static_cast<double>(h.paths);
    h.ci95 = wilson_interval(h.hits, h.paths);
    return h;
}

PairSummary summarize_pair(const CouplingState& cs, std::uint64_t path, const Model& model, double rate_floor) {
    PairSummary r;
    r.path = path;
    r.d = cs.d;
    r.N = cs.ledger.rank();
    r.tau_u = cs.tau_u;
    r.tau_v = cs.tau_v;
    r.int_A_sq = cs.ledger.integral_A_sq();
    r.log_rn = std::numeric_limits<double>::quiet_NaN();
    if (r.N > 0) {
        try {
            r.log_rn = girsanov_log_density(cs.ledger, model.noise);
        } catch (const PreconditionError&) {
        }
    }
    r.c_prime = std::numeric_limits<double>::quiet_NaN();
    r.intercept = std::numeric_limits<double>::quiet_NaN();
    if (cs.d > 0.0 && !cs.samples.empty()) {
        const double T = cs.samples.back().t;
        r.w_ratio = cs.samples.back().w_norm_sq / (cs.d * cs.d);
        r.success = r.w_ratio <= std::exp(-rate_floor * T);
        try {
            const auto fit = fit_path_squeeze(cs);
            r.c_prime = -fit.slope;
            r.intercept = fit.intercept;
        } catch (const DomainError&) {
        }
    }
    return r;
}

void write_pair_csv(std::ostream& os, std::span<const PairSummary> rows) {
    os << kPairCsvHeader << '\n';
    for (const auto& r : rows) {
        os << r.path << ',' << fmt17(r.d) << ',' << r.N << ',' << fmt17(r.c_prime) << ',' << fmt17(r.intercept) << ','
           << (r.success ? 1 : 0) << ',' << fmt17(r.w_ratio) << ',' << fmt17(r.tau_u.time) << ','
           << (r.tau_u.triggered ? 1 : 0) << ',' << fmt17(r.tau_v.time) << ',' << (r.tau_v.triggered ? 1 : 0) << ','
           << fmt17(r.int_A_sq) << ',' << fmt17(r.log_rn) << '\n';
    }
    if (!os) throw IoError("failed to write pair table");
}

namespace {

std::string json_number(double x) { return std::isfinite(x) ? fmt17(x) : "null"; }

}  // namespace

void write_pair_jsonl(std::ostream& os, std::span<const PairSummary> rows) {
    for (const auto& r : rows) {
        os << "{\"path\":" << r.path << ",\"d\":" << json_number(r.d) << ",\"N\":" << r.N
           << ",\"c_prime\":" << json_number(r.c_prime) << ",\"intercept\":" << json_number(r.intercept)
           << ",\"success\":" << (r.success ? "true" : "false") << ",\"w_ratio\":" << json_number(r.w_ratio)
           << ",\"tau_u\":" << json_number(r.tau_u.time) << ",\"tau_u_triggered\":" << (r.tau_u.triggered ? "true" : "false")
           << ",\"tau_v\":" << json_number(r.tau_v.time) << ",\"tau_v_triggered\":" << (r.tau_v.triggered ? "true" : "false")
           << ",\"int_A_sq\":" << json_number(r.int_A_sq) << ",\"log_rn\":" << json_number(r.log_rn) << "}\n";
    }
    if (!os) throw IoError("failed to write pair records");
}

}  // namespace cglmix
