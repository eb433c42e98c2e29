#include "cglmix/functionals.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "cglmix/errors.hpp"
#include "cglmix/format.hpp"

namespace cglmix {

EnergyRecord energy_psi(std::span<const EnergySample> samples, double dissipation) {
    EnergyRecord r;
    r.dissipation = dissipation;
    const std::size_t n = samples.size();
    r.t.resize(n);
    r.E.resize(n);
    r.E_hat.resize(n);
    r.E_psi.resize(n);
    r.norm_sq.resize(n);
    r.psi_norm_sq.resize(n);
    r.int_h1.resize(n);
    r.int_psi_h1.resize(n);
    double ih1 = 0.0, ipsi = 0.0, ihat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = samples[i];
        if (i > 0) {
            const auto& p = samples[i - 1];
            const double h = 0.5 * (s.t - p.t);
            if (!(h >= 0.0)) throw StructuralError("energy samples must be ordered in time");
            ih1 += h * (p.h1_sq + s.h1_sq);
            ipsi += h * (p.psi_h1_sq + s.psi_h1_sq);
            ihat += h * (p.psi_norm_sq + p.psi_grad_sq + s.psi_norm_sq + s.psi_grad_sq);
        }
        r.t[i] = s.t;
        r.norm_sq[i] = s.norm_sq;
        r.psi_norm_sq[i] = s.psi_norm_sq;
        r.int_h1[i] = ih1;
        r.int_psi_h1[i] = ipsi;
        r.E[i] = s.norm_sq + dissipation * ih1;
        r.E_hat[i] = s.psi_norm_sq + dissipation * ihat;
        r.E_psi[i] = s.norm_sq + s.psi_norm_sq + dissipation * (ih1 + ipsi);
    }
    return r;
}

void record_energy(EnergyRecord& r, const TrajectoryState& s, double dissipation) {
    if (!s.last) throw PreconditionError("energy record needs a tracked trajectory");
    if (!r.t.empty() && s.t < r.t.back()) throw StructuralError("energy samples must be ordered in time");
    const auto& e = *s.last;
    r.dissipation = dissipation;
    r.t.push_back(s.t);
    r.norm_sq.push_back(e.norm_sq);
    r.psi_norm_sq.push_back(e.psi_norm_sq);
    r.int_h1.push_back(s.int_h1);
    r.int_psi_h1.push_back(s.int_psi_h1);
    r.E.push_back(e.norm_sq + dissipation * s.int_h1);
    r.E_hat.push_back(e.psi_norm_sq + dissipation * s.int_psi_hat);
    r.E_psi.push_back(e.norm_sq + e.psi_norm_sq + dissipation * (s.int_h1 + s.int_psi_h1));
}

void validate(const StoppingParams& sp) {
    if (!(sp.K > 0.0)) throw DomainError("stopping slope K must be positive");
    if (!(sp.rho > 0.0)) throw DomainError("stopping level rho must be positive");
    if (!(sp.L >= 0.0)) throw DomainError("stopping slope L must be nonnegative");
    if (!(sp.M >= 0.0)) throw DomainError("stopping coefficient M must be nonnegative");
}

StoppingTime stopping_sentinel(double horizon) {
    StoppingTime s;
    s.triggered = false;
    s.time = horizon + 1.0;
    return s;
}

StoppingTime stopping_tau(const EnergyRecord& record, const StoppingParams& sp) {
    validate(sp);
    if (record.size() == 0) throw StructuralError("empty energy record");
    const double u0 = record.initial_norm_sq();
    for (std::size_t i = 0; i < record.size(); ++i) {
        if (record.E_psi[i] >= sp.threshold(record.t[i], u0)) {
            StoppingTime s;
            s.triggered = true;
            s.time = record.t[i];
            s.index = i;
            return s;
        }
    }
    return stopping_sentinel(record.t.back());
}

NovikovLedger::NovikovLedger(std::size_t N) : N_(N), ito_(N, 0.0), quad_(N, 0.0) {}

void NovikovLedger::add_sample(double t, std::span<const double> coords) {
    if (coords.size() < N_) throw StructuralError("control coordinates shorter than the ledger rank");
    double sq = 0.0;
    for (std::size_t j = 0; j < N_; ++j) sq += coords[j] * coords[j];
    if (!has_last_) first_t_ = t;
    if (has_last_) {
        if (t < last_t_) throw StructuralError("ledger samples must be ordered in time");
        int_A_sq_ += 0.5 * (t - last_t_) * (last_A_sq_ + sq);
    }
    last_t_ = t;
    last_A_sq_ = sq;
    has_last_ = true;
}

void NovikovLedger::add_increment(std::span<const double> coords, std::span<const double> g, double dt) {
    if (coords.size() < N_ || g.size() < N_) throw StructuralError("increment shorter than the ledger rank");
    const double sq = std::sqrt(dt);
    for (std::size_t j = 0; j < N_; ++j) {
        ito_[j] += coords[j] * g[j] * sq;
        quad_[j] += coords[j] * coords[j] * dt;
    }
}

void NovikovLedger::append(const NovikovLedger& later) {
    if (later.N_ != N_) throw StructuralError("ledgers of different rank");
    if (has_last_ && later.has_last_ &&
        std::abs(later.first_t_ - last_t_) > 1e-12 * std::max(1.0, std::abs(last_t_))) {
        throw StructuralError("ledgers do not cover adjacent intervals");
    }
    int_A_sq_ += later.int_A_sq_;
    for (std::size_t j = 0; j < N_; ++j) {
        ito_[j] += later.ito_[j];
        quad_[j] += later.quad_[j];
    }
    if (later.has_last_) {
        if (!has_last_) first_t_ = later.first_t_;
        last_t_ = later.last_t_;
        last_A_sq_ = later.last_A_sq_;
        has_last_ = true;
    }
}

void control_coordinates(const TrigBasis& basis, std::span<const cplx> A_hat, std::size_t N,
                         std::span<double> out) {
    basis.coordinates(A_hat, N, out);
}

Field novikov_integrand(const TrajectoryState& u, const TrajectoryState& v, const Model& model,
                        const Projector& proj, const StoppingTime& tau) {
    if (u.step != v.step || std::abs(u.t - v.t) > 1e-12 * std::max(1.0, std::abs(u.t))) {
        throw StructuralError("coupled states are not time-aligned");
    }
    const Grid& g = *model.grid;
    const std::size_t n = g.size();
    if (tau.triggered && u.t > tau.time) return Field(model.grid);
    CVector nu(n), nv(n), tmp(n), c(n);
    nonlinearity_into(u.u.samples(), tmp, model.params.alpha, model.params.q);
    g.forward(tmp.data(), nu.data());
    nonlinearity_into(v.u.samples(), tmp, model.params.alpha, model.params.q);
    g.forward(tmp.data(), nv.data());
    const auto k2 = g.wavenumbers_sq();
    for (std::size_t i = 0; i < n; ++i) {
        c[i] = -(nu[i] - nv[i] + model.params.nu * k2[i] * (u.spectral[i] - v.spectral[i]));
    }
    proj.apply(c, c);
    return from_spectral(model.grid, c);
}

double girsanov_log_density(const NovikovLedger& ledger, const NoiseSpec& spec) {
    const std::size_t N = ledger.rank();
    require_controllable(spec, N);
    double acc = 0.0;
    const auto ito = ledger.ito_sums();
    const auto quad = ledger.quadratic_sums();
    for (std::size_t j = 0; j < N; ++j) {
        const double b = spec.b[j];
        acc += ito[j] / b - 0.5 * quad[j] / (b * b);
    }
    return acc;
}

void write_functionals_csv(std::ostream& os, std::span<const FunctionalRow> rows) {
    os << kFunctionalCsvHeader << '\n';
    for (const auto& r : rows) {
        os << fmt17(r.t) << ',' << fmt17(r.E) << ',' << fmt17(r.E_hat) << ',' << fmt17(r.E_psi) << ','
           << fmt17(r.int_A_sq) << ',' << fmt17(r.log_rn) << '\n';
    }
    if (!os) throw IoError("failed to write functional table");
}

std::vector<FunctionalRow> read_functionals_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != kFunctionalCsvHeader) {
        throw IoError("functional table has an unexpected header");
    }
    std::vector<FunctionalRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto v = parse_csv_doubles(line);
        if (v.size() != 6) throw IoError("functional table row has " + std::to_string(v.size()) + " fields");
        rows.push_back({v[0], v[1], v[2], v[3], v[4], v[5]});
    }
    return rows;
}

}  // namespace cglmix
