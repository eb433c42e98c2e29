#include "cglmix/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cglmix/errors.hpp"

namespace cglmix {

void validate(const PhysParams& p) {
    if (!(p.a > 0.0) || !std::isfinite(p.a)) throw DomainError("damping a must be positive");
    if (!(p.nu.real() > 0.0) || !std::isfinite(p.nu.imag())) throw DomainError("viscosity needs nu_1 > 0");
    if (!(p.alpha.real() >= 0.0) || !std::isfinite(p.alpha.imag()))
        throw DomainError("nonlinearity needs alpha_1 >= 0");
    if (!(p.q > 0.0 && p.q < 2.0)) throw DomainError("exponent q must lie in (0, 2)");
    if (p.h && !p.h->all_finite()) throw DomainError("force h has non-finite samples");
}

Propagator::Propagator(const Grid& grid, const PhysParams& params, double dt) {
    if (!(dt > 0.0)) throw DomainError("time step must be positive");
    const std::size_t n = grid.size();
    const auto k2 = grid.wavenumbers_sq();
    damp.resize(n);
    nu_k2.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        nu_k2[i] = params.nu * k2[i];
        damp[i] = std::exp(-(params.a + nu_k2[i]) * dt);
    }
    if (params.h) {
        if (!params.h->grid().equivalent(grid)) throw StructuralError("force lives on a different grid");
        h_hat = to_spectral(*params.h);
    }
    dealias_cutoff = n / 3;
}

TrajectoryState::TrajectoryState(Field u0) : spectral(to_spectral(u0)), u(std::move(u0)) {}

void nonlinearity_into(std::span<const cplx> u, std::span<cplx> out, cplx alpha, double q) noexcept {
    const std::size_t n = u.size();
    const double a1 = alpha.real(), a2 = alpha.imag();
    if (q == 1.0) {
        const double* in = reinterpret_cast<const double*>(u.data());
        double* o = reinterpret_cast<double*>(out.data());
        for (std::size_t i = 0; i < n; ++i) {
            const double x = in[2 * i], y = in[2 * i + 1];
            const double r = std::sqrt(x * x + y * y);
            o[2 * i] = r * (a1 * x - a2 * y);
            o[2 * i + 1] = r * (a1 * y + a2 * x);
        }
    } else {
        const double half = 0.5 * q;
        for (std::size_t i = 0; i < n; ++i) {
            const double r2 = abs2(u[i]);
            out[i] = r2 > 0.0 ? alpha * (std::pow(r2, half) * u[i]) : cplx{};
        }
    }
}

Field nonlinearity(const Field& u, const PhysParams& params) {
    if (!(params.q > 0.0 && params.q < 2.0)) throw DomainError("exponent q must lie in (0, 2)");
    Field out(u.grid_ptr());
    nonlinearity_into(u.samples(), out.samples(), params.alpha, params.q);
    return out;
}

Integrator::Integrator(const Model& model)
    : Integrator(model, std::make_shared<const Propagator>(*model.grid, model.params, model.dt)) {}

Integrator::Integrator(const Model& model, std::shared_ptr<const Propagator> propagator)
    : model_(&model), prop_(std::move(propagator)), weights_(model.grid) {
    validate(model.params);
    if (!model.basis) throw StructuralError("model has no basis");
    if (model.noise.M > model.basis->size()) throw StructuralError("noise uses more modes than the basis holds");
    const std::size_t n = model.grid->size();
    buf_a_.resize(n);
    buf_b_.resize(n);
    buf_c_.resize(n);
    buf_d_.resize(n);
    decay_.resize(n);
    decay_step_.resize(n);
    psi_.resize(n);
    psi_x_.resize(n);
    for (std::size_t i = 0; i < n; ++i) decay_step_[i] = std::exp(-model.dt / weights_.phi()[i]);
}

TrajectoryState Integrator::initial_state(const Field& u0) {
    if (!u0.grid().equivalent(*model_->grid)) throw StructuralError("initial field lives on a different grid");
    if (!u0.all_finite()) throw DomainError("initial field has non-finite samples");
    TrajectoryState s(u0);
    if (track_energy_) s.last = energy_sample(s);
    return s;
}

void Integrator::nonlinear_hat(const TrajectoryState& s, CVector& out) {
    const auto& p = model_->params;
    nonlinearity_into(s.u.samples(), buf_a_, p.alpha, p.q);
    model_->grid->forward(buf_a_.data(), out.data());
    if (model_->dealias) {
        const std::size_t n = out.size();
        const auto cut = static_cast<long>(prop_->dealias_cutoff);
        for (std::size_t i = 0; i < n; ++i) {
            if (std::labs(model_->grid->mode_of_index(i)) > cut) out[i] = 0.0;
        }
    }
}

void Integrator::add_noise(CVector& spectral, const WienerIncrement& inc) const {
    if (inc.dW.size() != model_->noise.M) {
        throw StructuralError("increment has " + std::to_string(inc.dW.size()) + " modes, noise has " +
                              std::to_string(model_->noise.M));
    }
    if (inc.dW.empty()) return;
    model_->basis->accumulate(inc.dW, inc.dW.size(), spectral);
}

double Integrator::sync_physical(TrajectoryState& s) {
    const Grid& g = *model_->grid;
    g.inverse_unscaled(s.spectral.data(), s.u.data());
    const double scale = 1.0 / static_cast<double>(g.size());
    double* p = reinterpret_cast<double*>(s.u.data());
    double acc = 0.0;
    for (std::size_t i = 0; i < 2 * g.size(); ++i) {
        p[i] *= scale;
        acc += p[i] * p[i];
    }
    return acc * g.dx();
}

void Integrator::check_finite(const TrajectoryState& s, double nsq) const {
    if (!std::isfinite(nsq) || nsq > model_->blowup_norm * model_->blowup_norm) {
        throw BlowUpError("trajectory left the admissible range (||u|| = " + std::to_string(std::sqrt(nsq)) +
                              ") at step " + std::to_string(s.step),
                          s.step);
    }
}

void Integrator::finish_step(TrajectoryState& s, double dt_step) {
    ++s.step;
    s.t = static_cast<double>(s.step) * dt_step;
    check_finite(s, sync_physical(s));
    if (!track_energy_) return;
    const EnergySample next = energy_sample(s);
    if (s.last) {
        const double h = 0.5 * (next.t - s.last->t);
        s.int_h1 += h * (s.last->h1_sq + next.h1_sq);
        s.int_psi_h1 += h * (s.last->psi_h1_sq + next.psi_h1_sq);
        s.int_psi_hat += h * (s.last->psi_norm_sq + s.last->psi_grad_sq + next.psi_norm_sq + next.psi_grad_sq);
    }
    s.last = next;
}

void Integrator::step(TrajectoryState& s, const WienerIncrement& inc) {
    const auto& p = model_->params;
    const double dt = model_->dt;
    const auto& E = prop_->damp;
    const bool forced = !prop_->h_hat.empty();
    const std::size_t n = s.spectral.size();
    if (p.alpha == cplx{}) {
        for (std::size_t i = 0; i < n; ++i) {
            const cplx f = forced ? prop_->h_hat[i] : cplx{};
            s.spectral[i] = E[i] * (s.spectral[i] + dt * f);
        }
    } else {
        nonlinear_hat(s, buf_b_);
        for (std::size_t i = 0; i < n; ++i) {
            const cplx f = (forced ? prop_->h_hat[i] : cplx{}) - buf_b_[i];
            s.spectral[i] = E[i] * (s.spectral[i] + dt * f);
        }
    }
    add_noise(s.spectral, inc);
    finish_step(s, dt);
}

void Integrator::step_heat(TrajectoryState& s) {
    const auto& E = prop_->damp;
    for (std::size_t i = 0; i < s.spectral.size(); ++i) s.spectral[i] *= E[i];
    finish_step(s, model_->dt);
}

namespace {

void require_aligned(const TrajectoryState& u, const TrajectoryState& v) {
    if (u.step != v.step || std::abs(u.t - v.t) > 1e-12 * std::max(1.0, std::abs(u.t))) {
        throw StructuralError("coupled states are not time-aligned (t_u = " + std::to_string(u.t) +
                              ", t_v = " + std::to_string(v.t) + ")");
    }
}

}  // namespace

void Integrator::step_controlled(const TrajectoryState& u, TrajectoryState& v, const WienerIncrement& inc,
                                 const Projector& proj, std::span<cplx> control) {
    require_aligned(u, v);
    const std::size_t n = v.spectral.size();
    if (!control.empty() && control.size() != n) throw StructuralError("control buffer has the wrong size");
    const auto& p = model_->params;
    const bool nonlinear = p.alpha != cplx{};
    if (nonlinear) {
        nonlinear_hat(u, buf_b_);
        nonlinear_hat(v, buf_c_);
    } else {
        std::fill(buf_b_.begin(), buf_b_.end(), cplx{});
        std::fill(buf_c_.begin(), buf_c_.end(), cplx{});
    }
    const auto& nk2 = prop_->nu_k2;
    for (std::size_t i = 0; i < n; ++i) buf_d_[i] = buf_b_[i] - buf_c_[i] + nk2[i] * (u.spectral[i] - v.spectral[i]);
    proj.apply(buf_d_, buf_d_);

    const double dt = model_->dt;
    const auto& E = prop_->damp;
    const bool forced = !prop_->h_hat.empty();
    for (std::size_t i = 0; i < n; ++i) {
        const cplx f = (forced ? prop_->h_hat[i] : cplx{}) - buf_c_[i] - buf_d_[i];
        v.spectral[i] = E[i] * (v.spectral[i] + dt * f);
    }
    if (!control.empty()) {
        for (std::size_t i = 0; i < n; ++i) control[i] = buf_d_[i];
    }
    add_noise(v.spectral, inc);
    finish_step(v, dt);
}

void Integrator::step_pair(TrajectoryState& u, TrajectoryState& v, const WienerIncrement& inc,
                           const Projector& proj, std::span<cplx> control) {
    require_aligned(u, v);
    const std::size_t n = v.spectral.size();
    if (!control.empty() && control.size() != n) throw StructuralError("control buffer has the wrong size");
    const auto& p = model_->params;
    if (p.alpha != cplx{}) {
        nonlinear_hat(u, buf_b_);
        nonlinear_hat(v, buf_c_);
    } else {
        std::fill(buf_b_.begin(), buf_b_.end(), cplx{});
        std::fill(buf_c_.begin(), buf_c_.end(), cplx{});
    }
    const auto& nk2 = prop_->nu_k2;
    for (std::size_t i = 0; i < n; ++i) buf_d_[i] = buf_b_[i] - buf_c_[i] + nk2[i] * (u.spectral[i] - v.spectral[i]);
    proj.apply(buf_d_, buf_d_);

    const double dt = model_->dt;
    const auto& E = prop_->damp;
    const bool forced = !prop_->h_hat.empty();
    for (std::size_t i = 0; i < n; ++i) {
        const cplx h = forced ? prop_->h_hat[i] : cplx{};
        u.spectral[i] = E[i] * (u.spectral[i] + dt * (h - buf_b_[i]));
        v.spectral[i] = E[i] * (v.spectral[i] + dt * (h - buf_c_[i] - buf_d_[i]));
    }
    if (!control.empty()) {
        for (std::size_t i = 0; i < n; ++i) control[i] = buf_d_[i];
    }
    add_noise(u.spectral, inc);
    add_noise(v.spectral, inc);
    finish_step(u, dt);
    finish_step(v, dt);
}

void Integrator::update_decay(std::uint64_t step, double t) {
    if (decay_step_index_ && *decay_step_index_ == step) return;
    const auto& phi = weights_.phi();
    if (decay_step_index_ && *decay_step_index_ + 1 == step) {
        for (std::size_t i = 0; i < decay_.size(); ++i) decay_[i] *= decay_step_[i];
    } else {
        for (std::size_t i = 0; i < decay_.size(); ++i) decay_[i] = std::exp(-t / phi[i]);
    }
    decay_step_index_ = step;
}

EnergySample Integrator::energy_sample(const TrajectoryState& s) {
    const Grid& g = *model_->grid;
    const std::size_t n = g.size();
    EnergySample out;
    out.t = s.t;
    out.norm_sq = spectral_norm_sq(g, s.spectral);
    out.h1_sq = spectral_h1_norm_sq(g, s.spectral);

    const auto k = g.wavenumbers();
    for (std::size_t i = 0; i < n; ++i) buf_c_[i] = cplx{0.0, k[i]} * s.spectral[i];
    buf_c_[n / 2] = 0.0;
    g.inverse(buf_c_.data(), buf_a_.data());  // u_x

    // psi depends on t only through exp(-t/phi); step-indexed caching keeps it cheap.
    if (s.t == static_cast<double>(s.step) * model_->dt) {
        update_decay(s.step, s.t);
    } else {
        const auto& phi = weights_.phi();
        for (std::size_t i = 0; i < n; ++i) decay_[i] = std::exp(-s.t / phi[i]);
        decay_step_index_.reset();
    }
    weights_.psi_from_decay(s.t, decay_, psi_, psi_x_);

    double psi_u = 0.0, d_psi_u = 0.0, psi_ux = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const cplx ui = s.u[i];
        const cplx uxi = buf_a_[i];
        psi_u += psi_[i] * psi_[i] * abs2(ui);
        d_psi_u += abs2(psi_x_[i] * ui + psi_[i] * uxi);
        psi_ux += psi_[i] * psi_[i] * abs2(uxi);
    }
    const double dx = g.dx();
    out.psi_norm_sq = psi_u * dx;
    out.psi_h1_sq = (psi_u + d_psi_u) * dx;
    out.psi_grad_sq = psi_ux * dx;
    return out;
}

double Integrator::weighted_energy(const TrajectoryState& s) const {
    if (!s.last) throw PreconditionError("weighted energy needs energy tracking from the initial state");
    return s.last->norm_sq + s.last->psi_norm_sq + model_->params.dissipation() * (s.int_h1 + s.int_psi_h1);
}

void step_cgl(TrajectoryState& s, const Model& model, const WienerIncrement& inc) {
    Integrator integ(model);
    integ.set_energy_tracking(s.last.has_value());
    integ.step(s, inc);
}

void step_heat(TrajectoryState& s, const Model& model) {
    Integrator integ(model);
    integ.set_energy_tracking(s.last.has_value());
    integ.step_heat(s);
}

void step_controlled(const TrajectoryState& u, TrajectoryState& v, const Model& model,
                     const WienerIncrement& inc, std::size_t N) {
    Integrator integ(model);
    integ.set_energy_tracking(v.last.has_value());
    const Projector proj(*model.basis, N);
    integ.step_controlled(u, v, inc, proj);
}

}  // namespace cglmix
