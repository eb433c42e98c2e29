#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "cglmix/basis.hpp"
#include "cglmix/noise.hpp"
#include "cglmix/weights.hpp"

namespace cglmix {

/// Coefficients of du/dt + a u - nu u_xx + alpha |u|^q u = h + eta.
struct PhysParams {
    double a = 1.0;
    cplx nu{1.0, 0.5};
    cplx alpha{1.0, 1.0};
    double q = 1.0;
    std::optional<Field> h;  // absent means h = 0

    double dissipation() const noexcept { return std::min(a, nu.real()); }  // a ^ nu_1
    double h_norm_sq() const { return h ? norm_sq(*h) : 0.0; }
};

/// Throws DomainError naming the first violated coefficient range.
void validate(const PhysParams& params);

/// Everything shared, read-only, by the trajectories of one experiment.
struct Model {
    GridPtr grid;
    PhysParams params;
    std::shared_ptr<const TrigBasis> basis;
    NoiseSpec noise;
    double dt = 1e-3;
    bool dealias = false;
    double blowup_norm = 1e6;
};

/// Precomputed per-mode factors of the linear flow over one step.
struct Propagator {
    Propagator(const Grid& grid, const PhysParams& params, double dt);
    CVector damp;   // exp(-(a + nu k^2) dt)
    CVector nu_k2;  // symbol of -nu d^2/dx^2
    CVector h_hat;
    std::size_t dealias_cutoff;  // |m| above this is zeroed when dealiasing
};

/// Weighted-energy ingredients at one time.
struct EnergySample {
    double t = 0.0;
    double norm_sq = 0.0;       // ||u||^2
    double h1_sq = 0.0;         // ||u||_{H^1}^2
    double psi_norm_sq = 0.0;   // ||psi u||^2
    double psi_h1_sq = 0.0;     // ||psi u||_{H^1}^2
    double psi_grad_sq = 0.0;   // ||psi u_x||^2
};

struct TrajectoryState {
    double t = 0.0;
    std::uint64_t step = 0;
    CVector spectral;
    Field u;

    // Trapezoidal running integrals of ||u||_{H^1}^2, ||psi u||_{H^1}^2 and
    // ||psi u||^2 + ||psi u_x||^2; only advanced while energies are tracked.
    double int_h1 = 0.0;
    double int_psi_h1 = 0.0;
    double int_psi_hat = 0.0;
    std::optional<EnergySample> last;

    explicit TrajectoryState(Field u0);
};

/// Pointwise alpha |u|^q u.
Field nonlinearity(const Field& u, const PhysParams& params);
void nonlinearity_into(std::span<const cplx> u, std::span<cplx> out, cplx alpha, double q) noexcept;

/// Exponential (integrating-factor) Euler-Maruyama stepper:
///   u_hat <- exp(-(a + nu k^2) dt) (u_hat + dt (h - alpha |u|^q u)^) + noise_hat.
/// The linear part is exact, the nonlinearity and force are explicit, and the
/// noise increment is added after propagation. One Integrator per worker; it
/// owns scratch buffers and is not thread-safe.
class Integrator {
public:
    explicit Integrator(const Model& model);
    Integrator(const Model& model, std::shared_ptr<const Propagator> propagator);

    const Model& model() const noexcept { return *model_; }
    const Propagator& propagator() const noexcept { return *prop_; }

    void set_energy_tracking(bool on) noexcept { track_energy_ = on; }
    bool energy_tracking() const noexcept { return track_energy_; }

    TrajectoryState initial_state(const Field& u0);

    void step(TrajectoryState& s, const WienerIncrement& inc);
    void step_heat(TrajectoryState& s);

    /// Advances v (the controlled process) over one step, driven by the same
    /// increment as u. `u` must sit at the same time as `v` and is not moved.
    /// The control P_N[alpha(|u|^q u - |v|^q v) - nu (u - v)_xx] at the step
    /// start is written to `control` (spectral) when given.
    void step_controlled(const TrajectoryState& u, TrajectoryState& v, const WienerIncrement& inc,
                         const Projector& proj, std::span<cplx> control = {});

    /// Fused u/v step sharing the nonlinear evaluations.
    void step_pair(TrajectoryState& u, TrajectoryState& v, const WienerIncrement& inc,
                   const Projector& proj, std::span<cplx> control = {});

    EnergySample energy_sample(const TrajectoryState& s);

    /// E^psi_u(t) from the running accumulators; requires energy tracking.
    double weighted_energy(const TrajectoryState& s) const;

private:
    void finish_step(TrajectoryState& s, double dt_step);
    void nonlinear_hat(const TrajectoryState& s, CVector& out);
    void add_noise(CVector& spectral, const WienerIncrement& inc) const;
    double sync_physical(TrajectoryState& s);  // returns ||u||^2
    void check_finite(const TrajectoryState& s, double norm_sq) const;
    void update_decay(std::uint64_t step, double t);

    const Model* model_;
    std::shared_ptr<const Propagator> prop_;
    WeightTable weights_;
    bool track_energy_ = false;

    CVector buf_a_, buf_b_, buf_c_, buf_d_;
    std::vector<double> decay_, decay_step_, psi_, psi_x_;
    std::optional<std::uint64_t> decay_step_index_;
};

// Single-call forms of the steppers; they build a fresh Integrator each time.
void step_cgl(TrajectoryState& s, const Model& model, const WienerIncrement& inc);
void step_heat(TrajectoryState& s, const Model& model);
void step_controlled(const TrajectoryState& u, TrajectoryState& v, const Model& model,
                     const WienerIncrement& inc, std::size_t N);

/// Follows the CGL flow until `tau_step`, then the heat flow (damped, no
/// noise, no nonlinearity) for the remaining steps. The observer is called
/// after every step with the state. Passing no tau never switches.
template <class Observer>
void evolve_truncated(Integrator& integ, TrajectoryState& s, const StreamKey& stream,
                      std::uint64_t steps, std::optional<std::uint64_t> tau_step, Observer&& observe) {
    const auto& model = integ.model();
    WienerIncrement inc;
    for (std::uint64_t i = 0; i < steps; ++i) {
        if (tau_step && s.step >= *tau_step) {
            integ.step_heat(s);
        } else {
            sample_increment_into(model.noise, model.dt, stream, s.step, inc);
            integ.step(s, inc);
        }
        observe(s);
    }
}

}  // namespace cglmix
