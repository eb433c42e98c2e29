#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "cglmix/dynamics.hpp"

namespace cglmix {

/// Energy functionals along a sampled trajectory:
///   E(t)     = ||u||^2 + (a ^ nu_1) int_0^t ||u||_{H^1}^2
///   Ehat(t)  = ||psi u||^2 + (a ^ nu_1) int_0^t (||psi u||^2 + ||psi u_x||^2)
///   Epsi(t)  = ||u||^2 + ||psi u||^2 + (a ^ nu_1) int_0^t (||u||_{H^1}^2 + ||psi u||_{H^1}^2)
/// with trapezoidal quadrature between samples.
struct EnergyRecord {
    std::vector<double> t;
    std::vector<double> E;
    std::vector<double> E_hat;
    std::vector<double> E_psi;
    std::vector<double> norm_sq;
    std::vector<double> psi_norm_sq;
    std::vector<double> int_h1;      // int ||u||_{H^1}^2
    std::vector<double> int_psi_h1;  // int ||psi u||_{H^1}^2
    double dissipation = 0.0;

    std::size_t size() const noexcept { return t.size(); }
    double initial_norm_sq() const { return norm_sq.at(0); }
};

EnergyRecord energy_psi(std::span<const EnergySample> samples, double dissipation);

/// Appends the current functionals of a tracked trajectory, read from its
/// running step-grid accumulators.
void record_energy(EnergyRecord& record, const TrajectoryState& s, double dissipation);

struct StoppingParams {
    double K = 1.0;
    double L = 1.0;
    double M = 4.0;
    double rho = 4.0;

    /// (K + L) t + rho + M ||u(0)||^2.
    double threshold(double t, double u0_norm_sq) const noexcept { return (K + L) * t + rho + M * u0_norm_sq; }
};

/// Throws DomainError unless K, rho > 0 and L, M >= 0.
void validate(const StoppingParams& sp);

/// First sample time with Epsi(t) >= threshold. When the threshold is never
/// met inside the record, `triggered` is false and `time` is the sentinel
/// horizon + 1; that means "not within the horizon", not a proven infinity.
struct StoppingTime {
    bool triggered = false;
    double time = std::numeric_limits<double>::infinity();
    std::size_t index = 0;  // sample index when triggered

    bool operator<(double t) const noexcept { return triggered && time < t; }
};

StoppingTime stopping_tau(const EnergyRecord& record, const StoppingParams& sp);
StoppingTime stopping_sentinel(double horizon);

/// Running Novikov / Girsanov quantities for the control A(t). Coordinates
/// a_j = <A(t), e_j>, j < N, are recorded at sample times (trapezoid for
/// int ||A||^2) and at the left end of every noise increment (Ito sums).
class NovikovLedger {
public:
    explicit NovikovLedger(std::size_t N);

    std::size_t rank() const noexcept { return N_; }

    /// Adds a sample of A at time t to the int ||A||^2 quadrature.
    void add_sample(double t, std::span<const double> coords);
    /// Adds one Ito step: sum_j a_j g_j sqrt(dt) and sum_j a_j^2 dt, per mode.
    void add_increment(std::span<const double> coords, std::span<const double> g, double dt);

    double integral_A_sq() const noexcept { return int_A_sq_; }
    double first_time() const noexcept { return first_t_; }
    double last_time() const noexcept { return last_t_; }
    std::span<const double> ito_sums() const noexcept { return ito_; }
    std::span<const double> quadratic_sums() const noexcept { return quad_; }
    bool empty() const noexcept { return !has_last_; }

    /// Concatenation of ledgers over adjacent intervals; the second must start
    /// where this one ends.
    void append(const NovikovLedger& later);

private:
    std::size_t N_;
    double int_A_sq_ = 0.0;
    double first_t_ = 0.0;
    double last_t_ = 0.0;
    double last_A_sq_ = 0.0;
    bool has_last_ = false;
    std::vector<double> ito_;
    std::vector<double> quad_;
};

/// -1_{t <= tau} P_N[alpha(|u|^q u - |v|^q v) - nu (u - v)_xx], or the zero
/// field when t > tau.
Field novikov_integrand(const TrajectoryState& u, const TrajectoryState& v, const Model& model,
                        const Projector& proj, const StoppingTime& tau);

/// Coordinates <A, e_j>, j < N, of a spectral array.
void control_coordinates(const TrigBasis& basis, std::span<const cplx> A_hat, std::size_t N,
                         std::span<double> out);

/// sum_j (1/b_j) int a_j dbeta_j - 1/2 sum_j (1/b_j^2) int a_j^2 dt.
/// Throws PreconditionError when some b_j with j <= N vanishes.
double girsanov_log_density(const NovikovLedger& ledger, const NoiseSpec& spec);

/// One output row: time, E, Ehat, Epsi, int ||A||^2, log density.
struct FunctionalRow {
    double t = 0.0;
    double E = 0.0;
    double E_hat = 0.0;
    double E_psi = 0.0;
    double int_A_sq = 0.0;
    double log_rn = 0.0;
};

inline constexpr const char* kFunctionalCsvHeader = "time,E,E_hat,E_psi,int_A_sq,log_rn";

void write_functionals_csv(std::ostream& os, std::span<const FunctionalRow> rows);
std::vector<FunctionalRow> read_functionals_csv(std::istream& is);

}  // namespace cglmix
