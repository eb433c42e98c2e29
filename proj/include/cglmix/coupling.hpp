#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "cglmix/functionals.hpp"
#include "cglmix/stats.hpp"

namespace cglmix {

struct PairSample {
    double t = 0.0;
    double w_norm_sq = 0.0;   // ||u - v||^2
    double pw_norm_sq = 0.0;  // ||P_N (u - v)||^2
    double u_norm_sq = 0.0;
    double v_norm_sq = 0.0;
    double int_A_sq = 0.0;
};

struct CouplingOptions {
    std::uint64_t steps = 0;
    std::uint64_t sample_every = 100;
    /// When set, tau = tau^u ^ tau^v is detected online on the step grid and
    /// both trajectories follow the heat flow afterwards (the control stops).
    std::optional<StoppingParams> stopping;
};

/// A pair (u, v): u solves the CGL equation from u0, v the controlled
/// equation from u0', both driven by the same noise increments.
struct CouplingState {
    TrajectoryState u;
    TrajectoryState v;
    Field w;  // u - v at the last sample
    double d = 0.0;  // ||u0 - u0'||
    double u0_norm_sq = 0.0;
    double v0_norm_sq = 0.0;
    StoppingTime tau_u;
    StoppingTime tau_v;
    bool truncated = false;
    NovikovLedger ledger;
    std::vector<PairSample> samples;

    CouplingState(TrajectoryState u_, TrajectoryState v_, std::size_t N);
    bool squeeze_failure() const noexcept { return tau_u.triggered || tau_v.triggered; }
};

CouplingState make_coupling(Integrator& integ, const Field& u0, const Field& u0_prime, std::size_t N);

/// Advances the pair by options.steps steps under shared increments drawn
/// from `stream`, maintaining w, the ledger and the samples.
void advance_pair(Integrator& integ, CouplingState& cs, const Projector& proj, const StreamKey& stream,
                  const CouplingOptions& options);

struct SqueezeFit {
    double c = 0.0;        // median exp(intercept)
    double c_prime = 0.0;  // median decay rate
    double success_fraction = 0.0;  // fraction of paths with negative fitted slope
    std::vector<double> rates;
    std::vector<double> intercepts;
    double rate_q1 = 0.0;
    double rate_q3 = 0.0;
};

/// Per-path least squares of log(||w(t)||^2 / d^2) against t over the
/// samples with t in [t_min, t_max]. Throws DomainError for an empty ensemble.
SqueezeFit fit_squeeze_rate(std::span<const CouplingState> ensemble, double t_min = 0.0,
                            double t_max = std::numeric_limits<double>::infinity());
LinearFit fit_path_squeeze(const CouplingState& cs, double t_min = 0.0,
                           double t_max = std::numeric_limits<double>::infinity());

/// First step time at which both ||u|| <= d_ball and ||u'|| <= d_ball, for
/// two independently driven CGL trajectories; sentinel past the horizon.
StoppingTime recurrence_time(Integrator& integ, const Field& u0, const Field& u0_prime, double d_ball,
                             std::uint64_t steps, const StreamKey& stream_u, const StreamKey& stream_u_prime);

struct HittingEstimate {
    double probability = 0.0;
    Interval ci95;
    std::size_t hits = 0;
    std::size_t paths = 0;
};

/// Fraction of independent paths with ||u(T)|| < d_ball. Needs at least
/// 100 paths.
HittingEstimate hitting_probability(const Model& model, const Field& u0, double d_ball, double T,
                                    std::size_t ensemble_size, std::uint64_t seed, unsigned workers);

/// Per-pair summary row.
struct PairSummary {
    std::uint64_t path = 0;
    double d = 0.0;
    std::size_t N = 0;
    double c_prime = 0.0;
    double intercept = 0.0;
    bool success = false;  // ||w(T)||^2 / d^2 <= exp(-a T / 4)
    double w_ratio = 0.0;  // ||w(T)||^2 / d^2
    StoppingTime tau_u;
    StoppingTime tau_v;
    double int_A_sq = 0.0;
    double log_rn = 0.0;
};

PairSummary summarize_pair(const CouplingState& cs, std::uint64_t path, const Model& model, double rate_floor);

inline constexpr const char* kPairCsvHeader =
    "path,d,N,c_prime,intercept,success,w_ratio,tau_u,tau_u_triggered,tau_v,tau_v_triggered,int_A_sq,log_rn";

void write_pair_csv(std::ostream& os, std::span<const PairSummary> rows);
void write_pair_jsonl(std::ostream& os, std::span<const PairSummary> rows);

}  // namespace cglmix
