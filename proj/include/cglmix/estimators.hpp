#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cglmix/functionals.hpp"
#include "cglmix/stats.hpp"

namespace cglmix {

/// Seeds and parallelism shared by the ensemble estimators. Path i always
/// draws from stream_for(seed, i, channel), so results do not depend on the
/// number of workers.
struct EnsembleOptions {
    std::size_t paths = 0;
    std::uint64_t seed = 0;
    unsigned workers = 1;
};

/// C' = (1/a)(||h||^2 / a + B1).
double moment_constant(const Model& model);

struct MomentReport {
    std::vector<double> times;
    std::vector<double> mean;  // empirical E ||u(t)||^2
    std::vector<double> se;
    std::vector<double> bound;  // e^{-a t} ||u0||^2 + C'
    double C_prime = 0.0;
    double u0_norm_sq = 0.0;
    std::size_t paths = 0;
    bool pass = false;  // mean <= bound + 3 SE at every time
};

/// Needs at least 500 paths.
MomentReport check_moment_bound(const Model& model, const Field& u0, std::span<const double> times,
                                const EnsembleOptions& ens);

/// Energy records of independent tracked trajectories sampled every
/// `sample_every` steps up to `horizon`.
std::vector<EnergyRecord> energy_ensemble(const Model& model, const Field& u0, double horizon,
                                          std::uint64_t sample_every, const EnsembleOptions& ens,
                                          std::uint32_t channel = 0);

/// 1.5 times the median least-squares slope of E^psi(t) over a pilot ensemble.
double calibrate_K(std::span<const EnergyRecord> pilot);

struct EnergyTailReport {
    std::vector<double> rho;
    std::vector<double> frequency;  // P{sup_t (E^psi(t) - K t) >= E^psi(0) + C3 ||u0||^2 + rho}
    std::vector<Interval> ci95;
    double K = 0.0;
    double C3 = 0.0;
    double gamma_hat = 0.0;  // -slope of log frequency against rho
    double gamma_r2 = 0.0;
    bool gamma_is_bound = false;  // only one nonzero frequency: gamma_hat is the implied lower bound
    bool monotone = false;
    bool vacuous = false;  // no exceedance at any rho
    bool pass = false;
    std::string warning;
    std::size_t paths = 0;
};

/// Tail frequencies of the weighted-energy growth event. rho_list must be
/// increasing with at least three values.
EnergyTailReport check_energy_tails(std::span<const EnergyRecord> records, double K, double C3,
                                    std::span<const double> rho_list);

struct StoppingTailReport {
    std::vector<double> l;
    std::vector<double> frequency;  // P{l <= tau < horizon}
    std::vector<Interval> ci95;
    double slope = 0.0;  // of log frequency against l
    bool slope_is_bound = false;
    bool monotone = false;
    bool any = false;
    bool pass = false;
    double horizon = 0.0;
    std::string warning;
};

StoppingTailReport check_stopping_tails(std::span<const EnergyRecord> records, const StoppingParams& sp,
                                        std::span<const double> l_list);

/// Bounded test functionals with Lipschitz constant at most 1:
/// u -> tanh(<u, g>) with ||g|| = 1, and u -> exp(-||u - c||^2 / 2).
class TestFamily {
public:
    TestFamily(std::vector<Field> directions, std::vector<Field> centers);

    std::size_t size() const noexcept { return directions_.size() + centers_.size(); }
    void evaluate(const Field& u, std::span<double> out) const;
    double evaluate(const Field& u, std::size_t index) const;

    const std::vector<Field>& directions() const noexcept { return directions_; }
    const std::vector<Field>& centers() const noexcept { return centers_; }

private:
    std::vector<Field> directions_;
    std::vector<Field> centers_;
};

/// Half tanh directions, half Gaussian bumps, drawn from `seed`.
TestFamily make_test_family(const GridPtr& grid, std::size_t size, std::uint64_t seed);

struct MixingReport {
    std::vector<double> times;
    std::vector<double> distance;  // max_F |E_a F(u(t)) - E_b F(u(t))|
    std::vector<double> se;        // standard error of the maximizing difference
    std::vector<std::size_t> argmax;
    double kappa = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t fit_points = 0;
    bool floor_limited = false;  // fewer than three tail points above 2 SE
    double fit_t_min = 0.0;
    double fit_t_max = 0.0;
    std::size_t paths = 0;
    std::size_t family_size = 0;
};

/// Both ensembles use the same per-path noise streams; differences are
/// averaged pathwise, which leaves each expectation unbiased and shrinks the
/// standard error of their difference.
MixingReport estimate_mixing_rate(const Model& model, const Field& u0_a, const Field& u0_b,
                                  std::span<const double> times, const TestFamily& family,
                                  const EnsembleOptions& ens, double fit_t_min, double fit_t_max);

/// e^{-(a + nu k^2) t} and b_j^2 (1 - e^{-2 (a + nu_1 k^2) t}) / (2 (a + nu_1 k^2))
/// for basis element j (zero-based). Requires alpha = 0.
struct OuMoments {
    cplx mean_factor;
    double variance = 0.0;
};
OuMoments ou_oracle(const PhysParams& params, const NoiseSpec& spec, const TrigBasis& basis, std::size_t j,
                    double t);

}  // namespace cglmix
