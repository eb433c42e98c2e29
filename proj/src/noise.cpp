#include "cglmix/noise.hpp"

#include <cmath>
#include <string>

#include "cglmix/errors.hpp"
#include "cglmix/weights.hpp"

namespace cglmix {

namespace {

// sum_{n >= first} n^{-s}, s > 1, by direct summation plus an Euler-Maclaurin tail.
double zeta_tail(double s, double first) {
    constexpr int kTerms = 2000;
    double acc = 0.0;
    for (int i = 0; i < kTerms; ++i) acc += std::pow(first + i, -s);
    const double a = first + kTerms;
    acc += std::pow(a, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(a, -s) + s * std::pow(a, -s - 1.0) / 12.0;
    return acc;
}

void fill_constants(NoiseSpec& spec, const TrigBasis& basis) {
    if (spec.M > basis.size()) {
        throw StructuralError("noise uses " + std::to_string(spec.M) + " modes but the basis has " +
                              std::to_string(basis.size()));
    }
    const WeightTable weights(basis.grid_ptr());
    spec.B1 = spec.B2 = spec.B3 = 0.0;
    for (std::size_t j = 0; j < spec.M; ++j) {
        const double b2 = spec.b[j] * spec.b[j];
        const Field& e = basis.field(j);
        Field phi_e = e;
        for (std::size_t i = 0; i < phi_e.size(); ++i) phi_e[i] *= weights.phi()[i];
        spec.B1 += b2;
        spec.B2 += b2 * norm_sq(phi_e);
        spec.B3 += b2 * norm_sq(derivative(e));
    }
}

}  // namespace

NoiseSpec make_coefficients(double b0, double p, std::size_t M, const TrigBasis& basis) {
    if (!(b0 > 0.0)) throw DomainError("noise amplitude b0 must be positive");
    if (!(p > 1.5)) {
        throw DomainError("decay exponent p = " + std::to_string(p) +
                          " makes B3 = sum b_j^2 |k_j|^2 diverge; p > 3/2 is required");
    }
    NoiseSpec spec;
    spec.M = M;
    spec.b0 = b0;
    spec.p = p;
    spec.b.resize(M);
    for (std::size_t j = 1; j <= M; ++j) spec.b[j - 1] = b0 * std::pow(1.0 + static_cast<double>(j), -p);
    fill_constants(spec, basis);
    spec.B1_tail = b0 * b0 * zeta_tail(2.0 * p, static_cast<double>(M) + 2.0);
    return spec;
}

NoiseSpec make_explicit_coefficients(std::vector<double> b, const TrigBasis& basis) {
    for (std::size_t j = 0; j < b.size(); ++j) {
        if (!(b[j] >= 0.0) || !std::isfinite(b[j])) {
            throw DomainError("noise coefficient b_" + std::to_string(j + 1) + " must be finite and >= 0");
        }
    }
    NoiseSpec spec;
    spec.M = b.size();
    spec.b = std::move(b);
    spec.explicit_coefficients = true;
    fill_constants(spec, basis);
    return spec;
}

NoiseSpec make_silent_noise(std::size_t M) {
    NoiseSpec spec;
    spec.M = M;
    spec.b.assign(M, 0.0);
    spec.explicit_coefficients = true;
    return spec;
}

void require_controllable(const NoiseSpec& spec, std::size_t N) {
    if (N > spec.M) {
        throw PreconditionError("control dimension N = " + std::to_string(N) +
                                " exceeds the number of noise modes M = " + std::to_string(spec.M));
    }
    for (std::size_t j = 0; j < N; ++j) {
        if (!(spec.b[j] > 0.0)) {
            throw PreconditionError("noise must act on every controlled mode: b_" + std::to_string(j + 1) +
                                    " = 0 but N = " + std::to_string(N));
        }
    }
}

void sample_increment_into(const NoiseSpec& spec, double dt, const StreamKey& stream,
                           std::uint64_t step, WienerIncrement& out) {
    if (!(dt > 0.0)) throw DomainError("time step must be positive");
    out.dt = dt;
    out.g.resize(spec.M);
    out.dW.resize(spec.M);
    standard_normals(stream, step, out.g);
    const double sq = std::sqrt(dt);
    for (std::size_t j = 0; j < spec.M; ++j) out.dW[j] = spec.b[j] * sq * out.g[j];
}

WienerIncrement sample_increment(const NoiseSpec& spec, double dt, const StreamKey& stream,
                                 std::uint64_t step) {
    WienerIncrement inc;
    sample_increment_into(spec, dt, stream, step, inc);
    return inc;
}

Field assemble_noise_field(const WienerIncrement& increment, const TrigBasis& basis) {
    if (increment.dW.size() > basis.size()) {
        throw StructuralError("increment has more modes than the basis");
    }
    Field out(basis.grid_ptr());
    for (std::size_t j = 0; j < increment.dW.size(); ++j) {
        const double c = increment.dW[j];
        if (c == 0.0) continue;
        const Field& e = basis.field(j);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += c * e[i];
    }
    return out;
}

}  // namespace cglmix
