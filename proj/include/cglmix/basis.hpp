#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cglmix/grid.hpp"

namespace cglmix {

/// One element of the real trigonometric basis of L^2([-X, X); C), viewed as
/// a real Hilbert space with <u, v> = Re \int u conj(v). Each trigonometric
/// profile appears twice, once real-valued and once multiplied by i, so the
/// family spans complex fields.
struct TrigMode {
    enum class Profile { Constant, Cos, Sin };
    Profile profile;
    int m;           // wavenumber index, k = pi m / X
    bool imaginary;  // true for i * profile
    double k;
    double amplitude;  // 1/sqrt(2X) for the constant, 1/sqrt(X) otherwise
};

/// Orthonormal basis {e_j}, ordered by increasing |k|:
///   e_1 = c0, e_2 = i c0, then for m = 1, 2, ...:
///   cos(k_m x)/sqrt(X), i cos(k_m x)/sqrt(X), sin(k_m x)/sqrt(X), i sin(k_m x)/sqrt(X).
class TrigBasis {
public:
    TrigBasis(GridPtr grid, std::size_t count);

    const Grid& grid() const noexcept { return *grid_; }
    const GridPtr& grid_ptr() const noexcept { return grid_; }
    std::size_t size() const noexcept { return modes_.size(); }
    const TrigMode& mode(std::size_t j) const { return modes_.at(j); }  // zero-based
    const std::vector<TrigMode>& modes() const noexcept { return modes_; }

    /// Physical samples of e_{j+1} (zero-based j).
    const Field& field(std::size_t j) const { return fields_.at(j); }
    const std::vector<Field>& fields() const noexcept { return fields_; }

    /// Coordinates <f, e_j> for j < count, computed from the FFT of f.
    void coordinates(std::span<const cplx> spectral, std::size_t count,
                     std::span<double> out) const;
    /// Adds sum_{j<count} c_j e_j, in spectral form, onto `spectral`.
    void accumulate(std::span<const double> coords, std::size_t count,
                    std::span<cplx> spectral) const;

    /// Largest wavenumber index used by the first `count` elements.
    int max_mode(std::size_t count) const;

private:
    GridPtr grid_;
    std::vector<TrigMode> modes_;
    std::vector<Field> fields_;
};

/// Returns the first M basis functions; M must stay below n/2 - 1.
TrigBasis make_basis(const GridPtr& grid, std::size_t M);

/// Orthogonal projection P_N onto span{e_1, ..., e_N} and its complement.
/// Since each retained profile is an eigenfunction of d^2/dx^2 shared by the
/// +k and -k Fourier coefficients, P_N commutes with every even Fourier
/// multiplier, and it acts directly on spectral arrays.
class Projector {
public:
    Projector(const TrigBasis& basis, std::size_t N);

    std::size_t rank() const noexcept { return N_; }
    const TrigBasis& basis() const noexcept { return *basis_; }

    /// out = P_N in (spectral). `in` and `out` may be the same array.
    void apply(std::span<const cplx> in, std::span<cplx> out) const;
    void apply_complement(std::span<const cplx> in, std::span<cplx> out) const;

    /// Visits every spectral index that P_N can make nonzero.
    template <class F>
    void for_each_support_index(F&& f) const {
        for (auto i : support_) f(i);
    }

private:
    struct Group {
        int m;
        bool keep[4];  // cos-re, cos-im, sin-re, sin-im (constant: re, im)
    };
    const TrigBasis* basis_;
    std::size_t N_;
    std::vector<Group> groups_;
    std::vector<std::size_t> support_;
};

Field project_PN(const Field& f, const TrigBasis& basis, std::size_t N);
Field project_QN(const Field& f, const TrigBasis& basis, std::size_t N);

/// max over samples of ||Q_N (chi_A f)|| / ||f||_{H^s}, an empirical lower
/// estimate of the smallest epsilon with ||Q_N chi_A f|| <= epsilon ||f||_{H^s}.
/// Requires a nonempty sample set, s in (0, 2] and nonzero samples.
double truncated_poincare_epsilon(const TrigBasis& basis, std::size_t N, double A, double s,
                                  const std::vector<Field>& samples);

}  // namespace cglmix
