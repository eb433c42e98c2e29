#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <new>
#include <span>
#include <vector>

namespace cglmix {

using cplx = std::complex<double>;

/// Cache-line aligned storage, so every transform runs through the same
/// SIMD plan regardless of where the allocator placed the data.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::size_t kAlignment = 64;

    AlignedAllocator() noexcept = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{kAlignment}));
    }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t{kAlignment}); }

    template <class U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using CVector = std::vector<cplx, AlignedAllocator<cplx>>;

/// |z|^2 without the hypot round trip of std::norm.
inline double abs2(cplx z) noexcept { return z.real() * z.real() + z.imag() * z.imag(); }

class Grid;
using GridPtr = std::shared_ptr<const Grid>;

/// Periodic interval [-X, X) sampled at n equispaced nodes, together with the
/// discrete Fourier machinery for it.
///
/// Spectral arrays use the FFTW ordering: index i holds the mode with signed
/// index m = i for i < n/2 and m = i - n otherwise, at wavenumber k = pi m / X.
/// The entry i = n/2 is the single Nyquist mode (m = -n/2).
class Grid {
public:
    static GridPtr make(double half_width, std::size_t n);

    ~Grid();
    Grid(const Grid&) = delete;
    Grid& operator=(const Grid&) = delete;

    double half_width() const noexcept { return half_width_; }
    std::size_t size() const noexcept { return n_; }
    double dx() const noexcept { return dx_; }
    double length() const noexcept { return 2.0 * half_width_; }
    double x(std::size_t i) const noexcept { return -half_width_ + dx_ * static_cast<double>(i); }

    std::span<const double> wavenumbers() const noexcept { return k_; }
    std::span<const double> wavenumbers_sq() const noexcept { return k2_; }

    int mode_of_index(std::size_t i) const noexcept;
    std::size_t index_of_mode(int m) const;

    /// Unnormalized forward DFT, F_m = sum_i f_i exp(-2 pi i m i / n).
    /// `in` and `out` must not alias. Misaligned arrays are staged through
    /// aligned scratch, so results never depend on the caller's alignment.
    void forward(const cplx* in, cplx* out) const;
    /// Inverse DFT including the 1/n factor. `in` and `out` must not alias.
    void inverse(const cplx* in, cplx* out) const;
    /// Inverse DFT without the 1/n factor.
    void inverse_unscaled(const cplx* in, cplx* out) const;

    bool equivalent(const Grid& other) const noexcept {
        return this == &other || (n_ == other.n_ && half_width_ == other.half_width_);
    }

private:
    Grid(double half_width, std::size_t n);

    double half_width_;
    std::size_t n_;
    double dx_;
    std::vector<double> k_;
    std::vector<double> k2_;
    void* plan_forward_ = nullptr;
    void* plan_inverse_ = nullptr;
};

/// Complex-valued grid function.
class Field {
public:
    explicit Field(GridPtr grid);
    Field(GridPtr grid, CVector samples);
    Field(GridPtr grid, std::span<const cplx> samples);

    const Grid& grid() const noexcept { return *grid_; }
    const GridPtr& grid_ptr() const noexcept { return grid_; }
    std::size_t size() const noexcept { return data_.size(); }

    cplx operator[](std::size_t i) const noexcept { return data_[i]; }
    cplx& operator[](std::size_t i) noexcept { return data_[i]; }
    cplx* data() noexcept { return data_.data(); }
    const cplx* data() const noexcept { return data_.data(); }
    std::span<const cplx> samples() const noexcept { return data_; }
    std::span<cplx> samples() noexcept { return data_; }

    bool all_finite() const noexcept;

    Field& operator+=(const Field& other);
    Field& operator-=(const Field& other);
    Field& operator*=(double s) noexcept;
    Field& operator*=(cplx s) noexcept;

private:
    GridPtr grid_;
    CVector data_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(double s, Field a);
Field operator*(cplx s, Field a);

void require_same_grid(const Field& f, const Field& g);

/// Re sum_i f_i conj(g_i) dx, the discrete form of Re \int f conj(g).
double inner(const Field& f, const Field& g);
double norm_sq(const Field& f);
double l2_norm(const Field& f);

/// H^s norm through the multiplier (1 + k^2)^{s/2}; s must lie in [-2, 2].
double sobolev_norm(const Field& f, double s);

CVector to_spectral(const Field& f);
Field from_spectral(const GridPtr& grid, std::span<const cplx> spectral);

// Norms evaluated directly on spectral coefficients (Parseval).
double spectral_norm_sq(const Grid& grid, std::span<const cplx> spectral);
double spectral_h1_norm_sq(const Grid& grid, std::span<const cplx> spectral);
double spectral_sobolev_norm_sq(const Grid& grid, std::span<const cplx> spectral, double s);

/// Spectral first derivative; the Nyquist coefficient is dropped.
Field derivative(const Field& f);

}  // namespace cglmix
