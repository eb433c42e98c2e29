#include "cglmix/grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <numbers>
#include <string>

#include "cglmix/errors.hpp"

namespace cglmix {

namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace

GridPtr Grid::make(double half_width, std::size_t n) {
    return GridPtr(new Grid(half_width, n));
}

Grid::Grid(double half_width, std::size_t n) : half_width_(half_width), n_(n) {
    if (!(half_width > 0.0) || !std::isfinite(half_width)) {
        throw DomainError("grid half width must be positive and finite");
    }
    if (!is_power_of_two(n) || n < 64) {
        throw DomainError("grid size must be a power of two and at least 64, got " +
                          std::to_string(n));
    }
    dx_ = 2.0 * half_width / static_cast<double>(n);
    k_.resize(n);
    k2_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double k = std::numbers::pi * mode_of_index(i) / half_width;
        k_[i] = k;
        k2_[i] = k * k;
    }

    std::lock_guard lock(fftw_planner_mutex());
    CVector a_buf(n), b_buf(n);
    auto* a = reinterpret_cast<fftw_complex*>(a_buf.data());
    auto* b = reinterpret_cast<fftw_complex*>(b_buf.data());
    // FFTW_ESTIMATE keeps the chosen algorithm, and therefore every rounding
    // pattern, identical from run to run.
    const unsigned flags = FFTW_ESTIMATE;
    plan_forward_ = fftw_plan_dft_1d(static_cast<int>(n), a, b, FFTW_FORWARD, flags);
    plan_inverse_ = fftw_plan_dft_1d(static_cast<int>(n), a, b, FFTW_BACKWARD, flags);
}

Grid::~Grid() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(plan_forward_));
    fftw_destroy_plan(static_cast<fftw_plan>(plan_inverse_));
}

int Grid::mode_of_index(std::size_t i) const noexcept {
    const auto half = n_ / 2;
    return i < half ? static_cast<int>(i) : static_cast<int>(i) - static_cast<int>(n_);
}

std::size_t Grid::index_of_mode(int m) const {
    const int half = static_cast<int>(n_ / 2);
    if (m < -half || m >= half) {
        throw DomainError("mode index " + std::to_string(m) + " outside the grid band");
    }
    return m >= 0 ? static_cast<std::size_t>(m) : static_cast<std::size_t>(m + static_cast<int>(n_));
}

namespace {

bool aligned(const cplx* p) {
    return reinterpret_cast<std::uintptr_t>(p) % AlignedAllocator<cplx>::kAlignment == 0;
}

void execute(void* plan, std::size_t n, const cplx* in, cplx* out) {
    auto* p = static_cast<fftw_plan>(plan);
    if (aligned(in) && aligned(out)) {
        fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                         reinterpret_cast<fftw_complex*>(out));
        return;
    }
    thread_local CVector stage_in, stage_out;
    stage_in.assign(in, in + n);
    stage_out.resize(n);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(stage_in.data()),
                     reinterpret_cast<fftw_complex*>(stage_out.data()));
    std::copy(stage_out.begin(), stage_out.end(), out);
}

}  // namespace

void Grid::forward(const cplx* in, cplx* out) const { execute(plan_forward_, n_, in, out); }

void Grid::inverse_unscaled(const cplx* in, cplx* out) const { execute(plan_inverse_, n_, in, out); }

void Grid::inverse(const cplx* in, cplx* out) const {
    execute(plan_inverse_, n_, in, out);
    const double scale = 1.0 / static_cast<double>(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] *= scale;
}

Field::Field(GridPtr grid) : grid_(std::move(grid)) {
    if (!grid_) throw StructuralError("field requires a grid");
    data_.assign(grid_->size(), cplx{});
}

Field::Field(GridPtr grid, CVector samples)
    : grid_(std::move(grid)), data_(std::move(samples)) {
    if (!grid_) throw StructuralError("field requires a grid");
    if (data_.size() != grid_->size()) {
        throw StructuralError("field has " + std::to_string(data_.size()) +
                              " samples but the grid has " + std::to_string(grid_->size()));
    }
    if (!all_finite()) throw DomainError("field samples must be finite");
}

Field::Field(GridPtr grid, std::span<const cplx> samples)
    : Field(std::move(grid), CVector(samples.begin(), samples.end())) {}

bool Field::all_finite() const noexcept {
    for (const auto& z : data_) {
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    }
    return true;
}

Field& Field::operator+=(const Field& other) {
    require_same_grid(*this, other);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Field& Field::operator-=(const Field& other) {
    require_same_grid(*this, other);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Field& Field::operator*=(double s) noexcept {
    for (auto& z : data_) z *= s;
    return *this;
}

Field& Field::operator*=(cplx s) noexcept {
    for (auto& z : data_) z *= s;
    return *this;
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(double s, Field a) { return a *= s; }
Field operator*(cplx s, Field a) { return a *= s; }

void require_same_grid(const Field& f, const Field& g) {
    if (!f.grid().equivalent(g.grid())) {
        throw StructuralError("fields live on different grids");
    }
}

double inner(const Field& f, const Field& g) {
    require_same_grid(f, g);
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        acc += f[i].real() * g[i].real() + f[i].imag() * g[i].imag();
    }
    return acc * f.grid().dx();
}

double norm_sq(const Field& f) { return inner(f, f); }

double l2_norm(const Field& f) { return std::sqrt(norm_sq(f)); }

CVector to_spectral(const Field& f) {
    CVector out(f.size());
    f.grid().forward(f.data(), out.data());
    return out;
}

Field from_spectral(const GridPtr& grid, std::span<const cplx> spectral) {
    if (spectral.size() != grid->size()) {
        throw StructuralError("spectral array size does not match the grid");
    }
    CVector out(grid->size());
    grid->inverse(spectral.data(), out.data());
    return Field(grid, std::move(out));
}

double spectral_norm_sq(const Grid& grid, std::span<const cplx> spectral) {
    double acc = 0.0;
    for (const auto& c : spectral) acc += abs2(c);
    return acc * grid.dx() / static_cast<double>(grid.size());
}

double spectral_h1_norm_sq(const Grid& grid, std::span<const cplx> spectral) {
    const auto k2 = grid.wavenumbers_sq();
    double acc = 0.0;
    for (std::size_t i = 0; i < spectral.size(); ++i) acc += (1.0 + k2[i]) * abs2(spectral[i]);
    return acc * grid.dx() / static_cast<double>(grid.size());
}

double spectral_sobolev_norm_sq(const Grid& grid, std::span<const cplx> spectral, double s) {
    const auto k2 = grid.wavenumbers_sq();
    double acc = 0.0;
    for (std::size_t i = 0; i < spectral.size(); ++i) {
        acc += std::pow(1.0 + k2[i], s) * abs2(spectral[i]);
    }
    return acc * grid.dx() / static_cast<double>(grid.size());
}

double sobolev_norm(const Field& f, double s) {
    if (!(s >= -2.0 && s <= 2.0)) throw DomainError("Sobolev index must lie in [-2, 2]");
    if (!f.all_finite()) throw DomainError("Sobolev norm of a non-finite field");
    const auto spec = to_spectral(f);
    if (s == 0.0) return std::sqrt(spectral_norm_sq(f.grid(), spec));
    return std::sqrt(spectral_sobolev_norm_sq(f.grid(), spec, s));
}

Field derivative(const Field& f) {
    auto spec = to_spectral(f);
    const auto k = f.grid().wavenumbers();
    const std::size_t nyquist = f.size() / 2;
    for (std::size_t i = 0; i < spec.size(); ++i) {
        spec[i] = (i == nyquist) ? cplx{} : cplx{0.0, k[i]} * spec[i];
    }
    return from_spectral(f.grid_ptr(), spec);
}

}  // namespace cglmix
