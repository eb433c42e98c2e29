#include "cglmix/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cglmix/errors.hpp"

namespace cglmix {

namespace {

struct Slot {
    int m;
    int slot;  // 0..3 within the wavenumber group
};

Slot slot_of(std::size_t j) {
    if (j < 2) return {0, static_cast<int>(j)};
    return {static_cast<int>((j - 2) / 4) + 1, static_cast<int>((j - 2) % 4)};
}

double sign_of_mode(int m) { return (m % 2 == 0) ? 1.0 : -1.0; }

}  // namespace

TrigBasis::TrigBasis(GridPtr grid, std::size_t count) : grid_(std::move(grid)) {
    const double X = grid_->half_width();
    const double c0 = 1.0 / std::sqrt(2.0 * X);
    const double c = 1.0 / std::sqrt(X);
    modes_.reserve(count);
    fields_.reserve(count);
    for (std::size_t j = 0; j < count; ++j) {
        const auto [m, slot] = slot_of(j);
        TrigMode mode{};
        mode.m = m;
        mode.k = std::numbers::pi * m / X;
        if (m == 0) {
            mode.profile = TrigMode::Profile::Constant;
            mode.imaginary = (slot == 1);
            mode.amplitude = c0;
        } else {
            mode.profile = (slot < 2) ? TrigMode::Profile::Cos : TrigMode::Profile::Sin;
            mode.imaginary = (slot % 2 == 1);
            mode.amplitude = c;
        }
        Field f(grid_);
        for (std::size_t i = 0; i < f.size(); ++i) {
            const double x = grid_->x(i);
            double v = mode.amplitude;
            if (mode.profile == TrigMode::Profile::Cos) v *= std::cos(mode.k * x);
            if (mode.profile == TrigMode::Profile::Sin) v *= std::sin(mode.k * x);
            f[i] = mode.imaginary ? cplx{0.0, v} : cplx{v, 0.0};
        }
        modes_.push_back(mode);
        fields_.push_back(std::move(f));
    }
}

int TrigBasis::max_mode(std::size_t count) const {
    if (count == 0) return 0;
    return slot_of(count - 1).m;
}

void TrigBasis::coordinates(std::span<const cplx> spectral, std::size_t count,
                            std::span<double> out) const {
    if (count > size() || out.size() < count) {
        throw StructuralError("coordinate request exceeds the basis size");
    }
    const double dx = grid_->dx();
    std::size_t j = 0;
    while (j < count) {
        const auto [m, slot0] = slot_of(j);
        const auto& mode = modes_[j];
        if (m == 0) {
            const cplx s0 = dx * spectral[0];
            out[j] = mode.amplitude * s0.real();
            if (j + 1 < count) out[j + 1] = mode.amplitude * s0.imag();
            j += 2;
            continue;
        }
        const double sg = sign_of_mode(m) * dx;
        const cplx fp = sg * spectral[grid_->index_of_mode(m)];
        const cplx fm = sg * spectral[grid_->index_of_mode(-m)];
        const cplx s_cos = 0.5 * (fp + fm);
        const cplx s_sin = (fm - fp) / cplx{0.0, 2.0};
        const double vals[4] = {s_cos.real(), s_cos.imag(), s_sin.real(), s_sin.imag()};
        for (int s = 0; s < 4 && j < count; ++s, ++j) out[j] = mode.amplitude * vals[s];
    }
}

void TrigBasis::accumulate(std::span<const double> coords, std::size_t count,
                           std::span<cplx> spectral) const {
    if (count > size() || coords.size() < count) {
        throw StructuralError("coefficient count exceeds the basis size");
    }
    const double n = static_cast<double>(grid_->size());
    std::size_t j = 0;
    while (j < count) {
        const auto [m, slot0] = slot_of(j);
        const double amp = modes_[j].amplitude;
        if (m == 0) {
            const double re = coords[j];
            const double im = (j + 1 < count) ? coords[j + 1] : 0.0;
            spectral[0] += n * amp * cplx{re, im};
            j += 2;
            continue;
        }
        double v[4] = {0.0, 0.0, 0.0, 0.0};
        for (int s = 0; s < 4 && j < count; ++s, ++j) v[s] = coords[j];
        const cplx cc{v[0], v[1]};
        const cplx cs{v[2], v[3]};
        const double scale = 0.5 * n * sign_of_mode(m) * amp;
        const cplx i_unit{0.0, 1.0};
        spectral[grid_->index_of_mode(m)] += scale * (cc - i_unit * cs);
        spectral[grid_->index_of_mode(-m)] += scale * (cc + i_unit * cs);
    }
}

TrigBasis make_basis(const GridPtr& grid, std::size_t M) {
    if (M == 0) throw DomainError("basis needs at least one element");
    if (M + 1 > grid->size() / 2) {
        throw DomainError("basis size " + std::to_string(M) + " must stay below n/2 - 1 = " +
                          std::to_string(grid->size() / 2 - 1));
    }
    return TrigBasis(grid, M);
}

Projector::Projector(const TrigBasis& basis, std::size_t N) : basis_(&basis), N_(N) {
    if (N < 1 || N > basis.size()) {
        throw DomainError("projection rank " + std::to_string(N) + " outside [1, " +
                          std::to_string(basis.size()) + "]");
    }
    std::size_t j = 0;
    while (j < N) {
        const auto [m, slot0] = slot_of(j);
        Group g{m, {false, false, false, false}};
        const int width = (m == 0) ? 2 : 4;
        for (int s = 0; s < width && j < N; ++s, ++j) g.keep[s] = true;
        groups_.push_back(g);
        const auto& grid = basis.grid();
        support_.push_back(grid.index_of_mode(m));
        if (m != 0) support_.push_back(grid.index_of_mode(-m));
    }
}

void Projector::apply(std::span<const cplx> in, std::span<cplx> out) const {
    const auto& grid = basis_->grid();
    struct Entry {
        std::size_t index;
        cplx value;
    };
    Entry entries[2 * 64 + 2];
    std::vector<Entry> overflow;
    std::size_t count = 0;
    auto push = [&](std::size_t index, cplx value) {
        if (count < std::size(entries)) {
            entries[count++] = {index, value};
        } else {
            overflow.push_back({index, value});
        }
    };
    const cplx i_unit{0.0, 1.0};
    for (const auto& g : groups_) {
        if (g.m == 0) {
            const cplx c = in[0];
            push(0, cplx{g.keep[0] ? c.real() : 0.0, g.keep[1] ? c.imag() : 0.0});
            continue;
        }
        const auto ip = grid.index_of_mode(g.m);
        const auto im = grid.index_of_mode(-g.m);
        const cplx fp = in[ip];
        const cplx fm = in[im];
        if (g.keep[0] && g.keep[1] && g.keep[2] && g.keep[3]) {
            push(ip, fp);
            push(im, fm);
            continue;
        }
        // Work in the scaled (cos, sin) coefficients; the common real factor
        // (-1)^m dx cancels between analysis and synthesis.
        cplx cc = fp + fm;
        cplx cs = i_unit * (fp - fm);
        cc = cplx{g.keep[0] ? cc.real() : 0.0, g.keep[1] ? cc.imag() : 0.0};
        cs = cplx{g.keep[2] ? cs.real() : 0.0, g.keep[3] ? cs.imag() : 0.0};
        push(ip, 0.5 * (cc - i_unit * cs));
        push(im, 0.5 * (cc + i_unit * cs));
    }
    std::fill(out.begin(), out.end(), cplx{});
    for (std::size_t e = 0; e < count; ++e) out[entries[e].index] = entries[e].value;
    for (const auto& e : overflow) out[e.index] = e.value;
}

void Projector::apply_complement(std::span<const cplx> in, std::span<cplx> out) const {
    CVector p(in.size());
    apply(in, p);
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] - p[i];
}

Field project_PN(const Field& f, const TrigBasis& basis, std::size_t N) {
    if (!f.grid().equivalent(basis.grid())) throw StructuralError("field and basis grids differ");
    Projector proj(basis, N);
    auto spec = to_spectral(f);
    proj.apply(spec, spec);
    return from_spectral(f.grid_ptr(), spec);
}

Field project_QN(const Field& f, const TrigBasis& basis, std::size_t N) {
    return f - project_PN(f, basis, N);
}

}  // namespace cglmix
