#include "cglmix/fields.hpp"

#include <cmath>
#include <vector>

#include "cglmix/errors.hpp"

namespace cglmix {

Field gaussian_bump(const GridPtr& grid, double norm, double width, double center) {
    if (!(width > 0.0)) throw DomainError("bump width must be positive");
    if (!(norm >= 0.0)) throw DomainError("bump norm must be nonnegative");
    Field f(grid);
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double y = (grid->x(i) - center) / width;
        f[i] = std::exp(-0.5 * y * y);
    }
    if (norm == 0.0) return Field(grid);
    f *= norm / l2_norm(f);
    return f;
}

Field random_localized_field(const GridPtr& grid, double norm, const StreamKey& stream, double width) {
    if (!(norm >= 0.0)) throw DomainError("initial norm must be nonnegative");
    if (norm == 0.0) return Field(grid);
    std::vector<double> g(8);
    standard_normals(stream, 0, g);
    const cplx c[4] = {{g[0], g[1]}, {g[2], g[3]}, {g[4], g[5]}, {g[6], g[7]}};
    Field f(grid);
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double y = grid->x(i) / width;
        f[i] = (c[0] + y * (c[1] + y * (c[2] + y * c[3]))) * std::exp(-0.5 * y * y);
    }
    f *= norm / l2_norm(f);
    return f;
}

Field random_band_limited_field(const GridPtr& grid, int max_mode, const StreamKey& stream) {
    const int half = static_cast<int>(grid->size() / 2);
    if (max_mode < 0 || max_mode >= half) throw DomainError("band limit must lie below the Nyquist mode");
    std::vector<double> g(2 * (2 * max_mode + 1));
    standard_normals(stream, 0, g);
    CVector spec(grid->size());
    std::size_t j = 0;
    for (int m = -max_mode; m <= max_mode; ++m, j += 2) spec[grid->index_of_mode(m)] = {g[j], g[j + 1]};
    Field f = from_spectral(grid, spec);
    f *= 1.0 / l2_norm(f);
    return f;
}

}  // namespace cglmix
