#include <algorithm>
#include <cmath>

#include "cglmix/basis.hpp"
#include "cglmix/errors.hpp"
#include "cglmix/weights.hpp"

namespace cglmix {

double truncated_poincare_epsilon(const TrigBasis& basis, std::size_t N, double A, double s,
                                  const std::vector<Field>& samples) {
    if (samples.empty()) throw DomainError("truncated Poincare estimate needs at least one sample");
    if (!(s > 0.0 && s <= 2.0)) throw DomainError("Sobolev index s must lie in (0, 2]");
    const Projector proj(basis, N);
    const Field chi = cutoff_chi(A, basis.grid_ptr());
    CVector spec(basis.grid().size());
    double eps = 0.0;
    for (const auto& f : samples) {
        require_same_grid(f, chi);
        const double denom = sobolev_norm(f, s);
        if (!(denom > 0.0)) throw DomainError("truncated Poincare sample has zero norm");
        Field g = f;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= chi[i].real();
        basis.grid().forward(g.data(), spec.data());
        proj.apply_complement(spec, spec);
        eps = std::max(eps, std::sqrt(spectral_norm_sq(basis.grid(), spec)) / denom);
    }
    return eps;
}

}  // namespace cglmix
