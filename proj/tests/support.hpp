#pragma once

#include "stochci/norms.hpp"

#include <random>

namespace stochci::testing {

//! Random real field with all modes |k_i| <= kmax, Gaussian coefficients.
template <int NC>
SpectralField<NC> random_field(const Grid3& g, int kmax, std::uint64_t seed, bool zero_mean = true)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    SpectralField<NC> f(g);
    for_each_mode(g, [&](const Mode& m) {
        bool keep = std::abs(m.kx) <= kmax && std::abs(m.ky) <= kmax && std::abs(m.kz) <= kmax;
        for (int a = 0; a < NC; ++a) {
            double re = nd(rng), im = nd(rng);
            f.c[a][m.idx] = keep ? cplx(re, im) : cplx(0.0, 0.0);
        }
    });
    // round trip through samples enforces Hermitian symmetry
    f = to_spec(to_phys(f));
    if (zero_mean)
        for (int a = 0; a < NC; ++a) f.c[a][0] = 0.0;
    return f;
}

template <int NC>
double sup_abs(const PhysField<NC>& p)
{
    double m = 0.0;
    for (int a = 0; a < NC; ++a)
        for (double x : p.v[a]) m = std::max(m, std::abs(x));
    return m;
}

template <int NC>
double sup_diff(const PhysField<NC>& a, const PhysField<NC>& b)
{
    return sup_abs(a - b);
}

} // namespace stochci::testing
