#pragma once

#include "stochci/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace stochci {

//! Which norm to evaluate. L^p uses the pointwise Euclidean (Frobenius for
//! symmetric tensors) magnitude; H^s uses (1 + |k|^2)^s weights; C^N sums the
//! grid sups of all spectral derivatives up to order N.
struct NormSpec {
    enum Kind { Lp, Hs, CN } kind = Lp;
    double value = 2.0; //!< p, s or N
    static NormSpec L(double p) { return {Lp, p}; }
    static NormSpec H(double s) { return {Hs, s}; }
    static NormSpec C(int N) { return {CN, double(N)}; }
};

//! Pointwise magnitude squared; off-diagonal entries of the 6-component
//! layout count twice.
template <int NC>
double magnitude2(const PhysField<NC>& f, std::size_t p)
{
    double s = 0.0;
    if constexpr (NC == 6) {
        const double w[6] = {1, 2, 2, 1, 2, 1};
        for (int a = 0; a < 6; ++a) s += w[a] * f.v[a][p] * f.v[a][p];
    } else {
        for (int a = 0; a < NC; ++a) s += f.v[a][p] * f.v[a][p];
    }
    return s;
}

template <int NC>
double lp_norm(const PhysField<NC>& f, double p)
{
    if (!(p >= 1.0)) throw std::invalid_argument("L^p norm needs p >= 1");
    const std::size_t N = f.grid.phys_size();
    if (std::isinf(p)) {
        double m = 0.0;
        for (std::size_t i = 0; i < N; ++i) m = std::max(m, std::sqrt(magnitude2(f, i)));
        return m;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i) s += std::pow(magnitude2(f, i), 0.5 * p);
    return std::pow(s * f.grid.cell_volume(), 1.0 / p);
}

//! H^s norm from coefficients; with s = 0 it is the Parseval L^2 value.
template <int NC>
double hs_norm(const SpectralField<NC>& f, double s)
{
    double acc = 0.0;
    const int n = f.grid.n;
    for_each_mode(f.grid, [&](const Mode& m) {
        double w = m.multiplicity(n) * std::pow(1.0 + m.true_k2(), s);
        double e = 0.0;
        for (int a = 0; a < NC; ++a) {
            double ca = std::norm(f.c[a][m.idx]);
            if constexpr (NC == 6) ca *= (a == 1 || a == 2 || a == 4) ? 2.0 : 1.0;
            e += ca;
        }
        acc += w * e;
    });
    return std::sqrt(acc * std::pow(kTwoPi, 3));
}

//! Fraction of the H^s energy carried by the outer shell |k|_inf >= n/3.
//! Large values mean s exceeds what the grid resolves.
template <int NC>
double hs_tail_fraction(const SpectralField<NC>& f, double s)
{
    double tail = 0.0, all = 0.0;
    const int n = f.grid.n;
    for_each_mode(f.grid, [&](const Mode& m) {
        double w = m.multiplicity(n) * std::pow(1.0 + m.true_k2(), s);
        double e = 0.0;
        for (int a = 0; a < NC; ++a) e += std::norm(f.c[a][m.idx]);
        all += w * e;
        int kmax = std::max({std::abs(m.kx), std::abs(m.ky), std::abs(m.kz)});
        if (3 * kmax >= n) tail += w * e;
    });
    return all > 0.0 ? tail / all : 0.0;
}

//! Sum over orders j <= N of the grid sup of all order-j derivatives. A lower
//! bound for the true C^N norm.
template <int NC>
double cn_norm(const SpectralField<NC>& f, int N)
{
    double total = 0.0;
    for (int order = 0; order <= N; ++order) {
        double best = 0.0;
        for (int ax = 0; ax <= order; ++ax)
            for (int ay = 0; ax + ay <= order; ++ay) {
                int az = order - ax - ay;
                SpectralField<NC> d(f.grid);
                for_each_mode(f.grid, [&](const Mode& m) {
                    cplx sym = std::pow(cplx(0.0, m.dx), ax) * std::pow(cplx(0.0, m.dy), ay) *
                               std::pow(cplx(0.0, m.dz), az);
                    for (int a = 0; a < NC; ++a) d.c[a][m.idx] = f.c[a][m.idx] * sym;
                });
                auto p = to_phys(d);
                for (int a = 0; a < NC; ++a)
                    for (double x : p.v[a]) best = std::max(best, std::abs(x));
            }
        total += best;
    }
    return total;
}

template <int NC>
double norm(const SpectralField<NC>& f, const NormSpec& spec)
{
    switch (spec.kind) {
    case NormSpec::Lp: return lp_norm(to_phys(f), spec.value);
    case NormSpec::Hs: return hs_norm(f, spec.value);
    case NormSpec::CN: return cn_norm(f, int(spec.value));
    }
    return 0.0;
}

//! L^2 norm of a spectral field through Parseval.
template <int NC>
double l2(const SpectralField<NC>& f)
{
    return hs_norm(f, 0.0);
}

//! Relative gap |a - b| / max(|b|, tiny), measured in L^2.
template <int NC>
double rel_l2(const SpectralField<NC>& a, const SpectralField<NC>& b)
{
    double d = l2(a - b), s = l2(b);
    return d / std::max(s, std::numeric_limits<double>::min());
}

} // namespace stochci
