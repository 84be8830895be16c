#pragma once

#include <boost/math/quadrature/gauss.hpp>

#include <utility>
#include <vector>

namespace stochci {

//! Node/weight list for a rule on a finite interval.
struct QuadRule {
    std::vector<double> x;
    std::vector<double> w;
};

//! Composite Gauss-Legendre rule (30 points per panel) on [a, b].
inline QuadRule composite_gauss(double a, double b, int panels)
{
    using G = boost::math::quadrature::gauss<double, 30>;
    const auto& ab = G::abscissa();
    const auto& wt = G::weights();
    QuadRule r;
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * h, mid = lo + 0.5 * h, half = 0.5 * h;
        // boost stores the non-negative half of the symmetric rule
        for (std::size_t i = ab.size(); i-- > 0;) {
            if (ab[i] == 0.0) continue;
            r.x.push_back(mid - half * ab[i]);
            r.w.push_back(half * wt[i]);
        }
        for (std::size_t i = 0; i < ab.size(); ++i) {
            r.x.push_back(mid + half * ab[i]);
            r.w.push_back(half * wt[i]);
        }
    }
    return r;
}

//! Integral of f over [a, b] with the composite rule.
template <typename F>
double integrate(F&& f, double a, double b, int panels = 16)
{
    QuadRule q = composite_gauss(a, b, panels);
    double s = 0.0;
    for (std::size_t i = 0; i < q.x.size(); ++i) s += q.w[i] * f(q.x[i]);
    return s;
}

} // namespace stochci
