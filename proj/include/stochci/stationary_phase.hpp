#pragma once

#include "stochci/norms.hpp"
#include "stochci/ops.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace stochci {

//! Hypothesis of the improved Hoelder inequality for a slow factor with
//! derivative growth zeta and a (T/kappa)^3-periodic fast factor:
//! 2 pi sqrt(3) zeta / kappa <= 1/3 and zeta^4 (2 pi sqrt(3) zeta / kappa)^N <= 1.
inline bool product_hypothesis_log(double log_zeta, double log_kappa, int N)
{
    double lr = std::log(2.0 * kPi * std::sqrt(3.0)) + log_zeta - log_kappa;
    return log_zeta > 0.0 && log_kappa >= 0.0 && N >= 1 && lr <= -std::log(3.0) && 4.0 * log_zeta + N * lr <= 0.0;
}
inline bool product_hypothesis(double zeta, double kappa, int N)
{
    return zeta > 0.0 && kappa > 0.0 && product_hypothesis_log(std::log(zeta), std::log(kappa), N);
}

//! Hypothesis of the commutator estimate: 1 <= zeta < kappa and zeta^N <= kappa^{N-2}.
inline bool commutator_hypothesis_log(double log_zeta, double log_kappa, int N)
{
    return log_zeta >= 0.0 && log_zeta < log_kappa && N >= 1 && N * log_zeta <= (N - 2) * log_kappa;
}
inline bool commutator_hypothesis(double zeta, double kappa, int N)
{
    return zeta > 0.0 && kappa > 0.0 && commutator_hypothesis_log(std::log(zeta), std::log(kappa), N);
}

//! ||D^j f||_{L^p} with the Frobenius magnitude of the j-th derivative tensor,
//! against the normalized measure on T^3 (so ||1||_p = 1).
inline double derivative_lp_norm(const ScalarField& f, int j, double p)
{
    const Grid3& g = f.grid;
    std::vector<double> sq(g.phys_size(), 0.0);
    auto fact = [](int k) {
        double r = 1.0;
        for (int i = 2; i <= k; ++i) r *= i;
        return r;
    };
    for (int a = 0; a <= j; ++a)
        for (int b = 0; a + b <= j; ++b) {
            int c = j - a - b;
            double w = fact(j) / (fact(a) * fact(b) * fact(c));
            ScalarField d = f;
            for (int k = 0; k < a; ++k) d = partial(d, 0, 0);
            for (int k = 0; k < b; ++k) d = partial(d, 0, 1);
            for (int k = 0; k < c; ++k) d = partial(d, 0, 2);
            auto ph = to_phys(d);
            for (std::size_t i = 0; i < sq.size(); ++i) sq[i] += w * ph.v[0][i] * ph.v[0][i];
        }
    double s = 0.0;
    for (double v : sq) s += std::pow(v, p / 2.0);
    return std::pow(s / double(g.phys_size()), 1.0 / p);
}

struct StationaryPhaseReport {
    double zeta = 0.0;
    double kappa = 0.0;
    int N = 0;
    double p = 2.0;
    bool product_hypothesis = false;     //!< flagged, not enforced
    bool commutator_hypothesis = false;
    double C_f = 0.0;                    //!< max_{j <= N+4} ||D^j f||_p / zeta^j
    double ratio = 0.0;                  //!< ||f g||_p / (C_f ||g||_p)
    double period_defect = 0.0;          //!< sup |g(x + 2 pi e_i / kappa) - g(x)|, NaN if kappa does not divide n
};

//! Measures the ratio controlled by the improved Hoelder inequality. All
//! norms use the normalized measure, so f = 1 gives C_f = 1 and ratio 1.
inline StationaryPhaseReport check_stationary_phase_product(const ScalarField& f, const ScalarField& g, double p, double zeta,
                                                            double kappa, int N)
{
    if (!(f.grid == g.grid)) throw std::invalid_argument("stationary phase check needs f and g on one grid");
    if (p != 1.0 && p != 2.0) throw std::invalid_argument("stationary phase check supports p in {1, 2}");
    StationaryPhaseReport r;
    r.zeta = zeta;
    r.kappa = kappa;
    r.N = N;
    r.p = p;
    r.product_hypothesis = product_hypothesis(zeta, kappa, N);
    r.commutator_hypothesis = commutator_hypothesis(zeta, kappa, N);
    for (int j = 0; j <= N + 4; ++j) r.C_f = std::max(r.C_f, derivative_lp_norm(f, j, p) / std::pow(zeta, j));
    PhysScalar fp = to_phys(f), gp = to_phys(g), fg(f.grid);
    for (std::size_t i = 0; i < fp.v[0].size(); ++i) fg.v[0][i] = fp.v[0][i] * gp.v[0][i];
    r.ratio = lp_norm(fg, p) / (r.C_f * lp_norm(gp, p)); // the volume factors cancel
    const int n = g.grid.n;
    long long k = std::llround(kappa);
    if (k >= 1 && std::abs(kappa - double(k)) < 1e-12 && n % k == 0) {
        int sh = int(n / k);
        double worst = 0.0;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                for (int c = 0; c < n; ++c) {
                    double v = gp.v[0][g.grid.pidx(a, b, c)];
                    worst = std::max({worst, std::abs(v - gp.v[0][g.grid.pidx((a + sh) % n, b, c)]),
                                      std::abs(v - gp.v[0][g.grid.pidx(a, (b + sh) % n, c)]),
                                      std::abs(v - gp.v[0][g.grid.pidx(a, b, (c + sh) % n)])});
                }
        r.period_defect = worst;
    } else {
        r.period_defect = std::numeric_limits<double>::quiet_NaN();
    }
    return r;
}

} // namespace stochci
