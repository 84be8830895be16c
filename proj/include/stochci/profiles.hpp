#pragma once

#include "stochci/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace stochci {

//! Cutoffs built on g(q) = exp(-s q/(1-q)), q = |y|^2, supported in the unit
//! ball. With s = 1 this is e times the standard bump exp(-1/(1-|y|^2)).
//!   Phi(y) = C_Phi g(|y|^2),  phi = -Delta Phi,  psi(t) = C_psi t g(t^2).
//! C_Phi and C_psi enforce int phi^2 = 4 pi^2 and int psi^2 = 2 pi.
class CutoffProfiles {
public:
    explicit CutoffProfiles(int smoothness_order = 4, double sharpness = 1.0) : order_(smoothness_order), s_(sharpness)
    {
        if (smoothness_order < 4) throw std::invalid_argument("cutoff smoothness order must be >= 4");
        if (!(sharpness > 0.0)) throw std::invalid_argument("cutoff sharpness must be > 0");
        c_phi_ = 1.0;
        c_psi_ = 1.0;
        double i_phi = converged([this](int p) { return raw_phi_sq(p); }, "phi^2");
        double i_psi = converged([this](int p) { return raw_psi_sq(p); }, "psi^2");
        c_phi_ = std::sqrt(4.0 * std::numbers::pi * std::numbers::pi / i_phi);
        c_psi_ = std::sqrt(2.0 * std::numbers::pi / i_psi);
    }

    int smoothness_order() const { return order_; }
    double sharpness() const { return s_; }
    double phi_scale() const { return c_phi_; }
    double psi_scale() const { return c_psi_; }

    // radial building blocks in q = |y|^2; zero for q >= 1
    double g(double q) const { return q < 1.0 ? std::exp(-s_ * q / (1.0 - q)) : 0.0; }
    double dg(double q) const
    {
        if (q >= 1.0) return 0.0;
        double hp = -s_ / ((1.0 - q) * (1.0 - q));
        return hp * g(q);
    }
    double d2g(double q) const
    {
        if (q >= 1.0) return 0.0;
        double u = 1.0 - q;
        double hp = -s_ / (u * u), hpp = -2.0 * s_ / (u * u * u);
        return (hpp + hp * hp) * g(q);
    }

    double Phi(double u, double v) const { return c_phi_ * g(u * u + v * v); }
    //! (d_u Phi, d_v Phi)
    std::array<double, 2> grad_Phi(double u, double v) const
    {
        double d = 2.0 * c_phi_ * dg(u * u + v * v);
        return {d * u, d * v};
    }
    //! phi = -Delta Phi, with Delta g(q) = 4 g'(q) + 4 q g''(q) in 2D.
    double phi(double u, double v) const
    {
        double q = u * u + v * v;
        return -c_phi_ * (4.0 * dg(q) + 4.0 * q * d2g(q));
    }
    double phi_radial(double r) const { return phi(r, 0.0); }

    double psi(double t) const { return c_psi_ * t * g(t * t); }
    double dpsi(double t) const
    {
        double q = t * t;
        if (q >= 1.0) return 0.0;
        return c_psi_ * (g(q) + 2.0 * q * dg(q));
    }

    //! int_{R^2} phi^2 and int_R psi^2 with the current scales.
    double phi_sq_integral(int panels = 64) const { return c_phi_ * c_phi_ * raw_phi_sq(panels); }
    double psi_sq_integral(int panels = 64) const { return c_psi_ * c_psi_ * raw_psi_sq(panels); }
    //! int_{R^2} phi, zero since phi is a Laplacian of a compactly supported function.
    double phi_integral(int panels = 64) const
    {
        return 2.0 * std::numbers::pi * integrate([this](double r) { return phi_radial(r) * r; }, 0.0, 1.0, panels);
    }

    //! Sup over a polar sample set of |phi + Delta_h Phi| with an 8th-order
    //! central finite-difference Laplacian of step h.
    double fd_laplacian_error(double h = 1e-3, int rings = 60, int spokes = 24) const
    {
        static constexpr double c[5] = {-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0};
        double worst = 0.0;
        for (int i = 0; i < rings; ++i) {
            double r = (i + 0.5) / rings;
            for (int k = 0; k < spokes; ++k) {
                double th = 2.0 * std::numbers::pi * k / spokes;
                double u = r * std::cos(th), v = r * std::sin(th);
                auto d2 = [&](double du, double dv) {
                    double s = c[0] * Phi(u, v);
                    for (int m = 1; m < 5; ++m) s += c[m] * (Phi(u + m * du, v + m * dv) + Phi(u - m * du, v - m * dv));
                    return s / (h * h);
                };
                worst = std::max(worst, std::abs(phi(u, v) + d2(h, 0.0) + d2(0.0, h)));
            }
        }
        return worst;
    }

private:
    double raw_phi_sq(int panels) const
    {
        auto f = [this](double r) {
            double q = r * r;
            double p = 4.0 * dg(q) + 4.0 * q * d2g(q);
            return p * p * r;
        };
        return 2.0 * std::numbers::pi * integrate(f, 0.0, 1.0, panels);
    }
    double raw_psi_sq(int panels) const
    {
        auto f = [this](double t) {
            double v = t * g(t * t);
            return v * v;
        };
        return integrate(f, -1.0, 1.0, panels);
    }
    template <typename F>
    double converged(F&& f, const char* what) const
    {
        double a = f(64), b = f(128);
        if (!(std::abs(a - b) <= 1e-13 * std::abs(b)))
            throw std::runtime_error(std::string("quadrature for ") + what + " did not converge");
        return b;
    }

    int order_;
    double s_;
    double c_phi_ = 1.0;
    double c_psi_ = 1.0;
};

} // namespace stochci
