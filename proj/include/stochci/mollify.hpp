#pragma once

#include "stochci/ops.hpp"
#include "stochci/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace stochci {

//! exp(-1/(1 - x^2)) on (-1, 1), zero outside.
inline double bump(double x)
{
    double d = 1.0 - x * x;
    return d > 0.0 ? std::exp(-1.0 / d) : 0.0;
}

//! Radial bump mollifier of radius l on R^3, unit mass. Its transform is
//! tabulated per integer |k|^2 by radial quadrature.
class SpaceMollifier {
public:
    explicit SpaceMollifier(double l) : l_(l)
    {
        if (!(l > 0.0) || l >= kPi) throw std::invalid_argument("space mollifier radius must lie in (0, pi)");
        mass_ = integrate([](double r) { return 4.0 * kPi * r * r * bump(r); }, 0.0, 1.0, 32);
    }

    double radius() const { return l_; }

    //! Transform at |k| = kappa, equal to 1 at kappa = 0.
    double transform(double kappa) const
    {
        const double s = kappa * l_;
        auto f = [s](double r) {
            double sinc = s * r < 1e-8 ? 1.0 - (s * r) * (s * r) / 6.0 : std::sin(s * r) / (s * r);
            return 4.0 * kPi * r * r * bump(r) * sinc;
        };
        return integrate(f, 0.0, 1.0, 32) / mass_;
    }

    template <int NC>
    SpectralField<NC> apply(const SpectralField<NC>& f) const
    {
        std::map<long, double> table;
        return apply_symbol(f, [&](const Mode& m) {
            long k2 = long(m.kx) * m.kx + long(m.ky) * m.ky + long(m.kz) * m.kz;
            auto it = table.find(k2);
            if (it != table.end()) return it->second;
            double v = transform(std::sqrt(double(k2)));
            table.emplace(k2, v);
            return v;
        });
    }

private:
    double l_;
    double mass_ = 1.0;
};

//! Time kernel supported in [l/2, l], unit mass. Convolution f_l(t) =
//! int f(t - s) k(s) ds only looks into the past.
class TimeMollifier {
public:
    explicit TimeMollifier(double l, int panels = 8) : l_(l), panels_(panels)
    {
        if (!(l > 0.0)) throw std::invalid_argument("time mollifier width must be > 0");
        mass_ = integrate([this](double s) { return raw(s); }, 0.5 * l_, l_, 32);
    }

    double width() const { return l_; }
    double density(double s) const { return raw(s) / mass_; }
    double first_moment() const
    {
        return integrate([this](double s) { return s * density(s); }, 0.5 * l_, l_, 32);
    }

    //! Nodes s_j in [l/2, l] with weights summing to exactly 1.
    QuadRule rule() const { return normalized(composite_gauss(0.5 * l_, l_, panels_)); }

    //! Rule in absolute time for the window [t - l, t - l/2], with panels split
    //! at the given breakpoints (where the integrand may have kinks).
    QuadRule rule_at(double t, const std::vector<double>& breakpoints) const
    {
        std::vector<double> cuts{t - l_, t - 0.5 * l_};
        for (double b : breakpoints)
            if (b > t - l_ && b < t - 0.5 * l_) cuts.push_back(b);
        std::sort(cuts.begin(), cuts.end());
        QuadRule r;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            if (cuts[i + 1] - cuts[i] <= 0.0) continue;
            QuadRule p = composite_gauss(cuts[i], cuts[i + 1], 1);
            for (std::size_t j = 0; j < p.x.size(); ++j) {
                r.x.push_back(p.x[j]);
                r.w.push_back(p.w[j] * density(t - p.x[j]));
            }
        }
        double s = 0.0;
        for (double w : r.w) s += w;
        for (double& w : r.w) w /= s;
        return r;
    }

    //! Causal convolution of a callable time -> value (fields or scalars).
    template <typename F>
    auto apply(F&& f, double t) const -> decltype(f(t))
    {
        QuadRule q = rule();
        auto acc = q.w[0] * f(t - q.x[0]);
        for (std::size_t j = 1; j < q.x.size(); ++j) acc += q.w[j] * f(t - q.x[j]);
        return acc;
    }

    //! Weights on uniform samples t0 + i dt for the output time t. Trapezoid
    //! rule on the kernel, renormalized to unit mass.
    std::vector<std::pair<int, double>> sample_weights(double t0, double dt, double t) const
    {
        if (t - l_ < t0 - 1e-12 * std::max(1.0, std::abs(t0)))
            throw std::invalid_argument("time stencil too short: need samples back to t - l = " + std::to_string(t - l_) +
                                        ", stencil starts at " + std::to_string(t0) + " (length >= " +
                                        std::to_string(int(std::ceil(l_ / dt)) + 1) + " samples)");
        std::vector<std::pair<int, double>> w;
        double total = 0.0;
        int i_hi = int(std::floor((t - t0) / dt + 1e-9));
        for (int i = i_hi; i >= 0; --i) {
            double s = t - (t0 + i * dt);
            if (s > l_) break;
            double k = density(s);
            if (k > 0.0) {
                w.emplace_back(i, k);
                total += k;
            }
        }
        if (total <= 0.0) throw std::invalid_argument("time stencil too coarse to resolve the kernel");
        for (auto& p : w) p.second /= total;
        return w;
    }

private:
    double raw(double s) const { return bump((s - 0.75 * l_) / (0.25 * l_)); }
    QuadRule normalized(QuadRule q) const
    {
        double s = 0.0;
        for (std::size_t j = 0; j < q.x.size(); ++j) {
            q.w[j] *= density(q.x[j]);
            s += q.w[j];
        }
        for (double& w : q.w) w /= s;
        return q;
    }

    double l_;
    int panels_;
    double mass_ = 1.0;
};

//! Space-time mollification of a uniformly sampled series (samples at
//! t0 + i dt). Returns the mollified field at every sample time with a full
//! kernel window behind it, paired with that sample index.
template <int NC>
std::vector<std::pair<int, SpectralField<NC>>> mollify(const std::vector<SpectralField<NC>>& series, double t0, double dt,
                                                       const SpaceMollifier& space, const TimeMollifier& time)
{
    const double l = time.width();
    const int first = int(std::ceil(l / dt - 1e-9));
    if (int(series.size()) <= first)
        throw std::invalid_argument("time stencil too short: kernel support needs at least " + std::to_string(first + 1) +
                                    " samples, got " + std::to_string(series.size()));
    std::vector<std::pair<int, SpectralField<NC>>> out;
    for (int i = first; i < int(series.size()); ++i) {
        auto w = time.sample_weights(t0, dt, t0 + i * dt);
        SpectralField<NC> acc(series[0].grid);
        for (auto [j, wt] : w) acc += wt * series[j];
        acc = space.apply(acc);
        acc.time_tag = t0 + i * dt;
        out.emplace_back(i, std::move(acc));
    }
    return out;
}

} // namespace stochci
