#pragma once

#include "stochci/ledger.hpp"
#include "stochci/mollify.hpp"
#include "stochci/ops.hpp"
#include "stochci/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace stochci {

//! GG* is diagonal in Fourier space with eigenvalue |k|^{-2 s0} (additive);
//! the multiplicative mode drives a scalar Brownian motion.
struct NoiseConfig {
    SchemeMode mode = SchemeMode::additive;
    double s0 = 5.0;
    double sigma = 0.5;
    double m = 1.0;
    double dt = 1.0 / 64.0;
    double T = 1.0;
    std::uint64_t seed = 1;
    int n = 32;        //!< spectral truncation: modes with |k_i| < n/2
    double C_S = 1.0;  //!< Sobolev embedding constant in the stopping time
};

//! s0 > 4 - m + 2 sigma, i.e. Tr((-Delta)^{5/2 - m + 2 sigma} GG*) < infinity.
inline bool trace_hypothesis(const NoiseConfig& c) { return c.s0 > 4.0 - c.m + 2.0 * c.sigma; }
//! s0 > 3 + 2 sigma, the stronger Tr((-Delta)^{3/2 + 2 sigma} GG*) < infinity.
inline bool strong_trace_hypothesis(const NoiseConfig& c) { return c.s0 > 3.0 + 2.0 * c.sigma; }

//! Seed for an independent stream keyed by (seed, a, b, c, d).
inline std::uint64_t mix_seed(std::uint64_t seed, std::int64_t a, std::int64_t b = 0, std::int64_t c = 0, std::int64_t d = 0)
{
    auto fin = [](std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    };
    std::uint64_t h = fin(seed + 0x9e3779b97f4a7c15ull);
    for (std::int64_t v : {a, b, c, d}) h = fin(h ^ (std::uint64_t(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2)));
    return h;
}

//! A retained Fourier mode: one representative of each +-k pair, with a real
//! orthonormal frame (e1, e2) of the plane orthogonal to k.
struct NoiseMode {
    int kx = 0, ky = 0, kz = 0;
    double k2 = 0.0;
    double g = 0.0;      //!< |k|^{-s0}
    double rate = 0.0;   //!< |k|^{2m}
    std::array<double, 3> e1{}, e2{};
};

inline std::vector<NoiseMode> noise_modes(int n, double s0, double m)
{
    if (n < 8 || n % 2) throw std::invalid_argument("noise truncation n must be even and >= 8");
    std::vector<NoiseMode> out;
    const int h = n / 2;
    for (int kx = -h + 1; kx < h; ++kx)
        for (int ky = -h + 1; ky < h; ++ky)
            for (int kz = 0; kz < h; ++kz) {
                if (kz == 0 && !(kx > 0 || (kx == 0 && ky > 0))) continue;
                NoiseMode md;
                md.kx = kx;
                md.ky = ky;
                md.kz = kz;
                md.k2 = double(kx) * kx + double(ky) * ky + double(kz) * kz;
                double k = std::sqrt(md.k2);
                md.g = std::pow(k, -s0);
                md.rate = std::pow(k, 2.0 * m);
                std::array<double, 3> u{kx / k, ky / k, kz / k}, ref{0, 0, 0};
                int ax = 0;
                for (int a = 1; a < 3; ++a)
                    if (std::abs(u[a]) < std::abs(u[ax])) ax = a;
                ref[ax] = 1.0;
                std::array<double, 3> e1{u[1] * ref[2] - u[2] * ref[1], u[2] * ref[0] - u[0] * ref[2], u[0] * ref[1] - u[1] * ref[0]};
                double nn = std::sqrt(e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]);
                for (double& v : e1) v /= nn;
                md.e1 = e1;
                md.e2 = {u[1] * e1[2] - u[2] * e1[1], u[2] * e1[0] - u[0] * e1[2], u[0] * e1[1] - u[1] * e1[0]};
                out.push_back(md);
            }
    return out;
}

//! Truncated Tr((-Delta)^r GG*) over both members of each pair and both
//! divergence-free directions.
inline double truncated_trace(const std::vector<NoiseMode>& modes, double r)
{
    double s = 0.0;
    for (const auto& md : modes) s += 4.0 * std::pow(md.k2, r) * md.g * md.g;
    return s;
}

//! Coefficients of z_k or B_k in the (e1, e2) frame, time-major:
//! value(t, mode, j) = data[(t * modes + mode) * 2 + j].
struct ModeSeries {
    std::size_t modes = 0;
    std::vector<cplx> data;
    cplx& at(std::size_t t, std::size_t mi, int j) { return data[(t * modes + mi) * 2 + j]; }
    const cplx& at(std::size_t t, std::size_t mi, int j) const { return data[(t * modes + mi) * 2 + j]; }
};

struct NoisePath {
    NoiseConfig config;
    std::vector<double> times;
    std::vector<NoiseMode> modes; //!< additive only
    ModeSeries B, z;              //!< additive; z empty until ou_convolve
    std::vector<double> scalar_B; //!< multiplicative
    bool has_z() const { return !z.data.empty(); }
};

inline std::vector<double> time_grid(double dt, double T)
{
    if (!(dt > 0.0) || !(T >= dt)) throw std::invalid_argument("noise needs dt > 0 and T >= dt");
    const int steps = int(std::llround(T / dt));
    if (std::abs(steps * dt - T) > 1e-9 * T) throw std::invalid_argument("T must be an integer multiple of dt");
    std::vector<double> t(steps + 1);
    for (int i = 0; i <= steps; ++i) t[i] = i * dt;
    return t;
}

namespace detail {

//! Complex standard normal with E|xi|^2 = 1.
inline cplx cnormal(std::mt19937_64& rng)
{
    std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
    double re = nd(rng);
    double im = nd(rng);
    return {re, im};
}

//! Exact one-step coefficients of the pair (increment of B, OU integral) for
//! rate r: z' = decay z + g (c1 xi + c2 eta) with dB = g sqrt(dt) xi.
struct OuStep {
    double decay, c1, c2;
    OuStep(double rate, double dt)
    {
        double x = rate * dt;
        decay = std::exp(-x);
        c1 = -std::expm1(-x) / (rate * std::sqrt(dt));
        double v = -std::expm1(-2.0 * x) / (2.0 * rate);
        c2 = std::sqrt(std::max(0.0, v - c1 * c1));
    }
};

//! Draws of one mode: xi (driving B) and eta (OU remainder) come from
//! separate streams so B alone is reproducible without z.
inline void simulate_mode(const NoiseMode& md, const NoiseConfig& c, std::size_t steps, std::size_t mi, std::size_t nm,
                          std::vector<cplx>* B, std::vector<cplx>* z, const std::vector<std::size_t>* keep = nullptr)
{
    std::mt19937_64 rb(mix_seed(c.seed, md.kx, md.ky, md.kz, 0));
    std::mt19937_64 ro(mix_seed(c.seed, md.kx, md.ky, md.kz, 1));
    OuStep st(md.rate, c.dt);
    cplx b[2] = {0.0, 0.0}, zz[2] = {0.0, 0.0};
    const double sdt = std::sqrt(c.dt);
    std::size_t slot = 0;
    auto store = [&](std::size_t t) {
        if (keep) {
            if (slot >= keep->size() || (*keep)[slot] != t) return;
        } else {
            slot = t;
        }
        for (int j = 0; j < 2; ++j) {
            if (B) (*B)[(slot * nm + mi) * 2 + j] = b[j];
            if (z) (*z)[(slot * nm + mi) * 2 + j] = zz[j];
        }
        if (keep) ++slot;
    };
    store(0);
    for (std::size_t t = 1; t <= steps; ++t) {
        for (int j = 0; j < 2; ++j) {
            cplx xi = cnormal(rb);
            b[j] += md.g * sdt * xi;
            if (z) {
                cplx eta = cnormal(ro);
                zz[j] = st.decay * zz[j] + md.g * (st.c1 * xi + st.c2 * eta);
            }
        }
        store(t);
    }
}

} // namespace detail

//! Brownian path B: additive (per-mode divergence-free complex increments with
//! variance dt |k|^{-2 s0} per direction) or multiplicative (scalar).
inline NoisePath sample_wiener(const NoiseConfig& c)
{
    NoisePath p;
    p.config = c;
    p.times = time_grid(c.dt, c.T);
    const std::size_t steps = p.times.size() - 1;
    if (c.mode == SchemeMode::multiplicative) {
        std::mt19937_64 rng(mix_seed(c.seed, -1));
        std::normal_distribution<double> nd(0.0, std::sqrt(c.dt));
        p.scalar_B.assign(steps + 1, 0.0);
        for (std::size_t i = 1; i <= steps; ++i) p.scalar_B[i] = p.scalar_B[i - 1] + nd(rng);
        return p;
    }
    p.modes = noise_modes(c.n, c.s0, c.m);
    const std::size_t nm = p.modes.size();
    p.B.modes = nm;
    p.B.data.assign((steps + 1) * nm * 2, cplx(0.0, 0.0));
    parallel_for(int(nm), [&](int mi) { detail::simulate_mode(p.modes[mi], c, steps, mi, nm, &p.B.data, nullptr); });
    return p;
}

//! Stochastic convolution by the exact per-mode OU update, driven by the same
//! draws as B. The fractional order m of the path's config is replaced by m.
inline NoisePath ou_convolve(const NoisePath& path, double m)
{
    if (path.config.mode != SchemeMode::additive) throw std::invalid_argument("ou_convolve needs an additive path");
    NoisePath p = path;
    p.config.m = m;
    for (auto& md : p.modes) md.rate = std::pow(md.k2, m);
    const std::size_t steps = p.times.size() - 1, nm = p.modes.size();
    p.z.modes = nm;
    p.z.data.assign((steps + 1) * nm * 2, cplx(0.0, 0.0));
    parallel_for(int(nm), [&](int mi) { detail::simulate_mode(p.modes[mi], p.config, steps, mi, nm, nullptr, &p.z.data); });
    return p;
}

namespace detail {

//! Places frame coefficients coef(mi, j) of every retained mode on grid g.
template <typename C>
FourierField3 place_modes(const NoisePath& p, const Grid3& g, C&& coef)
{
    if (g.n < p.config.n) throw std::invalid_argument("grid smaller than the noise truncation");
    FourierField3 f(g);
    auto wrap = [&](int k) { return k < 0 ? k + g.n : k; };
    for (std::size_t mi = 0; mi < p.modes.size(); ++mi) {
        const auto& md = p.modes[mi];
        cplx a = coef(mi, 0), b = coef(mi, 1);
        for (int c = 0; c < 3; ++c) {
            cplx v = a * md.e1[c] + b * md.e2[c];
            f.c[c][g.sidx(wrap(md.kx), wrap(md.ky), md.kz)] = v;
            if (md.kz == 0) f.c[c][g.sidx(wrap(-md.kx), wrap(-md.ky), 0)] = std::conj(v);
        }
    }
    return f;
}

} // namespace detail

//! Field on a grid of size >= truncation from one time slice of a series.
inline FourierField3 to_field(const NoisePath& p, const ModeSeries& s, std::size_t t, int grid_n = 0)
{
    Grid3 g(grid_n > 0 ? grid_n : p.config.n);
    FourierField3 f = detail::place_modes(p, g, [&](std::size_t mi, int j) { return s.at(t, mi, j); });
    f.time_tag = p.times.at(t);
    return f;
}

//! Field at a real time by linear interpolation between samples; zero for
//! t <= 0 (the paths start at 0).
inline FourierField3 field_at(const NoisePath& p, const ModeSeries& s, double t, const Grid3& g)
{
    const double T = p.times.back();
    if (t > T * (1.0 + 1e-12)) throw std::invalid_argument("noise path queried beyond its final time");
    FourierField3 f(g);
    if (t > 0.0) {
        const double dt = p.config.dt;
        std::size_t i = std::min(std::size_t(t / dt), p.times.size() - 2);
        double w = std::clamp((t - p.times[i]) / dt, 0.0, 1.0);
        f = detail::place_modes(p, g, [&](std::size_t mi, int j) { return (1.0 - w) * s.at(i, mi, j) + w * s.at(i + 1, mi, j); });
    }
    f.time_tag = t;
    return f;
}

//! Scalar path value at a real time, linear between samples, zero for t <= 0.
inline double scalar_at(const NoisePath& p, double t)
{
    const double T = p.times.back();
    if (t > T * (1.0 + 1e-12)) throw std::invalid_argument("noise path queried beyond its final time");
    if (t <= 0.0) return 0.0;
    const double dt = p.config.dt;
    std::size_t i = std::min(std::size_t(t / dt), p.times.size() - 2);
    double w = std::clamp((t - p.times[i]) / dt, 0.0, 1.0);
    return (1.0 - w) * p.scalar_B[i] + w * p.scalar_B[i + 1];
}

//! Per-mode weights 2 (2 pi)^3 (1 + |k|^2)^r; the factor 2 counts -k.
inline std::vector<double> hs_weights(const NoisePath& p, double r)
{
    std::vector<double> w(p.modes.size());
    const double c = 2.0 * std::pow(kTwoPi, 3);
    for (std::size_t mi = 0; mi < w.size(); ++mi) w[mi] = c * std::pow(1.0 + p.modes[mi].k2, r);
    return w;
}

//! ||f(t)||_{H^r} from frame coefficients and hs_weights(p, r).
inline double series_hs_norm(const ModeSeries& s, const std::vector<double>& w, std::size_t t)
{
    double acc = 0.0;
    for (std::size_t mi = 0; mi < w.size(); ++mi) acc += w[mi] * (std::norm(s.at(t, mi, 0)) + std::norm(s.at(t, mi, 1)));
    return std::sqrt(acc);
}

inline double series_hs_distance(const ModeSeries& s, const std::vector<double>& w, std::size_t t1, std::size_t t2)
{
    double acc = 0.0;
    for (std::size_t mi = 0; mi < w.size(); ++mi)
        acc += w[mi] * (std::norm(s.at(t1, mi, 0) - s.at(t2, mi, 0)) + std::norm(s.at(t1, mi, 1) - s.at(t2, mi, 1)));
    return std::sqrt(acc);
}

inline double series_hs_norm(const NoisePath& p, const ModeSeries& s, std::size_t t, double r)
{
    return series_hs_norm(s, hs_weights(p, r), t);
}

// ---------------------------------------------------------------------------
// Hoelder norms

struct HolderEstimate {
    double seminorm = 0.0; //!< sup over sampled pairs of |f(t) - f(s)| / |t - s|^theta
    double sup = 0.0;      //!< sup over samples of |f(t)|
    double norm() const { return seminorm + sup; }
};

//! Discrete lower estimate of the C^theta norm: pairs with index lag >=
//! min_lag only (lag-1 pairs are dominated by sampling noise).
template <typename Dist, typename Mag>
HolderEstimate holder_estimate(const std::vector<double>& times, std::size_t count, Dist&& dist, Mag&& mag, double theta,
                               int min_lag = 2)
{
    if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("Hoelder exponent must lie in (0, 1)");
    if (count < 2 || times.size() < count) throw std::invalid_argument("Hoelder norm needs at least 2 samples");
    const std::size_t lag = std::size_t(std::max(1, std::min<int>(min_lag, int(count) - 1)));
    HolderEstimate h;
    for (std::size_t i = 0; i < count; ++i) h.sup = std::max(h.sup, mag(i));
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t j = i + lag; j < count; ++j)
            h.seminorm = std::max(h.seminorm, dist(i, j) / std::pow(times[j] - times[i], theta));
    return h;
}

inline HolderEstimate holder_norm(const std::vector<double>& times, const std::vector<double>& values, double theta, int min_lag = 2)
{
    if (times.size() != values.size()) throw std::invalid_argument("times and values differ in length");
    return holder_estimate(
        times, values.size(), [&](std::size_t i, std::size_t j) { return std::abs(values[j] - values[i]); },
        [&](std::size_t i) { return std::abs(values[i]); }, theta, min_lag);
}

//! C^theta_t H^r_x estimate of the first `count` samples of a mode series.
inline HolderEstimate holder_norm(const NoisePath& p, const ModeSeries& s, double theta, double r, std::size_t count = 0, int min_lag = 2)
{
    if (count == 0) count = p.times.size();
    const auto w = hs_weights(p, r);
    return holder_estimate(
        p.times, count, [&](std::size_t i, std::size_t j) { return series_hs_distance(s, w, i, j); },
        [&](std::size_t i) { return series_hs_norm(s, w, i); }, theta, min_lag);
}

// ---------------------------------------------------------------------------
// Stopping times

struct StoppingTime {
    double time = 0.0;
    std::size_t index = 0;  //!< sample index of the crossing (or of the cap)
    bool capped = true;     //!< no threshold crossed before L
    std::string trigger = "cap";
};

//! First sample time at which the running quantities reach their thresholds,
//! capped at L. Additive: ||z(t)||_{H^{(5+sigma)/2}} >= L^{1/4}/C_S or
//! ||z||_{C_t^{2/5-2 delta} H^{(3+sigma)/2}} >= L^{1/2}/C_S. Multiplicative:
//! |B(t)| >= L^{1/4} or ||B||_{C_t^{1/2-2 delta}} >= L^{1/2}. The running
//! Hoelder norm uses pairs with lag >= 2 samples.
inline StoppingTime stopping_time(const NoisePath& p, double L, double delta)
{
    if (!(L > 0.0)) throw std::invalid_argument("stopping time needs L > 0");
    if (p.times.back() < L - 1e-12 * L) throw std::invalid_argument("path shorter than L");
    const bool add = p.config.mode == SchemeMode::additive;
    if (add && !p.has_z()) throw std::invalid_argument("additive stopping time needs z");
    if (!(delta > 0.0)) throw std::invalid_argument("stopping time needs delta > 0");
    const double theta = add ? 0.4 - 2.0 * delta : 0.5 - 2.0 * delta;
    if (!(theta > 0.0)) throw std::invalid_argument("delta too large for the Hoelder exponent");
    const double cs = add ? p.config.C_S : 1.0;
    const double th1 = std::pow(L, 0.25) / cs, th2 = std::sqrt(L) / cs;
    const double r1 = (5.0 + p.config.sigma) / 2.0, r2 = (3.0 + p.config.sigma) / 2.0;
    const auto w1 = add ? hs_weights(p, r1) : std::vector<double>{}, w2 = add ? hs_weights(p, r2) : std::vector<double>{};
    auto point = [&](std::size_t i) { return add ? series_hs_norm(p.z, w1, i) : std::abs(p.scalar_B[i]); };
    auto low = [&](std::size_t i) { return add ? series_hs_norm(p.z, w2, i) : std::abs(p.scalar_B[i]); };
    auto dist = [&](std::size_t i, std::size_t j) {
        return add ? series_hs_distance(p.z, w2, i, j) : std::abs(p.scalar_B[j] - p.scalar_B[i]);
    };
    double semi = 0.0, sup = 0.0;
    StoppingTime st;
    for (std::size_t i = 0; i < p.times.size() && p.times[i] <= L * (1 + 1e-12); ++i) {
        sup = std::max(sup, low(i));
        for (std::size_t j = 0; j + 2 <= i; ++j) semi = std::max(semi, dist(j, i) / std::pow(p.times[i] - p.times[j], theta));
        if (point(i) >= th1) {
            st = {p.times[i], i, false, add ? "H^{(5+sigma)/2} norm" : "|B|"};
            return st;
        }
        if (semi + sup >= th2) {
            st = {p.times[i], i, false, "Hoelder norm"};
            return st;
        }
        st.index = i;
    }
    st.time = L;
    return st;
}

// ---------------------------------------------------------------------------
// Multiplicative weight Upsilon = exp(B)

struct UpsilonPath {
    std::vector<double> times, upsilon, upsilon_l;
    double l = 0.0;
};

//! Upsilon = e^B and its causal mollification (B = 0 before time 0). With
//! l = 0 the mollified path equals Upsilon.
inline UpsilonPath upsilon(const std::vector<double>& times, const std::vector<double>& B, double l)
{
    if (times.size() != B.size() || times.size() < 2) throw std::invalid_argument("upsilon needs a scalar path");
    UpsilonPath u;
    u.times = times;
    u.l = l;
    for (double b : B) u.upsilon.push_back(std::exp(b));
    if (l <= 0.0) {
        u.upsilon_l = u.upsilon;
        return u;
    }
    const double dt = times[1] - times[0];
    const int pad = int(std::ceil(l / dt)) + 1;
    std::vector<double> ext(pad, 1.0);
    ext.insert(ext.end(), u.upsilon.begin(), u.upsilon.end());
    TimeMollifier tm(l);
    const double t0 = times[0] - pad * dt;
    for (double t : times) {
        double acc = 0.0;
        for (auto [j, w] : tm.sample_weights(t0, dt, t)) acc += w * ext[j];
        u.upsilon_l.push_back(acc);
    }
    return u;
}

inline double m_L(double L) { return std::sqrt(3.0) * std::pow(L, 0.25) * std::exp(0.5 * std::pow(L, 0.25)); }

struct UpsilonBoundCheck {
    double T_L = 0.0;
    double weight_sup = 0.0;       //!< sup of [Upsilon]_theta + |Upsilon| + |Upsilon^{-1}| before T_L
    double weight_bound = 0.0;     //!< m_L^2
    double mollifier_gap = 0.0;    //!< sup |Upsilon_l - Upsilon| before T_L
    double mollifier_bound = 0.0;  //!< l^{1/2 - 2 delta} m_L^2
    bool holds() const { return weight_sup <= weight_bound && mollifier_gap <= mollifier_bound; }
};

//! Pathwise check of the Upsilon bounds on [0, T_L) of a multiplicative path.
inline UpsilonBoundCheck check_upsilon_bounds(const NoisePath& p, double L, double delta, double l)
{
    if (p.config.mode != SchemeMode::multiplicative) throw std::invalid_argument("needs a multiplicative path");
    StoppingTime st = stopping_time(p, L, delta);
    std::size_t count = st.capped ? st.index + 1 : st.index; // exclude the crossing sample
    UpsilonPath u = upsilon(p.times, p.scalar_B, l);
    const double theta = 0.5 - 2.0 * delta;
    UpsilonBoundCheck c;
    c.T_L = st.time;
    c.weight_bound = m_L(L) * m_L(L);
    c.mollifier_bound = std::pow(l, theta) * c.weight_bound;
    double semi = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t j = 0; j + 2 <= i; ++j)
            semi = std::max(semi, std::abs(u.upsilon[i] - u.upsilon[j]) / std::pow(p.times[i] - p.times[j], theta));
        c.weight_sup = std::max(c.weight_sup, semi + u.upsilon[i] + 1.0 / u.upsilon[i]);
        c.mollifier_gap = std::max(c.mollifier_gap, std::abs(u.upsilon_l[i] - u.upsilon[i]));
    }
    return c;
}

// ---------------------------------------------------------------------------
// Monte Carlo regularity study

struct MomentEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
};

inline MomentEstimate moment(const std::vector<double>& v)
{
    MomentEstimate e;
    if (v.empty()) return e;
    double s = 0.0, s2 = 0.0;
    for (double x : v) s += x;
    e.mean = s / v.size();
    for (double x : v) s2 += (x - e.mean) * (x - e.mean);
    e.stderr_ = v.size() > 1 ? std::sqrt(s2 / (v.size() - 1) / v.size()) : 0.0;
    return e;
}

struct RegularityRow {
    int n = 0;
    MomentEstimate sup_high;     //!< E sup_t ||z(t)||_{H^{(5+sigma)/2}}
    MomentEstimate holder;       //!< E ||z||_{C^{2/5 - delta} H^{(3+sigma)/2}}
    MomentEstimate holder_half;  //!< E ||z||_{C^{1/2 - delta_half} H^{(3+sigma)/2}}
    double trace = 0.0;          //!< truncated Tr((-Delta)^{5/2 - m + 2 sigma} GG*)
};

struct RegularityReport {
    NoiseConfig config;
    int samples = 0;
    double delta = 0.1, delta_half = 0.02;
    bool trace_hypothesis = false, strong_trace_hypothesis = false;
    std::vector<RegularityRow> rows;
    double drift_sup = 0.0, drift_holder = 0.0, drift_holder_half = 0.0; //!< (max - min)/min over truncations
    bool bounded() const { return drift_sup < 0.2 && drift_holder < 0.2; }
    std::string verdict() const { return bounded() ? "bounded under refinement" : "grows under refinement"; }
};

//! Monte Carlo moments of z across spectral truncations. Each sample uses
//! seed mix(config.seed, i); the per-mode streams make the truncations share
//! their common modes, so the drift isolates the contribution of new modes.
inline RegularityReport regularity_report(const NoiseConfig& cfg, int samples, const std::vector<int>& truncations = {32, 48, 64},
                                          double delta = 0.1, double delta_half = 0.02)
{
    if (cfg.mode != SchemeMode::additive) throw std::invalid_argument("regularity report is for the additive noise");
    if (samples < 100) throw std::invalid_argument("regularity report needs at least 100 samples");
    RegularityReport rep;
    rep.config = cfg;
    rep.samples = samples;
    rep.delta = delta;
    rep.delta_half = delta_half;
    rep.trace_hypothesis = trace_hypothesis(cfg);
    rep.strong_trace_hypothesis = strong_trace_hypothesis(cfg);
    const double r_hi = (5.0 + cfg.sigma) / 2.0, r_lo = (3.0 + cfg.sigma) / 2.0;
    const std::vector<double> times = time_grid(cfg.dt, cfg.T);
    const std::size_t steps = times.size() - 1;
    for (int n : truncations) {
        NoiseConfig c = cfg;
        c.n = n;
        RegularityRow row;
        row.n = n;
        std::vector<double> a(samples), b(samples), h(samples);
        NoisePath path;
        path.config = c;
        path.times = times;
        path.modes = noise_modes(n, c.s0, c.m);
        row.trace = truncated_trace(path.modes, 2.5 - c.m + 2.0 * c.sigma);
        const std::size_t nm = path.modes.size();
        const auto w_hi = hs_weights(path, r_hi), w_lo = hs_weights(path, r_lo);
        for (int s = 0; s < samples; ++s) {
            path.config.seed = mix_seed(cfg.seed, s);
            path.z.modes = nm;
            path.z.data.assign((steps + 1) * nm * 2, cplx(0.0, 0.0));
            parallel_for(int(nm), [&](int mi) { detail::simulate_mode(path.modes[mi], path.config, steps, mi, nm, nullptr, &path.z.data); });
            double sup = 0.0;
            for (std::size_t t = 0; t <= steps; ++t) sup = std::max(sup, series_hs_norm(path.z, w_hi, t));
            a[s] = sup;
            const std::size_t nt = steps + 1;
            std::vector<double> dist(nt * nt, 0.0), mag(nt);
            for (std::size_t i = 0; i < nt; ++i) {
                mag[i] = series_hs_norm(path.z, w_lo, i);
                for (std::size_t j = i + 1; j < nt; ++j) dist[i * nt + j] = series_hs_distance(path.z, w_lo, i, j);
            }
            auto d = [&](std::size_t i, std::size_t j) { return dist[i * nt + j]; };
            auto mg = [&](std::size_t i) { return mag[i]; };
            b[s] = holder_estimate(times, nt, d, mg, 0.4 - delta).norm();
            h[s] = holder_estimate(times, nt, d, mg, 0.5 - delta_half).norm();
        }
        row.sup_high = moment(a);
        row.holder = moment(b);
        row.holder_half = moment(h);
        rep.rows.push_back(row);
    }
    auto drift = [&](auto get) {
        double lo = INFINITY, hi = 0.0;
        for (const auto& r : rep.rows) {
            lo = std::min(lo, get(r));
            hi = std::max(hi, get(r));
        }
        return lo > 0.0 ? (hi - lo) / lo : INFINITY;
    };
    rep.drift_sup = drift([](const RegularityRow& r) { return r.sup_high.mean; });
    rep.drift_holder = drift([](const RegularityRow& r) { return r.holder.mean; });
    rep.drift_holder_half = drift([](const RegularityRow& r) { return r.holder_half.mean; });
    return rep;
}

//! (B_k(T), z_k(T)) for dof 0 of one mode, drawn from the same per-mode
//! streams as the full simulation.
inline std::pair<cplx, cplx> single_mode(const NoiseConfig& c, const NoiseMode& md)
{
    const std::size_t steps = time_grid(c.dt, c.T).size() - 1;
    std::vector<cplx> b(2), z(2);
    std::vector<std::size_t> keep{steps};
    detail::simulate_mode(md, c, steps, 0, 1, &b, &z, &keep);
    return {b[0], z[0]};
}

} // namespace stochci
