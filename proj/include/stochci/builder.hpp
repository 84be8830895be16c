#pragma once

#include "stochci/errors.hpp"
#include "stochci/field.hpp"
#include "stochci/geometry.hpp"
#include "stochci/jets.hpp"
#include "stochci/ledger.hpp"
#include "stochci/mollify.hpp"
#include "stochci/noise.hpp"
#include "stochci/norms.hpp"
#include "stochci/ops.hpp"
#include "stochci/parallel.hpp"

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace stochci {

// ---------------------------------------------------------------- scalars

//! Growth weight of the stress bound: L^4 e^{4 L t} (additive) or
//! e^{4 L t + 2 L} (multiplicative).
inline double time_weight(SchemeMode mode, double L, double t)
{
    return mode == SchemeMode::additive ? std::pow(L, 4) * std::exp(4.0 * L * t) : std::exp(4.0 * L * t + 2.0 * L);
}

namespace detail {
inline double step_kernel(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }
} // namespace detail

//! Smooth step: 0 for t <= 0, 1 for t >= 1, C-infinity and monotone.
inline double smooth_step(double t)
{
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    double a = detail::step_kernel(t), b = detail::step_kernel(1.0 - t);
    return a / (a + b);
}

//! chi(z) = 1 on [0, 1], z on [2, inf), 1 + s(z - 1)(z - 1) between, with s
//! the smooth step. Monotone, and 1 <= chi(z) <= z on (1, 2).
inline double cutoff_chi(double z)
{
    if (!(z >= 0.0)) throw std::invalid_argument("cutoff_chi needs z >= 0");
    if (z <= 1.0) return 1.0;
    if (z >= 2.0) return z;
    return 1.0 + smooth_step(z - 1.0) * (z - 1.0);
}

// ---------------------------------------------------------------- scales

//! Grid-resolvable stand-ins for the stage parameters.
struct ToyScales {
    double lambda_q = 1.0;
    double lambda_q1 = 5.2;
    double r_perp = 1.0 / 5.2;
    double r_par = 0.5;
    double mu = 1.0;
    double l = 0.05;

    void validate() const
    {
        if (!(lambda_q > 0.0 && lambda_q1 > lambda_q)) throw LedgerError("toy scales need 0 < lambda_q < lambda_{q+1}");
        if (!(r_perp > 0.0 && r_perp < r_par && r_par < 1.0)) throw LedgerError("toy scales need 0 < r_perp < r_par < 1");
        double k = lambda_q1 * r_perp;
        if (std::abs(k - std::round(k)) > 1e-9 * std::max(1.0, k) || std::round(k) < 1.0)
            throw LedgerError("toy scales need lambda_{q+1} r_perp to be a positive integer");
        if (!(mu > 0.0 && l > 0.0)) throw LedgerError("toy scales need mu > 0 and l > 0");
    }
    JetScales jets() const { return {r_perp, r_par, lambda_q1, mu}; }
};

//! Everything one convex-integration step needs besides the previous stage.
struct StageConfig {
    ToyScales scales;
    double c_R = 0.02;
    double delta_q1 = 1.0;
    double L = 2.0;
    double h = 1e-3;                    //!< time step of the 5-point stencil
    double domain_theta = 0.9;          //!< r_dom = min(1/2, theta r*)
    double min_points_per_radius = 0.0; //!< 0 keeps only the support-hit guard
    bool volume_normalized_amplitudes = false;
};

// ---------------------------------------------------------------- aux path

//! The noise a stage sees: z(t) in the additive mode, Upsilon(t) = e^{B(t)}
//! in the multiplicative mode. Without a path both are trivial (z = 0, B = 0).
struct AuxPath {
    SchemeMode mode = SchemeMode::additive;
    std::shared_ptr<const NoisePath> path;

    bool trivial() const { return !path; }
    std::vector<double> breakpoints() const { return path ? path->times : std::vector<double>{}; }
    FourierField3 z(double t, const Grid3& g) const
    {
        if (mode != SchemeMode::additive || !path) {
            FourierField3 f(g);
            f.time_tag = t;
            return f;
        }
        return field_at(*path, path->z, t, g);
    }
    double upsilon(double t) const
    {
        if (mode != SchemeMode::multiplicative || !path) return 1.0;
        return std::exp(scalar_at(*path, t));
    }
};

inline AuxPath trivial_aux(SchemeMode mode) { return AuxPath{mode, nullptr}; }

//! Additive: samples B, convolves with the OU semigroup of order m. The
//! multiplicative path is the scalar B alone.
inline AuxPath sample_aux(const NoiseConfig& c)
{
    NoisePath p = sample_wiener(c);
    if (c.mode == SchemeMode::additive) p = ou_convolve(p, c.m);
    return AuxPath{c.mode, std::make_shared<const NoisePath>(std::move(p))};
}

// ---------------------------------------------------------------- pointwise helpers

namespace detail {

//! Runs f(p) over every grid point, split into x-slabs.
template <typename F>
void for_points(const Grid3& g, F&& f)
{
    const std::size_t slab = std::size_t(g.n) * g.n;
    parallel_for(g.n, [&](int x) {
        for (std::size_t p = x * slab; p < (x + 1) * slab; ++p) f(p);
    });
}

//! s (a (x) b + b (x) a) / 2.
inline PhysSym outer_sym(const PhysVector& a, const PhysVector& b, double s = 1.0)
{
    PhysSym r(a.grid);
    for_points(a.grid, [&](std::size_t p) {
        for (int i = 0; i < 3; ++i)
            for (int j = i; j < 3; ++j) r.v[sym_index(i, j)][p] = 0.5 * s * (a.v[i][p] * b.v[j][p] + a.v[j][p] * b.v[i][p]);
    });
    return r;
}

inline void remove_trace(PhysSym& t)
{
    for_points(t.grid, [&](std::size_t p) {
        double tr = (t.v[0][p] + t.v[3][p] + t.v[5][p]) / 3.0;
        t.v[0][p] -= tr;
        t.v[3][p] -= tr;
        t.v[5][p] -= tr;
    });
}

//! Trace-free part of s (a (x) b + b (x) a) / 2, in spectral form.
inline SymTensorField3 traceless_outer(const PhysVector& a, const PhysVector& b, double s = 1.0)
{
    PhysSym t = outer_sym(a, b, s);
    remove_trace(t);
    return to_spec(t);
}

inline PhysScalar dot(const PhysVector& a, const PhysVector& b, double s = 1.0)
{
    PhysScalar r(a.grid);
    for_points(a.grid, [&](std::size_t p) { r.v[0][p] = s * (a.v[0][p] * b.v[0][p] + a.v[1][p] * b.v[1][p] + a.v[2][p] * b.v[2][p]); });
    return r;
}

inline PhysSym to_phys_sym(const SymTensorField3& f) { return to_phys(f); }

//! Pointwise Frobenius magnitude of a symmetric tensor.
inline double sym_magnitude(const PhysSym& t, std::size_t p) { return std::sqrt(magnitude2(t, p)); }

inline Sym6 sym_at(const PhysSym& t, std::size_t p) { return {t.v[0][p], t.v[1][p], t.v[2][p], t.v[3][p], t.v[4][p], t.v[5][p]}; }

//! Fourth-order centred difference over samples at offsets -2h..2h.
template <typename T>
T fd4(const std::array<const T*, 5>& f, double h)
{
    T r = *f[0];
    r -= 8.0 * *f[1];
    r += 8.0 * *f[3];
    r -= *f[4];
    r *= 1.0 / (12.0 * h);
    return r;
}

inline std::vector<double> fd4(const std::array<const std::vector<double>*, 5>& f, double h)
{
    std::vector<double> r(f[0]->size());
    const double s = 1.0 / (12.0 * h);
    for (std::size_t p = 0; p < r.size(); ++p) r[p] = s * ((*f[0])[p] - 8.0 * (*f[1])[p] + 8.0 * (*f[3])[p] - (*f[4])[p]);
    return r;
}

//! Spatial mollifier with its symbol tabulated once per grid.
class SpaceFilter {
public:
    SpaceFilter(double l, const Grid3& g) : grid_(g), symbol_(g.spec_size(), 1.0)
    {
        SpaceMollifier m(l);
        std::map<long, double> table;
        for_each_mode(g, [&](const Mode& md) {
            long k2 = long(md.kx) * md.kx + long(md.ky) * md.ky + long(md.kz) * md.kz;
            auto it = table.find(k2);
            if (it == table.end()) it = table.emplace(k2, m.transform(std::sqrt(double(k2)))).first;
            symbol_[md.idx] = it->second;
        });
    }
    template <int NC>
    SpectralField<NC> apply(SpectralField<NC> f) const
    {
        for (auto& c : f.c)
            for (std::size_t i = 0; i < c.size(); ++i) c[i] *= symbol_[i];
        return f;
    }

private:
    Grid3 grid_;
    std::vector<double> symbol_;
};

//! Directional derivative xi . grad of a scalar, spectral.
inline ScalarField directional(const ScalarField& f, const Vec3& xi)
{
    ScalarField r(f.grid);
    for_each_mode(f.grid, [&](const Mode& m) { r.c[0][m.idx] = cplx(0.0, xi[0] * m.dx + xi[1] * m.dy + xi[2] * m.dz) * f.c[0][m.idx]; });
    return r;
}

inline PhysScalar scalar_phys(std::vector<double> v, const Grid3& g)
{
    PhysScalar p(g);
    p.v[0] = std::move(v);
    return p;
}

} // namespace detail

// ---------------------------------------------------------------- energy pump and amplitudes

//! rho = (2 / r_dom) s chi(|R_l| / s) with s = c_R delta_{q+1} M_0(t) and the
//! Frobenius magnitude. With r_dom = 1/2 this is 4 s chi(...); in general
//! |R_l / rho| <= r_dom and rho >= 2 s.
inline PhysScalar energy_pump_rho(const PhysSym& R_l, double scale, double r_dom)
{
    if (!(scale > 0.0) || !(r_dom > 0.0 && r_dom <= 0.5)) throw std::invalid_argument("energy_pump_rho needs scale > 0 and r_dom in (0, 1/2]");
    PhysScalar rho(R_l.grid);
    const double pre = 2.0 / r_dom * scale;
    detail::for_points(R_l.grid, [&](std::size_t p) { rho.v[0][p] = pre * cutoff_chi(detail::sym_magnitude(R_l, p) / scale); });
    return rho;
}

//! Amplitudes of every direction on the grid. `a` holds the unscaled
//! amplitudes, `abar` the ones entering w_p and w_c (a / Upsilon_l^{1/2} in
//! the multiplicative mode, equal to a otherwise).
struct Amplitudes {
    std::vector<std::vector<double>> a, abar;
    double normalization = 1.0; //!< 1, or (2 pi)^{-3/4} in the volume-normalized form
    double max_ratio = 0.0;     //!< max |R_l / rho| over the grid
};

inline Amplitudes amplitudes(const PhysScalar& rho, const PhysSym& R_l, const GammaSolver& gs, bool volume_normalized = false,
                             double upsilon_l = 1.0)
{
    if (!(upsilon_l > 0.0)) throw std::invalid_argument("amplitudes need Upsilon_l > 0");
    const Grid3& g = rho.grid;
    const std::size_t N = g.phys_size(), D = gs.directions().size();
    Amplitudes A;
    A.normalization = volume_normalized ? std::pow(kTwoPi, -0.75) : 1.0;
    A.a.assign(D, std::vector<double>(N));
    A.abar.assign(D, std::vector<double>(N));
    const double bar = 1.0 / std::sqrt(upsilon_l);
    std::vector<double> ratio(g.n, 0.0);
    std::vector<std::string> err(g.n);
    const std::size_t slab = std::size_t(g.n) * g.n;
    parallel_for(g.n, [&](int x) {
        for (std::size_t p = x * slab; p < (x + 1) * slab; ++p) {
            const double r = rho.v[0][p];
            Sym6 m = detail::sym_at(R_l, p);
            ratio[x] = std::max(ratio[x], frobenius(m) / r);
            for (double& e : m) e = -e / r;
            m[0] += 1.0;
            m[3] += 1.0;
            m[5] += 1.0;
            std::array<double, 6> gam;
            try {
                gam = gs.gamma(m);
            } catch (const DomainError& e) {
                if (err[x].empty()) {
                    std::ostringstream s;
                    s << e.what() << " at grid point (" << p / slab << "," << (p / g.n) % g.n << "," << p % g.n << ")";
                    err[x] = s.str();
                }
                continue;
            }
            const double sr = std::sqrt(r) * A.normalization;
            for (std::size_t i = 0; i < D; ++i) {
                A.a[i][p] = sr * gam[i];
                A.abar[i][p] = bar * A.a[i][p];
            }
        }
    });
    for (int x = 0; x < g.n; ++x)
        if (!err[x].empty()) throw DomainError(err[x], 0.0);
    for (double r : ratio) A.max_ratio = std::max(A.max_ratio, r);
    return A;
}

// ---------------------------------------------------------------- corrector formula

//! curl(grad a x V) + grad a x curl V for V = xi f, built from spectral
//! derivatives of the amplitude a and the pointwise value and gradient of f.
inline PhysVector amplitude_corrector(const ScalarField& a, const std::vector<double>& f, const std::array<std::vector<double>, 3>& grad_f,
                                      const Vec3& xi)
{
    const Grid3& g = a.grid;
    PhysVector ga = to_phys(gradient(a));
    std::array<std::vector<double>, 6> hess;
    for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) {
            ScalarField d(g);
            for_each_mode(g, [&](const Mode& m) { d.c[0][m.idx] = -axis_symbol(m, i) * axis_symbol(m, j) * a.c[0][m.idx]; });
            hess[sym_index(i, j)] = to_phys(d).v[0];
        }
    PhysVector r(g);
    detail::for_points(g, [&](std::size_t p) {
        const double G[3] = {ga.v[0][p], ga.v[1][p], ga.v[2][p]};
        const double F[3] = {grad_f[0][p], grad_f[1][p], grad_f[2][p]};
        const double lap = hess[0][p] + hess[3][p] + hess[5][p];
        const double divV = xi[0] * F[0] + xi[1] * F[1] + xi[2] * F[2];
        const double gaF = G[0] * F[0] + G[1] * F[1] + G[2] * F[2];
        // curl V = grad f x xi
        const double cv[3] = {F[1] * xi[2] - F[2] * xi[1], F[2] * xi[0] - F[0] * xi[2], F[0] * xi[1] - F[1] * xi[0]};
        const double cross[3] = {G[1] * cv[2] - G[2] * cv[1], G[2] * cv[0] - G[0] * cv[2], G[0] * cv[1] - G[1] * cv[0]};
        for (int i = 0; i < 3; ++i) {
            double hx = 0.0;
            for (int j = 0; j < 3; ++j) hx += hess[sym_index(i, j)][p] * xi[j];
            // grad a div V - V lap a + (V . grad) grad a - (grad a . grad) V
            double c1 = G[i] * divV - xi[i] * f[p] * lap + f[p] * hx - xi[i] * gaF;
            r.v[i][p] = c1 + cross[i];
        }
    });
    return r;
}

// ---------------------------------------------------------------- stages

//! Velocity, stress and pressure of a stage at one time.
struct StageState {
    double t = 0.0;
    FourierField3 v;
    SymTensorField3 R;
    ScalarField pi;
};

//! A stage (v_q, R_q, pi_q) that can be evaluated at any time.
class Stage {
public:
    virtual ~Stage() = default;
    virtual int q() const = 0;
    virtual SchemeMode mode() const = 0;
    virtual const Grid3& grid() const = 0;
    virtual double m() const = 0;
    virtual const AuxPath& aux() const = 0;
    virtual StageState state(double t) const = 0;
    virtual FourierField3 velocity(double t) const { return state(t).v; }
};

//! The q = 0 pair. Additive: v0 = L^2 e^{2Lt} (2 pi)^{-3/2} (sin x3, 0, 0),
//! R0 = 2 L^3 e^{2Lt} (2 pi)^{-3/2} (-cos x3)(E13 + E31) + R (-Delta)^m v0
//! + v0 o z + z o v0 + z o z, pi0 = -(2 v0 . z + |z|^2) / 3.
//! Multiplicative: v0 = m_L e^{2Lt+L} (2 pi)^{-3/2} (sin x3, 0, 0),
//! R0 = m_L (2L + 1/2) e^{2Lt+L} (2 pi)^{-3/2} (-cos x3)(E13 + E31) + R (-Delta)^m v0, p0 = 0.
class BaseStage : public Stage {
public:
    BaseStage(SchemeMode mode, double L, const Grid3& g, double m, AuxPath aux)
        : mode_(mode), L_(L), grid_(g), m_(m), aux_(std::move(aux)), shape_v_(g), shape_c_(g), shape_lap_(g)
    {
        if (!(L > 1.0)) throw std::invalid_argument("base pair needs L > 1");
        if (aux_.mode != mode) throw std::invalid_argument("aux path mode does not match the stage mode");
        PhysVector sv(g);
        PhysSym sc(g);
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j)
                for (int k = 0; k < g.n; ++k) {
                    std::size_t p = g.pidx(i, j, k);
                    sv.v[0][p] = std::sin(g.coord(k));
                    sc.v[sym_index(0, 2)][p] = -std::cos(g.coord(k));
                }
        shape_v_ = to_spec(sv);
        shape_c_ = to_spec(sc);
        shape_lap_ = inverse_divergence(fractional_laplacian(shape_v_, m));
    }

    int q() const override { return 0; }
    SchemeMode mode() const override { return mode_; }
    const Grid3& grid() const override { return grid_; }
    double m() const override { return m_; }
    const AuxPath& aux() const override { return aux_; }
    double L() const { return L_; }

    //! Amplitude of v0 in front of (sin x3, 0, 0).
    double velocity_amplitude(double t) const
    {
        const double c = std::pow(kTwoPi, -1.5);
        if (mode_ == SchemeMode::additive) return L_ * L_ * std::exp(2.0 * L_ * t) * c;
        return m_L(L_) * std::exp(2.0 * L_ * t + L_) * c;
    }
    //! Amplitude of the (-cos x3)(E13 + E31) part of R0.
    double stress_amplitude(double t) const
    {
        const double rate = mode_ == SchemeMode::additive ? 2.0 * L_ : 2.0 * L_ + 0.5;
        return rate * velocity_amplitude(t);
    }

    FourierField3 velocity(double t) const override
    {
        FourierField3 v = velocity_amplitude(t) * shape_v_;
        v.time_tag = t;
        return v;
    }

    StageState state(double t) const override
    {
        StageState s;
        s.t = t;
        const double A = velocity_amplitude(t);
        s.v = A * shape_v_;
        s.v.time_tag = t;
        s.R = stress_amplitude(t) * shape_c_ + A * shape_lap_;
        s.pi = ScalarField(grid_);
        if (mode_ == SchemeMode::additive && !aux_.trivial()) {
            FourierField3 z = aux_.z(t, grid_);
            PhysVector vp = to_phys(s.v), zp = to_phys(z);
            // v0 o z + z o v0 + z o z
            PhysSym cross = detail::outer_sym(vp, zp, 2.0);
            cross += detail::outer_sym(zp, zp);
            PhysScalar tr(grid_);
            detail::for_points(grid_, [&](std::size_t p) { tr.v[0][p] = -(cross.v[0][p] + cross.v[3][p] + cross.v[5][p]) / 3.0; });
            detail::remove_trace(cross);
            s.R += to_spec(cross);
            s.pi = to_spec(tr);
        }
        s.R.time_tag = t;
        s.pi.time_tag = t;
        return s;
    }

private:
    SchemeMode mode_;
    double L_;
    Grid3 grid_;
    double m_;
    AuxPath aux_;
    FourierField3 shape_v_;
    SymTensorField3 shape_c_, shape_lap_;
};

inline std::shared_ptr<BaseStage> base_pair(SchemeMode mode, double L, const Grid3& g, double m, AuxPath aux)
{
    return std::make_shared<BaseStage>(mode, L, g, m, std::move(aux));
}
inline std::shared_ptr<BaseStage> base_pair(SchemeMode mode, double L, const Grid3& g, double m)
{
    return base_pair(mode, L, g, m, trivial_aux(mode));
}

// ---------------------------------------------------------------- one step

//! Mollified previous stage and the first commutator at one time.
struct MollifiedStage {
    double t = 0.0;
    FourierField3 v_l, z, z_l;
    SymTensorField3 R_l, R_comm1;
    ScalarField pi_l;
    double upsilon = 1.0, upsilon_l = 1.0;
};

//! Perturbation built at one time.
struct PerturbationAt {
    MollifiedStage moll;
    PhysScalar rho;
    double pump_scale = 0.0; //!< c_R delta_{q+1} M_0(t)
    double max_ratio = 0.0;
    std::vector<std::vector<double>> a2;   //!< unscaled a^2 per direction
    std::vector<std::vector<double>> abar; //!< amplitudes entering w_p and w_c
    FourierField3 w_p, w_c, w_t;
    FourierField3 S; //!< sum a^2 phi^2 psi^2 xi, before projection
    FourierField3 w() const { return w_p + w_c + w_t; }
    FourierField3 velocity() const { return moll.v_l + w(); }
};

//! Every summand of the new stress and pressure at one time.
struct ReynoldsDecomposition {
    double t = 0.0;
    FourierField3 v;
    SymTensorField3 R_linear, R_corrector, R_osc_x, R_osc_t, R_comm1, R_comm2, R;
    ScalarField pi_l, pi_linear, pi_corrector, pi_osc, pi_comm2, pi;
    FourierField3 dt_wpc, dt_S; //!< FD time derivatives used above
    std::vector<std::vector<double>> dt_a2;
};

//! Residuals of the identities the step relies on, at one time.
struct IdentityReport {
    double t = 0.0;
    double amplitude = 0.0;      //!< sum abar^2 xi (x) xi vs (rho Id - R_l) / Upsilon_l, sup relative
    double oscillation_pw = 0.0; //!< Upsilon_l w_p (x) w_p + R_l - Upsilon_l sum abar^2 P(W (x) W) - rho Id, sup relative
    double curl_curl = 0.0;      //!< spectral curl curl sum abar V vs w_p + formula corrector, L2 relative
    double time_osc = 0.0;       //!< d_t w_t + sum P(a^2 div(W (x) W)) - grad pi_1 + mu^{-1} sum P(d_t a^2 phi^2 psi^2 xi)
    double oscillation = 0.0;    //!< div(Upsilon_l w_p (x) w_p + R_l) + d_t w_t - div R_osc - grad pi_osc, L2 relative
    double div_wpc = 0.0;        //!< div(w_p + w_c) relative to |grad (w_p + w_c)|
    double div_w = 0.0;
    double mean_w = 0.0; //!< |mean w| relative to ||w||_L2 / (2 pi)^{3/2}
    double max_ratio = 0.0;
    double r_dom = 0.0;
    double min_rho_over_scale = 0.0; //!< min rho / (c_R delta M_0), at least 2
};

class PerturbedStage : public Stage {
public:
    PerturbedStage(std::shared_ptr<const Stage> prev, StageConfig cfg, CutoffProfiles profiles = CutoffProfiles(),
                   DirectionSet ds = build_direction_set())
        : prev_(std::move(prev)), cfg_(cfg), gs_(ds), jets_(std::move(profiles), ds, (cfg.scales.validate(), cfg.scales.jets())),
          filter_(cfg.scales.l, prev_->grid()), tm_(cfg.scales.l)
    {
        if (!(cfg_.h > 0.0)) throw std::invalid_argument("stage needs a positive time step");
        if (!(cfg_.c_R > 0.0 && cfg_.delta_q1 > 0.0)) throw std::invalid_argument("stage needs c_R > 0 and delta_{q+1} > 0");
        r_dom_ = domain_radius(ds, cfg_.domain_theta);
        if (cfg_.min_points_per_radius > 0.0)
            jets_.require_resolution(grid(), cfg_.min_points_per_radius);
        else
            jets_.require_support_hit(grid());
    }

    int q() const override { return prev_->q() + 1; }
    SchemeMode mode() const override { return prev_->mode(); }
    const Grid3& grid() const override { return prev_->grid(); }
    double m() const override { return prev_->m(); }
    const AuxPath& aux() const override { return prev_->aux(); }
    const StageConfig& config() const { return cfg_; }
    const JetFamily& jets() const { return jets_; }
    const GammaSolver& gamma_solver() const { return gs_; }
    const Stage& previous() const { return *prev_; }
    double r_dom() const { return r_dom_; }

    FourierField3 velocity(double t) const override
    {
        auto v = perturbation(t)->velocity();
        v.time_tag = t;
        return v;
    }

    StageState state(double t) const override
    {
        ReynoldsDecomposition d = decompose(t);
        return StageState{t, std::move(d.v), std::move(d.R), std::move(d.pi)};
    }

    //! Mollification (v_l, R_l, z_l or Upsilon_l) and R_commutator1, pi_l.
    MollifiedStage mollify_at(double t) const
    {
        const Grid3& g = grid();
        const bool add = mode() == SchemeMode::additive;
        QuadRule q = tm_.rule_at(t, aux().breakpoints());
        MollifiedStage M;
        M.t = t;
        FourierField3 v(g), z_acc(g);
        SymTensorField3 R(g);
        ScalarField pi(g);
        PhysSym prod(g);
        PhysScalar tr(g);
        double ups = 0.0;
        for (std::size_t j = 0; j < q.x.size(); ++j) {
            const double s = q.x[j], w = q.w[j];
            StageState st = prev_->state(s);
            v += w * st.v;
            R += w * st.R;
            pi += w * st.pi;
            PhysVector u = to_phys(st.v);
            double coef = w;
            if (add) {
                FourierField3 z = aux().z(s, g);
                z_acc += w * z;
                u += to_phys(z);
            } else {
                double Y = aux().upsilon(s);
                ups += w * Y;
                coef *= Y;
            }
            prod += detail::outer_sym(u, u, coef);
            tr += detail::dot(u, u, coef);
        }
        detail::remove_trace(prod);
        M.v_l = filter_.apply(v);
        M.R_l = filter_.apply(R);
        ScalarField pi_ql = filter_.apply(pi);
        SymTensorField3 prod_l = filter_.apply(to_spec(prod));
        ScalarField tr_l = filter_.apply(to_spec(tr));
        PhysVector ul = to_phys(M.v_l);
        double Yl = 1.0;
        if (add) {
            M.z_l = filter_.apply(z_acc);
            M.z = aux().z(t, g);
            ul += to_phys(M.z_l);
        } else {
            M.z_l = FourierField3(g);
            M.z = FourierField3(g);
            M.upsilon_l = Yl = ups;
            M.upsilon = aux().upsilon(t);
        }
        M.R_comm1 = detail::traceless_outer(ul, ul, Yl) - prod_l;
        M.pi_l = pi_ql - (1.0 / 3.0) * (to_spec(detail::dot(ul, ul, Yl)) - tr_l);
        for (auto* f : {&M.v_l, &M.z, &M.z_l}) f->time_tag = t;
        M.R_l.time_tag = M.R_comm1.time_tag = M.pi_l.time_tag = t;
        return M;
    }

    //! The three-part perturbation at time t (cached).
    std::shared_ptr<const PerturbationAt> perturbation(double t) const
    {
        {
            std::lock_guard<std::mutex> lk(mu_);
            for (auto& [tt, p] : cache_)
                if (std::abs(tt - t) <= 1e-9 * cfg_.h) return p;
        }
        auto p = std::make_shared<const PerturbationAt>(build_perturbation(t));
        std::lock_guard<std::mutex> lk(mu_);
        cache_.emplace_back(t, p);
        if (cache_.size() > kCacheSize) cache_.erase(cache_.begin());
        return p;
    }

    //! Pointwise samples of every jet at time t.
    std::vector<JetSample> samples(double t) const { return jets_.sample_all(grid(), t); }

    //! Corrector by the pointwise formula sum curl(grad abar x V) + grad abar x curl V + abar W^c.
    FourierField3 corrector_formula(const PerturbationAt& P, const std::vector<JetSample>& js) const
    {
        const Grid3& g = grid();
        PhysVector acc(g);
        const auto& ds = jets_.directions();
        const double c = jets_.stretch(), ps = jets_.potential_scale();
        for (std::size_t i = 0; i < jets_.size(); ++i) {
            const JetSample& s = js[i];
            Vec3 xi = ds.xi(i), A = ds.a(i), B = ds.b(i);
            std::vector<double> f(g.phys_size());
            std::array<std::vector<double>, 3> gf;
            for (auto& x : gf) x.assign(g.phys_size(), 0.0);
            detail::for_points(g, [&](std::size_t p) {
                f[p] = ps * s.psi[p] * s.Phi[p];
                for (int a = 0; a < 3; ++a)
                    gf[a][p] = ps * c * (s.dpsi[p] * s.Phi[p] * xi[a] + s.psi[p] * (s.dPhi_a[p] * A[a] + s.dPhi_b[p] * B[a]));
            });
            ScalarField ab = to_spec(detail::scalar_phys(P.abar[i], g));
            acc += amplitude_corrector(ab, f, gf, xi);
            PhysVector wc = jets_.Wc(i, s);
            detail::for_points(g, [&](std::size_t p) {
                for (int a = 0; a < 3; ++a) acc.v[a][p] += P.abar[i][p] * wc.v[a][p];
            });
        }
        return to_spec(acc);
    }

    //! All summands of R_{q+1} and pi_{q+1} at time t.
    ReynoldsDecomposition decompose(double t) const
    {
        const Grid3& g = grid();
        const double h = cfg_.h, mu = cfg_.scales.mu;
        const bool add = mode() == SchemeMode::additive;
        std::array<std::shared_ptr<const PerturbationAt>, 5> P;
        for (int j = 0; j < 5; ++j) P[j] = perturbation(t + (j - 2) * h);
        const PerturbationAt& C = *P[2];
        const MollifiedStage& M = C.moll;
        ReynoldsDecomposition d;
        d.t = t;

        std::array<FourierField3, 5> wpc;
        for (int j = 0; j < 5; ++j) wpc[j] = P[j]->w_p + P[j]->w_c;
        d.dt_wpc = detail::fd4<FourierField3>({&wpc[0], &wpc[1], &wpc[2], &wpc[3], &wpc[4]}, h);
        d.dt_S = detail::fd4<FourierField3>({&P[0]->S, &P[1]->S, &P[2]->S, &P[3]->S, &P[4]->S}, h);
        const std::size_t D = jets_.size();
        d.dt_a2.resize(D);
        for (std::size_t i = 0; i < D; ++i) d.dt_a2[i] = detail::fd4({&P[0]->a2[i], &P[1]->a2[i], &P[2]->a2[i], &P[3]->a2[i], &P[4]->a2[i]}, h);

        const FourierField3 w = C.w();
        d.v = M.v_l + w;
        d.v.time_tag = t;
        const double Yl = add ? 1.0 : M.upsilon_l;
        const PhysVector wp = to_phys(C.w_p), wct = to_phys(C.w_c + C.w_t), wph = to_phys(w);
        PhysVector base = to_phys(M.v_l);
        if (add) base += to_phys(M.z_l);

        // linear
        FourierField3 lin = fractional_laplacian(w, m()) + d.dt_wpc;
        if (!add) lin += 0.5 * w;
        d.R_linear = inverse_divergence(lin) + detail::traceless_outer(base, wph, 2.0 * Yl);
        d.pi_linear = to_spec(detail::dot(base, wph, 2.0 * Yl / 3.0));

        // corrector: A (x) w + w_p (x) A with A = w_c + w_t
        {
            PhysSym t1 = detail::outer_sym(wct, wct, Yl);
            t1 += detail::outer_sym(wct, wp, 2.0 * Yl);
            PhysScalar tr(g);
            detail::for_points(g, [&](std::size_t p) { tr.v[0][p] = (t1.v[0][p] + t1.v[3][p] + t1.v[5][p]) / 3.0; });
            detail::remove_trace(t1);
            d.R_corrector = to_spec(t1);
            d.pi_corrector = to_spec(tr);
        }

        // oscillation
        {
            auto js = samples(t);
            PhysVector ox(g), ot(g);
            const auto& ds = jets_.directions();
            for (std::size_t i = 0; i < D; ++i) {
                Vec3 xi = ds.xi(i);
                PhysScalar da = to_phys(detail::directional(to_spec(detail::scalar_phys(C.a2[i], g)), xi));
                const JetSample& s = js[i];
                detail::for_points(g, [&](std::size_t p) {
                    double pp = s.psi[p] * s.psi[p] * s.phi[p] * s.phi[p];
                    double x1 = da.v[0][p] * (pp - 1.0), x2 = -d.dt_a2[i][p] * pp / mu;
                    for (int a = 0; a < 3; ++a) {
                        ox.v[a][p] += x1 * xi[a];
                        ot.v[a][p] += x2 * xi[a];
                    }
                });
            }
            d.R_osc_x = inverse_divergence(to_spec(ox));
            d.R_osc_t = inverse_divergence(to_spec(ot));
            d.pi_osc = to_spec(C.rho) + inverse_laplacian_div((1.0 / mu) * d.dt_S);
        }

        // second commutator
        {
            const PhysVector vp = to_phys(d.v);
            if (add) {
                const PhysVector z = to_phys(M.z), zl = to_phys(M.z_l);
                PhysVector dz = z - zl;
                PhysSym t2 = detail::outer_sym(vp, dz, 2.0);
                t2 += detail::outer_sym(dz, z);
                t2 += detail::outer_sym(zl, dz);
                // (z - z_l) o z + z_l o (z - z_l) is symmetric in sum; outer_sym symmetrizes each piece
                PhysScalar tr(g);
                detail::for_points(g, [&](std::size_t p) { tr.v[0][p] = (t2.v[0][p] + t2.v[3][p] + t2.v[5][p]) / 3.0; });
                detail::remove_trace(t2);
                d.R_comm2 = to_spec(t2);
                d.pi_comm2 = to_spec(tr);
            } else {
                const double dY = M.upsilon - M.upsilon_l;
                d.R_comm2 = detail::traceless_outer(vp, vp, dY);
                d.pi_comm2 = to_spec(detail::dot(vp, vp, dY / 3.0));
            }
        }

        d.R_comm1 = M.R_comm1;
        d.pi_l = M.pi_l;
        d.R = d.R_linear + d.R_corrector + d.R_osc_x + d.R_osc_t + d.R_comm2 + d.R_comm1;
        d.pi = d.pi_l - d.pi_linear - d.pi_corrector - d.pi_osc - d.pi_comm2;
        d.R.time_tag = t;
        d.pi.time_tag = t;
        return d;
    }

    //! Identity residuals at time t.
    IdentityReport identities(double t) const
    {
        const Grid3& g = grid();
        const bool add = mode() == SchemeMode::additive;
        const double mu = cfg_.scales.mu;
        auto Pc = perturbation(t);
        const PerturbationAt& C = *Pc;
        const MollifiedStage& M = C.moll;
        const double Yl = add ? 1.0 : M.upsilon_l;
        const auto& ds = jets_.directions();
        const std::size_t D = jets_.size();
        auto js = samples(t);
        IdentityReport r;
        r.t = t;
        r.max_ratio = C.max_ratio;
        r.r_dom = r_dom_;
        const PhysSym Rl = to_phys(M.R_l);

        // amplitude identity and pointwise oscillation identity
        {
            std::vector<double> e1(g.n, 0.0), s1(g.n, 0.0), e2(g.n, 0.0), s2(g.n, 0.0), mr(g.n, 1e300);
            const std::size_t slab = std::size_t(g.n) * g.n;
            parallel_for(g.n, [&](int x) {
                for (std::size_t p = x * slab; p < (x + 1) * slab; ++p) {
                    Sym6 lhs{}, rhs = detail::sym_at(Rl, p), wpw{}, osc{};
                    const double rho = C.rho.v[0][p];
                    for (double& e : rhs) e = -e;
                    rhs[0] += rho;
                    rhs[3] += rho;
                    rhs[5] += rho;
                    double wp[3] = {0, 0, 0};
                    for (std::size_t i = 0; i < D; ++i) {
                        Vec3 xi = ds.xi(i);
                        const double ab2 = C.abar[i][p] * C.abar[i][p];
                        const double pp = js[i].psi[p] * js[i].psi[p] * js[i].phi[p] * js[i].phi[p];
                        const double amp = C.abar[i][p] * js[i].psi[p] * js[i].phi[p];
                        for (int a = 0; a < 3; ++a) wp[a] += amp * xi[a];
                        for (int a = 0; a < 3; ++a)
                            for (int b = a; b < 3; ++b) {
                                lhs[sym_index(a, b)] += ab2 * xi[a] * xi[b];
                                osc[sym_index(a, b)] += Yl * ab2 * (pp - 1.0) * xi[a] * xi[b];
                            }
                    }
                    for (int a = 0; a < 3; ++a)
                        for (int b = a; b < 3; ++b) wpw[sym_index(a, b)] = Yl * wp[a] * wp[b];
                    Sym6 d1, d2;
                    for (int k = 0; k < 6; ++k) {
                        d1[k] = Yl * lhs[k] - rhs[k];
                        d2[k] = wpw[k] + Rl.v[k][p] - osc[k] - (k == 0 || k == 3 || k == 5 ? rho : 0.0);
                    }
                    e1[x] = std::max(e1[x], frobenius(d1));
                    s1[x] = std::max(s1[x], frobenius(rhs));
                    e2[x] = std::max(e2[x], frobenius(d2));
                    s2[x] = std::max(s2[x], frobenius(wpw) + rho);
                    mr[x] = std::min(mr[x], rho / C.pump_scale);
                }
            });
            double E1 = 0, S1 = 0, E2 = 0, S2 = 0, MR = 1e300;
            for (int x = 0; x < g.n; ++x) {
                E1 = std::max(E1, e1[x]);
                S1 = std::max(S1, s1[x]);
                E2 = std::max(E2, e2[x]);
                S2 = std::max(S2, s2[x]);
                MR = std::min(MR, mr[x]);
            }
            r.amplitude = E1 / S1;
            r.oscillation_pw = E2 / S2;
            r.min_rho_over_scale = MR;
        }

        // curl curl route vs pointwise corrector formula
        {
            FourierField3 cc = C.w_p + C.w_c;
            FourierField3 wcf = corrector_formula(C, js);
            r.curl_curl = rel_l2(C.w_p + wcf, cc);
        }

        ReynoldsDecomposition d = decompose(t);
        const FourierField3 dwt = (-1.0 / mu) * leray_project(remove_null_modes(d.dt_S));

        // time part of the oscillation: d_t w_t + sum P(a^2 div(W (x) W)) = grad pi_1 - mu^{-1} sum P(d_t a^2 phi^2 psi^2 xi)
        {
            PhysVector adiv(g), tdiv(g);
            for (std::size_t i = 0; i < D; ++i) {
                Vec3 xi = ds.xi(i);
                PhysSym ww(g);
                const JetSample& s = js[i];
                detail::for_points(g, [&](std::size_t p) {
                    double pp = s.psi[p] * s.psi[p] * s.phi[p] * s.phi[p];
                    for (int a = 0; a < 3; ++a)
                        for (int b = a; b < 3; ++b) ww.v[sym_index(a, b)][p] = pp * xi[a] * xi[b];
                });
                PhysVector dv = to_phys(divergence(to_spec(ww)));
                detail::for_points(g, [&](std::size_t p) {
                    double pp = s.psi[p] * s.psi[p] * s.phi[p] * s.phi[p];
                    for (int a = 0; a < 3; ++a) {
                        adiv.v[a][p] += C.a2[i][p] * dv.v[a][p];
                        tdiv.v[a][p] += d.dt_a2[i][p] * pp * xi[a] / mu;
                    }
                });
            }
            FourierField3 A = remove_null_modes(to_spec(adiv));
            FourierField3 pi1 = gradient(inverse_laplacian_div((1.0 / mu) * d.dt_S));
            FourierField3 lhs = dwt + A;
            FourierField3 rhs = pi1 - remove_null_modes(to_spec(tdiv));
            r.time_osc = l2(lhs - rhs) / std::max(l2(dwt), l2(A));
        }

        // full oscillation identity
        {
            auto [D, scale] = defect(C, d);
            r.oscillation = l2(D) / scale;
        }

        // divergence and mean
        {
            auto grad_norm = [](const FourierField3& f) {
                double s = 0.0;
                for (int a = 0; a < 3; ++a) {
                    ScalarField c = components<1>(f, {a});
                    s += std::pow(l2(gradient(c)), 2);
                }
                return std::sqrt(s);
            };
            FourierField3 wpc = C.w_p + C.w_c, w = C.w();
            r.div_wpc = l2(divergence(wpc)) / grad_norm(wpc);
            r.div_w = l2(divergence(w)) / grad_norm(w);
            double mean = 0.0;
            for (int a = 0; a < 3; ++a) mean += std::norm(w.c[a][0]);
            r.mean_w = std::sqrt(mean) * std::pow(kTwoPi, 1.5) / l2(w);
        }
        return r;
    }

    //! div(Upsilon_l w_p (x) w_p + R_l) + d_t w_t - div R_osc - grad pi_osc at
    //! time t. Every other part of the new stress is exact algebra, so the
    //! Leray part of this field is the stage residual up to time stencil error.
    FourierField3 oscillation_defect(double t) const { return defect(*perturbation(t), decompose(t)).first; }

private:
    static constexpr std::size_t kCacheSize = 10;

    std::pair<FourierField3, double> defect(const PerturbationAt& C, const ReynoldsDecomposition& d) const
    {
        const double Yl = mode() == SchemeMode::additive ? 1.0 : C.moll.upsilon_l;
        const FourierField3 dwt = (-1.0 / cfg_.scales.mu) * leray_project(remove_null_modes(d.dt_S));
        PhysVector wp = to_phys(C.w_p);
        SymTensorField3 T = to_spec(detail::outer_sym(wp, wp, Yl)) + C.moll.R_l;
        FourierField3 divT = divergence(T);
        FourierField3 D = divT + dwt - divergence(d.R_osc_x + d.R_osc_t) - gradient(d.pi_osc);
        return {std::move(D), l2(divT)};
    }

    PerturbationAt build_perturbation(double t) const
    {
        const Grid3& g = grid();
        const std::size_t N = g.phys_size(), D = jets_.size();
        PerturbationAt P;
        P.moll = mollify_at(t);
        const MollifiedStage& M = P.moll;
        const PhysSym Rl = to_phys(M.R_l);
        P.pump_scale = cfg_.c_R * cfg_.delta_q1 * time_weight(mode(), cfg_.L, t);
        P.rho = energy_pump_rho(Rl, P.pump_scale, r_dom_);
        Amplitudes A = amplitudes(P.rho, Rl, gs_, cfg_.volume_normalized_amplitudes, M.upsilon_l);
        P.max_ratio = A.max_ratio;
        P.abar = std::move(A.abar);
        P.a2.assign(D, std::vector<double>(N));
        for (std::size_t i = 0; i < D; ++i)
            for (std::size_t p = 0; p < N; ++p) P.a2[i][p] = A.a[i][p] * A.a[i][p];

        auto js = samples(t);
        const auto& ds = jets_.directions();
        const double ps = jets_.potential_scale();
        PhysVector wp(g), U(g), S(g);
        for (std::size_t i = 0; i < D; ++i) {
            Vec3 xi = ds.xi(i);
            const JetSample& s = js[i];
            const auto& ab = P.abar[i];
            const auto& a2 = P.a2[i];
            detail::for_points(g, [&](std::size_t p) {
                double W = ab[p] * s.psi[p] * s.phi[p];
                double V = ab[p] * ps * s.psi[p] * s.Phi[p];
                double T = a2[p] * s.psi[p] * s.psi[p] * s.phi[p] * s.phi[p];
                for (int a = 0; a < 3; ++a) {
                    wp.v[a][p] += W * xi[a];
                    U.v[a][p] += V * xi[a];
                    S.v[a][p] += T * xi[a];
                }
            });
        }
        P.w_p = to_spec(wp);
        P.w_c = curl(curl(to_spec(U))) - P.w_p;
        P.S = to_spec(S);
        P.w_t = (-1.0 / cfg_.scales.mu) * leray_project(remove_null_modes(P.S));
        for (auto* f : {&P.w_p, &P.w_c, &P.w_t, &P.S}) f->time_tag = t;
        return P;
    }

    std::shared_ptr<const Stage> prev_;
    StageConfig cfg_;
    GammaSolver gs_;
    JetFamily jets_;
    detail::SpaceFilter filter_;
    TimeMollifier tm_;
    double r_dom_ = 0.5;
    mutable std::mutex mu_;
    mutable std::vector<std::pair<double, std::shared_ptr<const PerturbationAt>>> cache_;
};

inline std::shared_ptr<PerturbedStage> iterate(std::shared_ptr<const Stage> prev, const StageConfig& cfg)
{
    return std::make_shared<PerturbedStage>(std::move(prev), cfg);
}

// ---------------------------------------------------------------- stencil snapshots and residual

//! A stage materialized on the 5-point stencil t_c + (j - 2) h.
struct StagePair {
    SchemeMode mode = SchemeMode::additive;
    int q = 0;
    double t_c = 0.0, h = 1e-3, m = 1.0;
    std::array<FourierField3, 5> v;
    std::array<SymTensorField3, 5> R;
    std::array<ScalarField, 5> pi;
    bool has_pi = true;
    AuxPath aux;
    double time(int j) const { return t_c + (j - 2) * h; }
    const Grid3& grid() const { return v[2].grid; }
};

inline StagePair materialize(const Stage& s, double t_c, double h)
{
    if (!(h > 0.0)) throw std::invalid_argument("stencil step must be positive");
    StagePair p;
    p.mode = s.mode();
    p.q = s.q();
    p.t_c = t_c;
    p.h = h;
    p.m = s.m();
    p.aux = s.aux();
    for (int j = 0; j < 5; ++j) {
        StageState st = s.state(p.time(j));
        p.v[j] = std::move(st.v);
        p.R[j] = std::move(st.R);
        p.pi[j] = std::move(st.pi);
    }
    return p;
}

struct ResidualReport {
    double l2 = 0.0, hm1 = 0.0;   //!< Leray-projected residual
    double relative = 0.0;        //!< l2 / largest term norm
    double gradient_l2 = 0.0;     //!< gradient part before the pressure
    double pressure_l2 = 0.0;     //!< gradient part after adding grad pi
    double pressure_relative = 0.0;
    double dt_v = 0.0, damping = 0.0, dissipation = 0.0, nonlinear = 0.0, stress = 0.0; //!< term L2 norms
    double divergence = 0.0;      //!< ||div v|| relative to ||grad v||
};

//! LHS - RHS of the stage equation at the stencil centre, time derivative by
//! 4th-order differences. Additive: d_t v + (-Delta)^m v + div((v+z)(x)(v+z))
//! + grad pi - div R. Multiplicative: d_t v + v/2 + (-Delta)^m v
//! + Upsilon div(v (x) v) + grad p - div R.
inline ResidualReport residual(const StagePair& s)
{
    const Grid3& g = s.grid();
    const double t = s.t_c;
    ResidualReport r;
    FourierField3 dv = detail::fd4<FourierField3>({&s.v[0], &s.v[1], &s.v[2], &s.v[3], &s.v[4]}, s.h);
    const FourierField3& v = s.v[2];
    FourierField3 diss = fractional_laplacian(v, s.m);
    PhysVector u = to_phys(v);
    double coef = 1.0;
    if (s.mode == SchemeMode::additive)
        u += to_phys(s.aux.z(t, g));
    else
        coef = s.aux.upsilon(t);
    FourierField3 nl = divergence(to_spec(detail::outer_sym(u, u, coef)));
    FourierField3 st = divergence(s.R[2]);
    FourierField3 E = dv + diss + nl - st;
    if (s.mode == SchemeMode::multiplicative) {
        E += 0.5 * v;
        r.damping = 0.5 * l2(v);
    }
    FourierField3 P = leray_project(E);
    FourierField3 G = E - P;
    r.l2 = l2(P);
    r.hm1 = hs_norm(P, -1.0);
    r.dt_v = l2(dv);
    r.dissipation = l2(diss);
    r.nonlinear = l2(nl);
    r.stress = l2(st);
    double scale = std::max({r.dt_v, r.dissipation, r.nonlinear, r.stress, r.damping});
    r.relative = r.l2 / scale;
    r.gradient_l2 = l2(G);
    if (s.has_pi) {
        r.pressure_l2 = l2(G + gradient(s.pi[2]));
        r.pressure_relative = r.pressure_l2 / scale;
    }
    double gn = 0.0;
    for (int a = 0; a < 3; ++a) gn += std::pow(l2(gradient(components<1>(v, {a}))), 2);
    r.divergence = gn > 0.0 ? l2(divergence(v)) / std::sqrt(gn) : 0.0;
    return r;
}

// ---------------------------------------------------------------- stage report

struct StageReport {
    int q = 0;
    SchemeMode mode = SchemeMode::additive;
    double t_c = 0.0;
    IdentityReport identities;
    ResidualReport residual;
    double v_increment_l2 = 0.0;  //!< ||v_{q+1} - v_q||_L2 at t_c
    double increment_bound = 0.0; //!< M_0(t)^{1/2} delta_{q+1}^{1/2} (times m_L when multiplicative)
    double stress_l1 = 0.0, prev_stress_l1 = 0.0;
    std::vector<std::pair<std::string, double>> stress_terms_l1;
};

inline StageReport stage_report(const PerturbedStage& s, double t_c, const StagePair* pair = nullptr)
{
    StageReport r;
    r.q = s.q();
    r.mode = s.mode();
    r.t_c = t_c;
    r.identities = s.identities(t_c);
    StagePair local;
    if (!pair) {
        local = materialize(s, t_c, s.config().h);
        pair = &local;
    }
    r.residual = residual(*pair);
    const FourierField3& v1 = pair->v[2];
    StageState prev = s.previous().state(t_c);
    r.v_increment_l2 = l2(v1 - prev.v);
    const StageConfig& c = s.config();
    r.increment_bound = std::sqrt(time_weight(s.mode(), c.L, t_c) * c.delta_q1) * (s.mode() == SchemeMode::multiplicative ? m_L(c.L) : 1.0);
    r.stress_l1 = lp_norm(to_phys(pair->R[2]), 1.0);
    r.prev_stress_l1 = lp_norm(to_phys(prev.R), 1.0);
    ReynoldsDecomposition d = s.decompose(t_c);
    for (auto [name, f] : std::vector<std::pair<std::string, const SymTensorField3*>>{{"linear", &d.R_linear},
                                                                                     {"corrector", &d.R_corrector},
                                                                                     {"oscillation_x", &d.R_osc_x},
                                                                                     {"oscillation_t", &d.R_osc_t},
                                                                                     {"commutator1", &d.R_comm1},
                                                                                     {"commutator2", &d.R_comm2}})
        r.stress_terms_l1.emplace_back(name, lp_norm(to_phys(*f), 1.0));
    return r;
}

} // namespace stochci
