#pragma once

#include "stochci/errors.hpp"
#include "stochci/field.hpp"
#include "stochci/geometry.hpp"
#include "stochci/norms.hpp"
#include "stochci/ops.hpp"
#include "stochci/parallel.hpp"
#include "stochci/patch.hpp"
#include "stochci/profiles.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace stochci {

//! Jet scales. lambda * r_perp must be a positive integer.
struct JetScales {
    double r_perp = 0.25;
    double r_par = 0.5;
    double lambda = 8.0;
    double mu = 1.0;
};

struct PairClearance {
    std::size_t a = 0, b = 0;
    double clearance = 0.0; //!< half the native distance between the two axis families
};

//! Native shifts: the jet for direction i is centred on lines through
//! 2 pi alpha_i / c, with c = n_star lambda r_perp.
struct ShiftPlacement {
    std::vector<Vec3> alpha;
    std::vector<PairClearance> pairs;
    double min_clearance = 0.0; //!< supports are disjoint for every r_perp below this
};

struct PlacementError : std::runtime_error {
    PlacementError(const std::string& what, std::vector<PairClearance> o) : std::runtime_error(what), overlaps(std::move(o)) {}
    std::vector<PairClearance> overlaps;
};

namespace detail {

using IVec3 = std::array<long long, 3>;

inline IVec3 scaled_int(const RVec3& v, int s)
{
    IVec3 r{};
    for (int a = 0; a < 3; ++a) {
        Rational q = v[a] * s;
        if (denominator(q) != 1) throw std::invalid_argument("frame vector not integral after scaling by n_star");
        r[a] = static_cast<long long>(numerator(q));
    }
    return r;
}

inline IVec3 icross(const IVec3& a, const IVec3& b)
{
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline long long idot(const IVec3& a, const IVec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

inline double wrap_pi(double v) { return v - kTwoPi * std::floor((v + kPi) / kTwoPi); }

//! Pitch (in native units) of the set of signed distances between axis lines
//! of directions i and j along their common normal, and that normal.
inline std::pair<double, Vec3> pair_lattice(const DirectionSet& ds, std::size_t i, std::size_t j)
{
    const int s = ds.n_star;
    IVec3 xi = scaled_int(ds.directions[i], s), xj = scaled_int(ds.directions[j], s);
    IVec3 nu = icross(xi, xj); // s^2 (xi x xj)
    double len = std::sqrt(double(idot(nu, nu)));
    if (len == 0.0) throw std::invalid_argument("parallel directions in direction set");
    long long g = 0;
    for (const RVec3* f : {&ds.frame_a[i], &ds.frame_b[i], &ds.frame_a[j], &ds.frame_b[j]})
        g = std::gcd(g, std::llabs(idot(scaled_int(*f, s), nu)));
    if (g == 0) throw std::invalid_argument("degenerate pair lattice");
    // frame . nhat takes values in (g / (s * len)) Z
    double pitch = kTwoPi * double(g) / (double(s) * len);
    return {pitch, {nu[0] / len, nu[1] / len, nu[2] / len}};
}

inline double clearance(double pitch, const Vec3& nhat, const Vec3& dalpha)
{
    double v = kTwoPi * (dalpha[0] * nhat[0] + dalpha[1] * nhat[1] + dalpha[2] * nhat[2]);
    return std::abs(v - pitch * std::round(v / pitch)) / 2.0;
}

} // namespace detail

//! Greedy maximin placement of shifts over {0, ..., d-1}^3 / d. The first
//! direction keeps the zero shift; ties go to the lexicographically first
//! candidate.
inline ShiftPlacement place_shifts(const DirectionSet& ds, int denominator = 6)
{
    const std::size_t m = ds.size();
    std::vector<std::vector<std::pair<double, Vec3>>> lat(m, std::vector<std::pair<double, Vec3>>(m));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            if (i != j) lat[i][j] = detail::pair_lattice(ds, i, j);
    ShiftPlacement p;
    p.alpha.assign(m, Vec3{0, 0, 0});
    for (std::size_t i = 1; i < m; ++i) {
        double best = -1.0;
        Vec3 best_a{0, 0, 0};
        for (int a = 0; a < denominator; ++a)
            for (int b = 0; b < denominator; ++b)
                for (int c = 0; c < denominator; ++c) {
                    Vec3 al{double(a) / denominator, double(b) / denominator, double(c) / denominator};
                    double worst = 1e300;
                    for (std::size_t j = 0; j < i; ++j) {
                        Vec3 d{al[0] - p.alpha[j][0], al[1] - p.alpha[j][1], al[2] - p.alpha[j][2]};
                        worst = std::min(worst, detail::clearance(lat[i][j].first, lat[i][j].second, d));
                    }
                    if (worst > best + 1e-12) {
                        best = worst;
                        best_a = al;
                    }
                }
        p.alpha[i] = best_a;
    }
    p.min_clearance = 1e300;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) {
            Vec3 d{p.alpha[i][0] - p.alpha[j][0], p.alpha[i][1] - p.alpha[j][1], p.alpha[i][2] - p.alpha[j][2]};
            double c = detail::clearance(lat[i][j].first, lat[i][j].second, d);
            p.pairs.push_back({i, j, c});
            p.min_clearance = std::min(p.min_clearance, c);
        }
    return p;
}

//! Rescaled profile values for one direction at each grid point, in native
//! coordinates y = (c(x.xi + mu t), c(x - a).A, c(x - a).B):
//!   psi, dpsi = d psi / d y1, phi, Phi, dPhi_a = d Phi / d y2, dPhi_b = d Phi / d y3.
struct JetSample {
    Grid3 grid;
    double t = 0.0;
    std::vector<double> psi, dpsi, phi, Phi, dPhi_a, dPhi_b;
};

class JetFamily {
public:
    JetFamily(CutoffProfiles profiles, DirectionSet ds, JetScales scales, int shift_denominator = 6)
        : prof_(std::move(profiles)), ds_(std::move(ds)), sc_(scales)
    {
        if (!(sc_.r_perp > 0.0 && sc_.lambda > 0.0 && sc_.mu > 0.0))
            throw std::invalid_argument("jet scales must be positive");
        if (!(sc_.r_perp < sc_.r_par && sc_.r_par < 1.0))
            throw LedgerError("jet scales need r_perp < r_par < 1");
        double k = sc_.lambda * sc_.r_perp;
        kappa_ = std::llround(k);
        if (kappa_ < 1 || std::abs(k - double(kappa_)) > 1e-9 * std::max(1.0, k)) {
            std::ostringstream s;
            s << std::setprecision(17) << "lambda * r_perp = " << k << " is not a positive integer";
            throw LedgerError(s.str());
        }
        c_ = double(ds_.n_star) * double(kappa_);
        place_ = place_shifts(ds_, shift_denominator);
        if (!(sc_.r_perp < place_.min_clearance)) {
            std::vector<PairClearance> bad;
            std::ostringstream s;
            s << "no disjoint shift placement for r_perp = " << sc_.r_perp << "; overlapping pairs:";
            for (const auto& pc : place_.pairs)
                if (pc.clearance <= sc_.r_perp) {
                    bad.push_back(pc);
                    s << " (" << pc.a << "," << pc.b << ")";
                }
            throw PlacementError(s.str(), bad);
        }
        for (std::size_t i = 0; i < ds_.size(); ++i) {
            ixi_.push_back(detail::scaled_int(ds_.directions[i], ds_.n_star));
            ia_.push_back(detail::scaled_int(ds_.frame_a[i], ds_.n_star));
            ib_.push_back(detail::scaled_int(ds_.frame_b[i], ds_.n_star));
        }
    }

    const CutoffProfiles& profiles() const { return prof_; }
    const DirectionSet& directions() const { return ds_; }
    const JetScales& scales() const { return sc_; }
    const ShiftPlacement& placement() const { return place_; }
    std::size_t size() const { return ds_.size(); }
    long long kappa() const { return kappa_; }
    //! Native stretch factor c = n_star lambda r_perp.
    double stretch() const { return c_; }
    //! Time phase speed in native units: d y1 / dt = c mu.
    double phase_speed() const { return c_ * sc_.mu; }
    //! 1 / (n_star lambda)^2, the potential prefactor.
    double potential_scale() const
    {
        double s = ds_.n_star * sc_.lambda;
        return 1.0 / (s * s);
    }

    // rescaled native profiles
    double psi(double y1) const { return prof_.psi(y1 / sc_.r_par) / std::sqrt(sc_.r_par); }
    double dpsi(double y1) const { return prof_.dpsi(y1 / sc_.r_par) / std::pow(sc_.r_par, 1.5); }
    double phi(double u, double v) const { return prof_.phi(u / sc_.r_perp, v / sc_.r_perp) / sc_.r_perp; }
    double Phi(double u, double v) const { return prof_.Phi(u / sc_.r_perp, v / sc_.r_perp) / sc_.r_perp; }
    std::array<double, 2> grad_Phi(double u, double v) const
    {
        auto g = prof_.grad_Phi(u / sc_.r_perp, v / sc_.r_perp);
        double s = sc_.r_perp * sc_.r_perp;
        return {g[0] / s, g[1] / s};
    }

    //! Native offsets (y2, y3) of direction i's shift.
    std::array<double, 2> native_offset(std::size_t i) const
    {
        Vec3 al = place_.alpha[i], a = ds_.a(i), b = ds_.b(i);
        return {kTwoPi * (al[0] * a[0] + al[1] * a[1] + al[2] * a[2]), kTwoPi * (al[0] * b[0] + al[1] * b[1] + al[2] * b[2])};
    }

    //! Profile values of direction i on the grid at time t. Native
    //! coordinates use exact integer arithmetic, so the lattice structure
    //! (periodicity, reflection symmetry) is preserved to the last bit.
    JetSample sample(std::size_t i, const Grid3& g, double t) const
    {
        const int n = g.n;
        JetSample s;
        s.grid = g;
        s.t = t;
        for (auto* v : {&s.psi, &s.dpsi, &s.phi, &s.Phi, &s.dPhi_a, &s.dPhi_b}) v->assign(g.phys_size(), 0.0);
        auto off = native_offset(i);
        const double shift1 = c_ * sc_.mu * t;
        const long long kap = kappa_ % n;
        auto native = [&](const detail::IVec3& w, int x, int y, int z) {
            long long m = w[0] * (x - n / 2) + w[1] * (y - n / 2) + w[2] * (z - n / 2);
            long long r = ((kap * (m % n)) % n + n) % n;
            return kTwoPi * double(r) / n;
        };
        const auto &wx = ixi_[i], &wa = ia_[i], &wb = ib_[i];
        parallel_for(n, [&](int x) {
            for (int y = 0; y < n; ++y)
                for (int z = 0; z < n; ++z) {
                    std::size_t id = g.pidx(x, y, z);
                    double y1 = detail::wrap_pi(native(wx, x, y, z) + shift1);
                    double y2 = detail::wrap_pi(native(wa, x, y, z) - off[0]);
                    double y3 = detail::wrap_pi(native(wb, x, y, z) - off[1]);
                    s.psi[id] = psi(y1);
                    s.dpsi[id] = dpsi(y1);
                    if (std::abs(y2) < sc_.r_perp && std::abs(y3) < sc_.r_perp) {
                        s.phi[id] = phi(y2, y3);
                        s.Phi[id] = Phi(y2, y3);
                        auto gp = grad_Phi(y2, y3);
                        s.dPhi_a[id] = gp[0];
                        s.dPhi_b[id] = gp[1];
                    }
                }
        });
        return s;
    }

    //! W = xi psi phi.
    PhysVector W(std::size_t i, const JetSample& s) const
    {
        Vec3 xi = ds_.xi(i);
        PhysVector w(s.grid);
        for (std::size_t p = 0; p < s.psi.size(); ++p) {
            double v = s.psi[p] * s.phi[p];
            for (int a = 0; a < 3; ++a) w.v[a][p] = xi[a] * v;
        }
        return w;
    }
    //! W^c = r_perp^2 psi' (A d2 Phi + B d3 Phi), so that W + W^c = curl curl V.
    PhysVector Wc(std::size_t i, const JetSample& s) const
    {
        Vec3 A = ds_.a(i), B = ds_.b(i);
        double k = sc_.r_perp * sc_.r_perp;
        PhysVector w(s.grid);
        for (std::size_t p = 0; p < s.psi.size(); ++p) {
            double ca = k * s.dpsi[p] * s.dPhi_a[p], cb = k * s.dpsi[p] * s.dPhi_b[p];
            for (int a = 0; a < 3; ++a) w.v[a][p] = A[a] * ca + B[a] * cb;
        }
        return w;
    }
    //! V = xi psi Phi / (n_star lambda)^2.
    PhysVector V(std::size_t i, const JetSample& s) const
    {
        Vec3 xi = ds_.xi(i);
        double k = potential_scale();
        PhysVector w(s.grid);
        for (std::size_t p = 0; p < s.psi.size(); ++p) {
            double v = k * s.psi[p] * s.Phi[p];
            for (int a = 0; a < 3; ++a) w.v[a][p] = xi[a] * v;
        }
        return w;
    }
    PhysVector W(std::size_t i, const Grid3& g, double t) const { return W(i, sample(i, g, t)); }
    PhysVector Wc(std::size_t i, const Grid3& g, double t) const { return Wc(i, sample(i, g, t)); }
    PhysVector V(std::size_t i, const Grid3& g, double t) const { return V(i, sample(i, g, t)); }

    //! Samples of every direction, built in parallel over directions.
    std::vector<JetSample> sample_all(const Grid3& g, double t) const
    {
        std::vector<JetSample> out(size());
        for (std::size_t i = 0; i < size(); ++i) out[i] = sample(i, g, t);
        return out;
    }

    //! Smallest even n giving at least `per_radius` grid points across the
    //! tube radius r_perp / c in physical units.
    int min_resolving_n(double per_radius = 4.0) const
    {
        double need = per_radius * kTwoPi * c_ / sc_.r_perp;
        int n = int(std::ceil(need));
        return n + (n % 2);
    }
    //! Throws ResolutionError if the grid cannot resolve the tube radius.
    void require_resolution(const Grid3& g, double per_radius = 4.0) const
    {
        int m = min_resolving_n(per_radius);
        if (g.n < m) {
            std::ostringstream s;
            s << "grid n = " << g.n << " does not resolve the jet radius; minimum n = " << m;
            throw ResolutionError(s.str(), m);
        }
    }
    //! Lenient guard: throws only if some direction has no grid point inside
    //! its support.
    void require_support_hit(const Grid3& g) const
    {
        for (std::size_t i = 0; i < size(); ++i) {
            auto s = sample(i, g, 0.0);
            bool hit = false;
            for (double v : s.Phi)
                if (v != 0.0) {
                    hit = true;
                    break;
                }
            if (!hit) {
                int m = min_resolving_n(1.0);
                std::ostringstream o;
                o << "grid n = " << g.n << " has no point inside the support of jet " << i << "; minimum n = " << m;
                throw ResolutionError(o.str(), m);
            }
        }
    }

private:
    CutoffProfiles prof_;
    DirectionSet ds_;
    JetScales sc_;
    ShiftPlacement place_;
    long long kappa_ = 1;
    double c_ = 1.0;
    std::vector<detail::IVec3> ixi_, ia_, ib_;
};

//! Native patch grids holding the rescaled profiles; every function on them
//! is compactly supported inside, so spectral derivatives and trapezoid
//! integrals are accurate to roundoff.
struct JetPatch {
    int n1 = 2048, n2 = 1024;
    double h1 = 0.0, h2 = 0.0; //!< half widths
    std::vector<double> psi, dpsi;              //!< 1D, analytic
    std::vector<double> phi, Phi, dPhi_a, dPhi_b; //!< 2D row-major, analytic

    JetPatch(const JetFamily& f, int n1_ = 2048, int n2_ = 1024, double pad = 1.2) : n1(n1_), n2(n2_)
    {
        h1 = pad * f.scales().r_par;
        h2 = pad * f.scales().r_perp;
        psi.resize(n1);
        dpsi.resize(n1);
        for (int j = 0; j < n1; ++j) {
            double y = patch::coord(j, n1, h1);
            psi[j] = f.psi(y);
            dpsi[j] = f.dpsi(y);
        }
        std::size_t m = std::size_t(n2) * n2;
        phi.resize(m);
        Phi.resize(m);
        dPhi_a.resize(m);
        dPhi_b.resize(m);
        for (int a = 0; a < n2; ++a)
            for (int b = 0; b < n2; ++b) {
                double u = patch::coord(a, n2, h2), v = patch::coord(b, n2, h2);
                std::size_t id = std::size_t(a) * n2 + b;
                phi[id] = f.phi(u, v);
                Phi[id] = f.Phi(u, v);
                auto g = f.grad_Phi(u, v);
                dPhi_a[id] = g[0];
                dPhi_b[id] = g[1];
            }
    }

    std::vector<double> d1(const std::vector<double>& f, int order) const { return patch::derivative_1d(f, h1, order); }
    std::vector<double> d2(const std::vector<double>& f, int ou, int ov) const
    {
        return patch::derivative_2d(f, n2, h2, ou, ov);
    }
    double norm1(const std::vector<double>& f) const { return patch::l2_1d(f, h1); }
    double norm2(const std::vector<double>& f) const { return patch::l2_2d(f, n2, h2); }
};

struct JetIdentityReport {
    double phi_sq_error = 0.0;      //!< |int phi^2 - 4 pi^2| / 4 pi^2
    double psi_sq_error = 0.0;      //!< |int psi^2 - 2 pi| / 2 pi
    double phi_mean = 0.0;          //!< int phi
    double psi_mean = 0.0;          //!< int psi
    double div_free = 0.0;          //!< (i) relative L2 bound on div(W + W^c)
    double curl_curl = 0.0;         //!< (ii) relative L2 bound on curl curl V - (W + W^c)
    double div_ww = 0.0;            //!< (iii) relative L2 of div(W (x) W) - mu^-1 d_t(phi^2 psi^2 xi)
    double mean_ww_error = 0.0;     //!< max over xi of Frobenius |avg W (x) W - xi (x) xi|
    double reconstruct_id = 0.0;    //!< (iv) at R = Id
    double reconstruct_worst = 0.0; //!< (iv) worst over the sampled admissible R
    double min_clearance = 0.0;
    double r_perp = 0.0;
};

namespace detail {

inline double sub_norm1(const JetPatch& p, const std::vector<double>& a, const std::vector<double>& b)
{
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return p.norm1(d);
}
inline double sub_norm2(const JetPatch& p, const std::vector<double>& a, const std::vector<double>& b, double sb = 1.0)
{
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - sb * b[i];
    return p.norm2(d);
}

} // namespace detail

//! Checks the jet identities in native coordinates on patch grids. The map
//! x -> y is measure preserving on the torus and every residual is a sum of
//! separable terms, so each relative L2 residual on T^3 is bounded by the
//! triangle inequality over those terms.
inline JetIdentityReport verify_jet_identities(const JetFamily& f, int samples = 200, std::uint64_t seed = 11, int n1 = 2048,
                                               int n2 = 1024)
{
    JetIdentityReport r;
    const auto& prof = f.profiles();
    const double fourpi2 = 4.0 * kPi * kPi;
    r.phi_sq_error = std::abs(prof.phi_sq_integral() - fourpi2) / fourpi2;
    r.psi_sq_error = std::abs(prof.psi_sq_integral() - kTwoPi) / kTwoPi;
    r.phi_mean = prof.phi_integral();
    r.psi_mean = integrate([&](double t) { return prof.psi(t); }, -1.0, 1.0, 64);
    r.min_clearance = f.placement().min_clearance;
    r.r_perp = f.scales().r_perp;

    JetPatch p(f, n1, n2);
    const double rp2 = f.scales().r_perp * f.scales().r_perp;
    auto dpsi_s = p.d1(p.psi, 1);
    auto lap_Phi = p.d2(p.Phi, 2, 0);
    {
        auto l2 = p.d2(p.Phi, 0, 2);
        for (std::size_t i = 0; i < lap_Phi.size(); ++i) lap_Phi[i] += l2[i];
    }
    auto div_c = p.d2(p.dPhi_a, 1, 0);
    {
        auto l2 = p.d2(p.dPhi_b, 0, 1);
        for (std::size_t i = 0; i < div_c.size(); ++i) div_c[i] += l2[i];
    }
    const double n_psi = p.norm1(p.psi), n_dpsi = p.norm1(p.dpsi), n_phi = p.norm2(p.phi);
    const double e_dpsi = detail::sub_norm1(p, dpsi_s, p.dpsi);

    // (i) div(W + W^c) = c [ (psi'_s - psi') phi + psi' (phi + r^2 div_s grad Phi) ]
    {
        std::vector<double> t2(div_c.size());
        for (std::size_t i = 0; i < t2.size(); ++i) t2[i] = p.phi[i] + rp2 * div_c[i];
        r.div_free = (e_dpsi * n_phi + n_dpsi * p.norm2(t2)) / (n_dpsi * n_phi);
    }
    // (ii) curl curl V - (W + W^c), component by component in the frame
    {
        std::vector<double> t(lap_Phi.size());
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = -rp2 * lap_Phi[i] - p.phi[i];
        double ex = n_psi * p.norm2(t);
        auto d2a = p.d2(p.Phi, 1, 0), d2b = p.d2(p.Phi, 0, 1);
        double ea = rp2 * (e_dpsi * p.norm2(d2a) + n_dpsi * detail::sub_norm2(p, d2a, p.dPhi_a));
        double eb = rp2 * (e_dpsi * p.norm2(d2b) + n_dpsi * detail::sub_norm2(p, d2b, p.dPhi_b));
        r.curl_curl = std::sqrt(ex * ex + ea * ea + eb * eb) / (n_psi * n_phi);
    }
    // (iii) div(W (x) W) - mu^-1 d_t(phi^2 psi^2 xi) = c phi^2 ((psi^2)'_s - 2 psi psi') xi
    {
        std::vector<double> sq(p.n1), an(p.n1);
        for (int j = 0; j < p.n1; ++j) {
            sq[j] = p.psi[j] * p.psi[j];
            an[j] = 2.0 * p.psi[j] * p.dpsi[j];
        }
        auto ds = p.d1(sq, 1);
        r.div_ww = detail::sub_norm1(p, ds, an) / p.norm1(an);
    }
    // (iv) average of W (x) W is xi (x) xi times the two patch quadratures
    const double m_psi = patch::integral_1d([&] {
        std::vector<double> s(p.n1);
        for (int j = 0; j < p.n1; ++j) s[j] = p.psi[j] * p.psi[j];
        return s;
    }(), p.h1) / kTwoPi;
    const double m_phi = patch::integral_2d([&] {
        std::vector<double> s(p.phi.size());
        for (std::size_t j = 0; j < s.size(); ++j) s[j] = p.phi[j] * p.phi[j];
        return s;
    }(), p.n2, p.h2) / fourpi2;
    const double m = m_psi * m_phi;
    for (std::size_t x = 0; x < f.size(); ++x) {
        Vec3 xi = f.directions().xi(x);
        Sym6 d{};
        for (int a = 0; a < 3; ++a)
            for (int b = a; b < 3; ++b) d[sym_index(a, b)] = (m - 1.0) * xi[a] * xi[b];
        r.mean_ww_error = std::max(r.mean_ww_error, frobenius(d));
    }
    GammaSolver gs(f.directions());
    auto recon = [&](const Sym6& R) {
        auto g = gs.gamma(R);
        for (auto& v : g) v *= std::sqrt(m);
        Sym6 rec = gs.reconstruct(g), d;
        for (int e = 0; e < 6; ++e) d[e] = rec[e] - R[e];
        return frobenius(d);
    };
    r.reconstruct_id = recon(identity6());
    std::mt19937_64 rng(seed);
    r.reconstruct_worst = r.reconstruct_id;
    for (int s = 0; s < samples; ++s) {
        Sym6 R = random_ball_point(rng, f.directions().positivity_radius);
        R[0] += 1.0;
        R[3] += 1.0;
        R[5] += 1.0;
        r.reconstruct_worst = std::max(r.reconstruct_worst, recon(R));
    }
    return r;
}

//! Diagnostics of the sampled jets on a 3D grid at time t. These include
//! aliasing of the grid quadrature and are reported separately from the
//! native-coordinate identities.
struct JetGridDiagnostics {
    int n = 0;
    double mean_w = 0.0;          //!< max over xi, components of |grid mean of W|
    double mean_ww_error = 0.0;   //!< max over xi of Frobenius |grid mean W (x) W - xi (x) xi|
    double div_free = 0.0;        //!< max over xi of relative L2 of spectral div(W + W^c)
    double curl_curl = 0.0;       //!< max over xi of relative L2 of spectral curl curl V - (W + W^c)
    double support_product = 0.0; //!< max over pairs and points of |Phi_xi Phi_xi'|
    double w_product = 0.0;       //!< max over pairs and points of |W_xi (x) W_xi'|
};

inline JetGridDiagnostics jet_grid_diagnostics(const JetFamily& f, const Grid3& g, double t)
{
    JetGridDiagnostics d;
    d.n = g.n;
    const std::size_t np = g.phys_size();
    const double inv = 1.0 / double(np);
    // directions are processed one at a time; overlaps are detected against
    // the first owner of each point
    std::vector<signed char> owner(np, -1);
    std::vector<double> owner_Phi(np, 0.0), owner_w(np, 0.0);
    for (std::size_t x = 0; x < f.size(); ++x) {
        auto s = f.sample(x, g, t);
        PhysVector w = f.W(x, s), wc = f.Wc(x, s), v = f.V(x, s);
        Vec3 xi = f.directions().xi(x);
        Sym6 m{};
        for (int a = 0; a < 3; ++a) {
            double sa = 0.0;
            for (double val : w.v[a]) sa += val;
            d.mean_w = std::max(d.mean_w, std::abs(sa * inv));
            for (int b = a; b < 3; ++b) {
                double sab = 0.0;
                for (std::size_t p = 0; p < np; ++p) sab += w.v[a][p] * w.v[b][p];
                m[sym_index(a, b)] = sab * inv - xi[a] * xi[b];
            }
        }
        d.mean_ww_error = std::max(d.mean_ww_error, frobenius(m));
        auto ws = to_spec(w + wc);
        auto wspec = to_spec(w);
        d.div_free = std::max(d.div_free, l2(divergence(ws)) / l2(divergence(wspec)));
        d.curl_curl = std::max(d.curl_curl, l2(curl(curl(to_spec(v))) - ws) / l2(wspec));
        for (std::size_t p = 0; p < np; ++p) {
            if (s.Phi[p] == 0.0) continue;
            double wv = s.psi[p] * s.phi[p];
            if (owner[p] >= 0) {
                Vec3 xo = f.directions().xi(std::size_t(owner[p]));
                d.support_product = std::max(d.support_product, std::abs(owner_Phi[p] * s.Phi[p]));
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j) d.w_product = std::max(d.w_product, std::abs(xo[i] * xi[j] * owner_w[p] * wv));
            } else {
                owner[p] = static_cast<signed char>(x);
                owner_Phi[p] = s.Phi[p];
                owner_w[p] = wv;
            }
        }
    }
    return d;
}

//! Sup difference of W for direction i under translation by 2 pi / kappa
//! along each axis. Needs kappa to divide n.
inline double periodicity_defect(const JetFamily& f, std::size_t i, const Grid3& g, double t)
{
    if (g.n % f.kappa() != 0) throw std::invalid_argument("periodicity check needs kappa to divide n");
    const int n = g.n, sh = int(n / f.kappa());
    PhysVector w = f.W(i, g, t);
    double worst = 0.0;
    for (int axis = 0; axis < 3; ++axis)
        for (int x = 0; x < n; ++x)
            for (int y = 0; y < n; ++y)
                for (int z = 0; z < n; ++z) {
                    int s[3] = {x, y, z};
                    s[axis] = (s[axis] + sh) % n;
                    std::size_t a = g.pidx(x, y, z), b = g.pidx(s[0], s[1], s[2]);
                    for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(w.v[c][a] - w.v[c][b]));
                }
    return worst;
}

//! Measured L^p norm of one jet quantity with its predicted size (implicit
//! constant 1).
struct JetNormEntry {
    std::string quantity; //!< psi, phi, W, Wc, V
    double measured = 0.0;
    double predicted = 0.0;
};

struct JetNormReport {
    int N = 0, M = 0;
    double p = 2.0;
    std::vector<JetNormEntry> entries;
    const JetNormEntry& get(const std::string& q) const
    {
        for (const auto& e : entries)
            if (e.quantity == q) return e;
        throw std::out_of_range("no jet norm entry " + q);
    }
};

namespace detail {

//! One separable term coef * f(y1) g(y2, y3) in frame component comp.
struct SepTerm {
    int comp;
    double coef;
    const std::vector<double>* f;
    const std::vector<double>* g;
};

//! Multi-indices (n1, n2, n3) with n1 + n2 + n3 = N and their multinomial weights.
inline std::vector<std::pair<std::array<int, 3>, double>> multi_indices(int N)
{
    std::vector<std::pair<std::array<int, 3>, double>> out;
    auto fact = [](int k) {
        double r = 1.0;
        for (int i = 2; i <= k; ++i) r *= i;
        return r;
    };
    for (int a = 0; a <= N; ++a)
        for (int b = 0; a + b <= N; ++b) {
            int c = N - a - b;
            out.push_back({{a, b, c}, fact(N) / (fact(a) * fact(b) * fact(c))});
        }
    return out;
}

//! int over the native torus of |grad_y^N d1^M G|^p for G a sum of separable
//! terms supported in the patch.
inline double separable_lp_integral(const JetPatch& pt, const std::vector<SepTerm>& terms, int N, int M, double p)
{
    auto mis = multi_indices(N);
    std::map<std::pair<const void*, int>, std::vector<double>> c1;
    std::map<std::tuple<const void*, int, int>, std::vector<double>> c2;
    auto get1 = [&](const std::vector<double>* f, int o) -> const std::vector<double>& {
        auto key = std::make_pair((const void*)f, o);
        auto it = c1.find(key);
        if (it == c1.end()) it = c1.emplace(key, pt.d1(*f, o)).first;
        return it->second;
    };
    auto get2 = [&](const std::vector<double>* g, int a, int b) -> const std::vector<double>& {
        auto key = std::make_tuple((const void*)g, a, b);
        auto it = c2.find(key);
        if (it == c2.end()) it = c2.emplace(key, pt.d2(*g, a, b)).first;
        return it->second;
    };
    const double dy1 = 2.0 * pt.h1 / pt.n1, dy2 = 2.0 * pt.h2 / pt.n2;
    if (p == 2.0) {
        double total = 0.0;
        for (const auto& [mi, w] : mis)
            for (std::size_t s = 0; s < terms.size(); ++s)
                for (std::size_t u = 0; u < terms.size(); ++u) {
                    if (terms[s].comp != terms[u].comp) continue;
                    const auto& fs = get1(terms[s].f, mi[0] + M);
                    const auto& fu = get1(terms[u].f, mi[0] + M);
                    const auto& gs = get2(terms[s].g, mi[1], mi[2]);
                    const auto& gu = get2(terms[u].g, mi[1], mi[2]);
                    double i1 = 0.0, i2 = 0.0;
                    for (std::size_t j = 0; j < fs.size(); ++j) i1 += fs[j] * fu[j];
                    for (std::size_t j = 0; j < gs.size(); ++j) i2 += gs[j] * gu[j];
                    total += w * terms[s].coef * terms[u].coef * i1 * dy1 * i2 * dy2 * dy2;
                }
        return total;
    }
    // general p: decimated product grid
    const int s1 = std::max(1, pt.n1 / 256), s2 = std::max(1, pt.n2 / 192);
    struct Block {
        double weight;
        int comp;
        std::vector<const std::vector<double>*> f, g;
        std::vector<double> coef;
    };
    std::vector<Block> blocks;
    for (const auto& [mi, w] : mis)
        for (int comp = 0; comp < 3; ++comp) {
            Block b{w, comp, {}, {}, {}};
            for (const auto& t : terms)
                if (t.comp == comp) {
                    b.f.push_back(&get1(t.f, mi[0] + M));
                    b.g.push_back(&get2(t.g, mi[1], mi[2]));
                    b.coef.push_back(t.coef);
                }
            if (!b.f.empty()) blocks.push_back(std::move(b));
        }
    std::vector<int> rows;
    for (int j = 0; j < pt.n1; j += s1) rows.push_back(j);
    std::vector<double> partial(rows.size(), 0.0);
    parallel_for(int(rows.size()), [&](int r) {
        int j = rows[r];
        double acc = 0.0;
        for (int a = 0; a < pt.n2; a += s2)
            for (int b = 0; b < pt.n2; b += s2) {
                std::size_t id = std::size_t(a) * pt.n2 + b;
                double sq = 0.0;
                for (const auto& bl : blocks) {
                    double v = 0.0;
                    for (std::size_t t = 0; t < bl.f.size(); ++t) v += bl.coef[t] * (*bl.f[t])[j] * (*bl.g[t])[id];
                    sq += bl.weight * v * v;
                }
                acc += std::pow(sq, p / 2.0);
            }
        partial[r] = acc;
    });
    double total = 0.0;
    for (double v : partial) total += v;
    return total * (dy1 * s1) * (dy2 * s2) * (dy2 * s2);
}

} // namespace detail

//! Measured ||grad^N d_t^M .||_{L^p(T^3)} of psi_xi, phi_xi, W, W^c and V on
//! patch grids, with the predicted scalings
//!   psi: r_par^{1/p-1/2} (r_perp lambda / r_par)^N (r_perp lambda mu / r_par)^M
//!   phi: r_perp^{2/p-1} lambda^N (zero for M > 0)
//!   W:   r_perp^{2/p-1} r_par^{1/p-1/2} lambda^N (r_perp lambda mu / r_par)^M
//!   W^c: that times r_perp / r_par;  V: that divided by lambda^2.
//! The norms do not depend on xi or t.
inline JetNormReport estimate_jet_norms(const JetFamily& f, int N, int M, double p, int n1 = 2048, int n2 = 1024)
{
    if (N < 0 || M < 0 || N + M > 3) throw std::invalid_argument("estimate_jet_norms needs N + M <= 3");
    if (!(p >= 1.0)) throw std::invalid_argument("estimate_jet_norms needs p >= 1");
    const auto& sc = f.scales();
    JetPatch pt(f, n1, n2);
    const double c = f.stretch(), cmu = f.phase_speed();
    const double fac = std::pow(c, N) * std::pow(cmu, M);
    JetNormReport rep;
    rep.N = N;
    rep.M = M;
    rep.p = p;

    const double tpar = sc.r_perp * sc.lambda * sc.mu / sc.r_par;
    // psi: depends on y1 only; the other two native directions contribute (2 pi)^2
    {
        auto d = pt.d1(pt.psi, N + M);
        double s = 0.0;
        for (double v : d) s += std::pow(std::abs(v), p);
        s *= 2.0 * pt.h1 / pt.n1;
        double meas = fac * std::pow(kTwoPi * kTwoPi * s, 1.0 / p);
        double pred = std::pow(sc.r_par, 1.0 / p - 0.5) * std::pow(sc.r_perp * sc.lambda / sc.r_par, N) * std::pow(tpar, M);
        rep.entries.push_back({"psi", meas, pred});
    }
    // phi: time independent
    {
        double meas = 0.0;
        if (M == 0) {
            std::vector<double> sq(pt.phi.size(), 0.0);
            for (const auto& [mi, w] : detail::multi_indices(N)) {
                if (mi[0] != 0) continue;
                auto d = pt.d2(pt.phi, mi[1], mi[2]);
                for (std::size_t i = 0; i < sq.size(); ++i) sq[i] += w * d[i] * d[i];
            }
            double s = 0.0;
            for (double v : sq) s += std::pow(v, p / 2.0);
            double h = 2.0 * pt.h2 / pt.n2;
            meas = std::pow(c, N) * std::pow(kTwoPi * s * h * h, 1.0 / p);
        }
        double pred = M == 0 ? std::pow(sc.r_perp, 2.0 / p - 1.0) * std::pow(sc.lambda, N) : 0.0;
        rep.entries.push_back({"phi", meas, pred});
    }
    const double base = std::pow(sc.r_perp, 2.0 / p - 1.0) * std::pow(sc.r_par, 1.0 / p - 0.5) * std::pow(sc.lambda, N) *
                        std::pow(tpar, M);
    const double rp2 = sc.r_perp * sc.r_perp;
    {
        std::vector<detail::SepTerm> t{{0, 1.0, &pt.psi, &pt.phi}};
        rep.entries.push_back({"W", fac * std::pow(detail::separable_lp_integral(pt, t, N, M, p), 1.0 / p), base});
    }
    {
        std::vector<detail::SepTerm> t{{1, rp2, &pt.dpsi, &pt.dPhi_a}, {2, rp2, &pt.dpsi, &pt.dPhi_b}};
        rep.entries.push_back(
            {"Wc", fac * std::pow(detail::separable_lp_integral(pt, t, N, M, p), 1.0 / p), base * sc.r_perp / sc.r_par});
    }
    {
        std::vector<detail::SepTerm> t{{0, f.potential_scale(), &pt.psi, &pt.Phi}};
        rep.entries.push_back(
            {"V", fac * std::pow(detail::separable_lp_integral(pt, t, N, M, p), 1.0 / p), base / (sc.lambda * sc.lambda)});
    }
    return rep;
}

//! Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope needs two or more points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= x.size();
    my /= y.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

struct JetScalingFit {
    std::string quantity;
    double measured_exponent = 0.0;  //!< fitted d log ||.|| / d log lambda
    double predicted_exponent = 0.0; //!< same fit applied to the predictions
};

//! Fitted lambda exponents over a sweep of scales.
inline std::vector<JetScalingFit> jet_scaling_sweep(const CutoffProfiles& prof, const DirectionSet& ds,
                                                    const std::vector<JetScales>& sweep, int N, int M, double p)
{
    std::vector<double> lam;
    std::vector<JetNormReport> reps;
    for (const auto& s : sweep) {
        JetFamily f(prof, ds, s);
        lam.push_back(s.lambda);
        reps.push_back(estimate_jet_norms(f, N, M, p));
    }
    std::vector<JetScalingFit> out;
    for (const auto& e : reps.front().entries) {
        std::vector<double> m, pr;
        for (const auto& r : reps) {
            m.push_back(r.get(e.quantity).measured);
            pr.push_back(r.get(e.quantity).predicted);
        }
        if (m.front() <= 0.0 || pr.front() <= 0.0) continue;
        out.push_back({e.quantity, loglog_slope(lam, m), loglog_slope(lam, pr)});
    }
    return out;
}

//! Sweep following the relations used for m = 1: lambda r_perp = kappa,
//! r_perp ~ lambda^{-19/24}, r_par ~ lambda^{-7/12}, mu ~ lambda^{29/24}.
inline std::vector<JetScales> default_jet_sweep(const std::vector<int>& kappas = {1, 2, 3})
{
    std::vector<JetScales> out;
    for (int k : kappas) {
        double lam = 6.667 * std::pow(double(k), 24.0 / 5.0);
        out.push_back({double(k) / lam, 1.51 * std::pow(lam, -7.0 / 12.0), lam, std::pow(lam, 29.0 / 24.0)});
    }
    return out;
}

} // namespace stochci
