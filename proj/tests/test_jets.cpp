#include "stochci/jets.hpp"
#include "stochci/stationary_phase.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace stochci;

namespace {

const DirectionSet& dirs()
{
    static const DirectionSet ds = build_direction_set();
    return ds;
}

JetFamily toy_family(JetScales s = {0.125, 0.5, 8.0, 2.0}) { return JetFamily(CutoffProfiles(), dirs(), s); }

//! Jet quantities at a physical point, evaluated from the profiles with plain
//! floating point coordinates.
struct PointJet {
    const JetFamily& f;
    std::size_t i;

    std::array<double, 3> native(const Vec3& x, double t) const
    {
        Vec3 xi = f.directions().xi(i), A = f.directions().a(i), B = f.directions().b(i);
        double c = f.stretch();
        auto off = f.native_offset(i);
        auto dot = [](const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; };
        auto wrap = [](double v) { return v - 2 * M_PI * std::floor((v + M_PI) / (2 * M_PI)); };
        return {wrap(c * dot(x, xi) + c * f.scales().mu * t), wrap(c * dot(x, A) - off[0]), wrap(c * dot(x, B) - off[1])};
    }
    Vec3 V(const Vec3& x, double t) const
    {
        auto y = native(x, t);
        double s = f.psi(y[0]) * f.Phi(y[1], y[2]) * f.potential_scale();
        Vec3 xi = f.directions().xi(i);
        return {xi[0] * s, xi[1] * s, xi[2] * s};
    }
    Vec3 W(const Vec3& x, double t) const
    {
        auto y = native(x, t);
        double s = f.psi(y[0]) * f.phi(y[1], y[2]);
        Vec3 xi = f.directions().xi(i);
        return {xi[0] * s, xi[1] * s, xi[2] * s};
    }
    Vec3 Wc(const Vec3& x, double t) const
    {
        auto y = native(x, t);
        auto g = f.grad_Phi(y[1], y[2]);
        double k = f.scales().r_perp * f.scales().r_perp * f.dpsi(y[0]);
        Vec3 A = f.directions().a(i), B = f.directions().b(i);
        return {k * (A[0] * g[0] + B[0] * g[1]), k * (A[1] * g[0] + B[1] * g[1]), k * (A[2] * g[0] + B[2] * g[1])};
    }
};

//! curl curl V by nested 4th-order central differences in physical coordinates.
Vec3 fd_curl_curl(const PointJet& pj, const Vec3& x, double h)
{
    auto d = [&](auto&& F, const Vec3& p, int axis) {
        auto sh = [&](double s) {
            Vec3 q = p;
            q[axis] += s;
            return F(q);
        };
        Vec3 a = sh(-2 * h), b = sh(-h), c = sh(h), e = sh(2 * h), r;
        for (int k = 0; k < 3; ++k) r[k] = (a[k] - 8 * b[k] + 8 * c[k] - e[k]) / (12 * h);
        return r;
    };
    auto curl = [&](auto&& F) {
        return [&, F](const Vec3& p) {
            Vec3 dx = d(F, p, 0), dy = d(F, p, 1), dz = d(F, p, 2);
            return Vec3{dy[2] - dz[1], dz[0] - dx[2], dx[1] - dy[0]};
        };
    };
    auto V = [&](const Vec3& p) { return pj.V(p, 0.0); };
    auto c1 = curl(V);
    return curl(c1)(x);
}

} // namespace

TEST_CASE("cutoff profiles are normalized", "[jets]")
{
    CutoffProfiles p;
    const double fourpi2 = 4 * M_PI * M_PI;
    CHECK(std::abs(p.phi_sq_integral() - fourpi2) / fourpi2 < 1e-10);
    CHECK(std::abs(p.psi_sq_integral() - 2 * M_PI) / (2 * M_PI) < 1e-10);
    CHECK(std::abs(p.phi_integral()) < 1e-10);
    for (double t : {0.1, 0.37, 0.8, 0.99}) CHECK(p.psi(-t) == -p.psi(t));
    CHECK(p.fd_laplacian_error() < 1e-8);
    CHECK(p.psi(1.0) == 0.0);
    CHECK(p.Phi(0.8, 0.7) == 0.0);
    CHECK_THROWS_AS(CutoffProfiles(3), std::invalid_argument);
    CHECK_THROWS_AS(CutoffProfiles(4, 0.0), std::invalid_argument);
}

TEST_CASE("shift placement matches a brute force line distance oracle", "[jets]")
{
    const auto& ds = dirs();
    auto pl = place_shifts(ds);
    REQUIRE(pl.alpha.size() == 6);
    CHECK(pl.alpha[0] == Vec3{0, 0, 0});
    // frozen value of the greedy maximin placement for this direction set
    CHECK(std::abs(pl.min_clearance - 0.194833) < 1e-6);
    for (const auto& pc : pl.pairs) {
        // distances between axis lines alpha + m A + n B + s xi of the two
        // families, in native units (times 2 pi), over a window of translates
        Vec3 xa = ds.xi(pc.a), xb = ds.xi(pc.b);
        Vec3 nrm{xa[1] * xb[2] - xa[2] * xb[1], xa[2] * xb[0] - xa[0] * xb[2], xa[0] * xb[1] - xa[1] * xb[0]};
        double len = std::sqrt(nrm[0] * nrm[0] + nrm[1] * nrm[1] + nrm[2] * nrm[2]);
        double best = 1e300;
        for (int m = -6; m <= 6; ++m)
            for (int n = -6; n <= 6; ++n)
                for (int mm = -6; mm <= 6; ++mm)
                    for (int nn = -6; nn <= 6; ++nn) {
                        Vec3 Aa = ds.a(pc.a), Ba = ds.b(pc.a), Ab = ds.a(pc.b), Bb = ds.b(pc.b);
                        double dist = 0.0;
                        for (int k = 0; k < 3; ++k) {
                            double pa = pl.alpha[pc.a][k] + m * Aa[k] + n * Ba[k];
                            double pb = pl.alpha[pc.b][k] + mm * Ab[k] + nn * Bb[k];
                            dist += (pa - pb) * nrm[k] / len;
                        }
                        best = std::min(best, std::abs(dist));
                    }
        CHECK(std::abs(2 * M_PI * best / 2 - pc.clearance) < 1e-12);
    }
}

TEST_CASE("family construction rejects bad scales", "[jets]")
{
    CHECK_THROWS_AS(toy_family({0.13, 0.5, 8.0, 1.0}), LedgerError);
    CHECK_THROWS_AS(toy_family({0.125, 0.1, 8.0, 1.0}), LedgerError);
    try {
        toy_family({0.25, 0.5, 4.0, 1.0});
        FAIL("expected a placement error");
    } catch (const PlacementError& e) {
        CHECK(!e.overlaps.empty());
        for (const auto& pc : e.overlaps) CHECK(pc.clearance <= 0.25);
    }
}

TEST_CASE("grid samples agree with pointwise evaluation", "[jets]")
{
    auto f = toy_family();
    Grid3 g(32);
    const double t = 0.037;
    for (std::size_t i : {0u, 3u, 5u}) {
        auto s = f.sample(i, g, t);
        auto w = f.W(i, s), wc = f.Wc(i, s), v = f.V(i, s);
        PointJet pj{f, i};
        double worst = 0.0;
        for (int a = 0; a < 32; ++a)
            for (int b = 0; b < 32; ++b)
                for (int c = 0; c < 32; ++c) {
                    Vec3 x{g.coord(a), g.coord(b), g.coord(c)};
                    auto id = g.pidx(a, b, c);
                    Vec3 ew = pj.W(x, t), ec = pj.Wc(x, t), ev = pj.V(x, t);
                    for (int k = 0; k < 3; ++k)
                        worst = std::max({worst, std::abs(ew[k] - w.v[k][id]), std::abs(ec[k] - wc.v[k][id]),
                                          std::abs(ev[k] - v.v[k][id])});
                }
        // pointwise values reach O(100); the oracle differs only in rounding
        CHECK(worst < 1e-8);
    }
}

TEST_CASE("jets are mean zero, disjoint and periodic on the grid", "[jets]")
{
    auto f = toy_family({0.125, 0.5, 16.0, 3.0});
    Grid3 g(64);
    auto d = jet_grid_diagnostics(f, g, 0.0);
    CHECK(d.mean_w < 1e-12);
    CHECK(d.support_product == 0.0);
    CHECK(d.w_product == 0.0);
    REQUIRE(f.kappa() == 2);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(periodicity_defect(f, i, g, 0.21) < 1e-12);
}

TEST_CASE("jet identities hold across the toy parameter matrix", "[jets]")
{
    std::vector<JetScales> matrix{{0.125, 0.5, 8.0, 2.0}, {0.1, 0.3, 20.0, 5.0}, {0.05, 0.2, 60.0, 1.0}, {0.19, 0.9, 100.0 / 19.0, 7.0}};
    for (const auto& s : matrix) {
        auto f = toy_family(s);
        auto r = verify_jet_identities(f, 100);
        INFO("r_perp = " << s.r_perp << ", lambda = " << s.lambda);
        CHECK(r.phi_sq_error < 1e-10);
        CHECK(r.psi_sq_error < 1e-10);
        CHECK(r.div_free < 1e-10);
        CHECK(r.curl_curl < 1e-10);
        CHECK(r.div_ww < 1e-8);
        CHECK(r.mean_ww_error < 1e-12);
        CHECK(r.reconstruct_id < 1e-12);
        CHECK(r.reconstruct_worst < 1e-12);
    }
}

TEST_CASE("curl curl V matches W + W^c by physical finite differences", "[jets]")
{
    auto f = toy_family();
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-M_PI, M_PI);
    for (std::size_t i = 0; i < f.size(); ++i) {
        PointJet pj{f, i};
        int tested = 0;
        double worst = 0.0, scale = 0.0;
        while (tested < 20) {
            Vec3 x{u(rng), u(rng), u(rng)};
            Vec3 w = pj.W(x, 0.0), wc = pj.Wc(x, 0.0);
            double m = std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]);
            if (m < 1.0) continue;
            auto y = pj.native(x, 0.0);
            // stay away from the support edges where the finite differences straddle the cutoff
            if (std::hypot(y[1], y[2]) > 0.8 * f.scales().r_perp || std::abs(y[0]) > 0.8 * f.scales().r_par) continue;
            ++tested;
            Vec3 cc = fd_curl_curl(pj, x, 2.5e-4);
            for (int k = 0; k < 3; ++k) worst = std::max(worst, std::abs(cc[k] - w[k] - wc[k]));
            scale = std::max(scale, m);
        }
        CHECK(worst / scale < 1e-4);
    }
}

TEST_CASE("jet norms follow the predicted scalings", "[jets]")
{
    auto f = toy_family();
    auto r = estimate_jet_norms(f, 0, 0, 2.0);
    const double target = std::pow(2 * M_PI, 1.5);
    CHECK(std::abs(r.get("W").measured - target) < 1e-10 * target);
    CHECK(std::abs(r.get("psi").measured - target) < 1e-10 * target);
    CHECK(std::abs(r.get("phi").measured - target) < 1e-10 * target);
    // psi's L2 norm does not depend on r_par
    auto r2 = estimate_jet_norms(toy_family({0.125, 0.25, 8.0, 2.0}), 0, 0, 2.0);
    CHECK(std::abs(r2.get("psi").measured - r.get("psi").measured) < 1e-10 * target);

    // the decimated general-p route agrees with the exact p = 2 route
    for (int N : {0, 1, 2}) {
        auto a = estimate_jet_norms(f, N, 0, 2.0), b = estimate_jet_norms(f, N, 0, 2.0 + 1e-9);
        for (const auto& q : {"W", "Wc", "V"}) CHECK(std::abs(a.get(q).measured - b.get(q).measured) < 1e-4 * a.get(q).measured);
    }
    // time derivatives scale with the phase speed
    auto t1 = estimate_jet_norms(f, 0, 1, 2.0);
    auto s1 = estimate_jet_norms(f, 1, 0, 2.0);
    CHECK(std::abs(t1.get("psi").measured / s1.get("psi").measured - f.scales().mu) < 1e-10 * f.scales().mu);
    CHECK(t1.get("phi").measured == 0.0);
    CHECK_THROWS_AS(estimate_jet_norms(f, 2, 2, 2.0), std::invalid_argument);

    auto fit = jet_scaling_sweep(CutoffProfiles(), dirs(), default_jet_sweep(), 1, 0, 2.0);
    bool found = false;
    for (const auto& e : fit)
        if (e.quantity == "W") {
            found = true;
            CHECK(e.predicted_exponent == Catch::Approx(1.0).margin(1e-12));
            CHECK(std::abs(e.measured_exponent - 1.0) < 0.1);
        }
    CHECK(found);
}

TEST_CASE("resolution guards report the minimum grid", "[jets]")
{
    auto f = toy_family();
    try {
        f.require_resolution(Grid3(64));
        FAIL("expected a resolution error");
    } catch (const ResolutionError& e) {
        CHECK(e.min_n == f.min_resolving_n());
        CHECK(e.min_n > 64);
    }
    CHECK_NOTHROW(f.require_support_hit(Grid3(32)));
}

TEST_CASE("stationary phase product", "[jets]")
{
    Grid3 g(32);
    auto one = to_spec(sample<1>(g, [](double, double, double) { return std::array<double, 1>{1.0}; }));
    for (int kap : {4, 8, 16}) {
        auto fast = to_spec(sample<1>(g, [&](double x, double y, double z) {
            return std::array<double, 1>{std::cos(kap * x) * std::sin(kap * y) + 0.3 * std::cos(kap * z)};
        }));
        auto r1 = check_stationary_phase_product(one, fast, 2.0, 1.5, kap, 2);
        CHECK(r1.ratio == Catch::Approx(1.0).epsilon(1e-13));
        CHECK(r1.C_f == Catch::Approx(1.0).epsilon(1e-13));
        CHECK(r1.period_defect < 1e-12);
        for (double p : {1.0, 2.0}) {
            auto slow = to_spec(sample<1>(g, [](double x, double y, double z) {
                return std::array<double, 1>{1.0 + 0.5 * std::sin(x + y) + 0.2 * std::cos(z)};
            }));
            auto r = check_stationary_phase_product(slow, fast, p, 1.5, kap, 2);
            CHECK(r.ratio <= 4.0);
            CHECK(r.ratio > 0.0);
        }
    }
    CHECK(product_hypothesis(2.0, 400.0, 4));
    CHECK_FALSE(product_hypothesis(2.0, 20.0, 4));
    CHECK(commutator_hypothesis(2.0, 16.0, 3));
    CHECK_FALSE(commutator_hypothesis(8.0, 16.0, 3));
}
