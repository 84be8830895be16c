#include "stochci/geometry.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace stochci;

namespace {

Sym6 plus_identity(Sym6 e)
{
    e[0] += 1;
    e[3] += 1;
    e[5] += 1;
    return e;
}

double recon_error(const GammaSolver& g, const Sym6& r)
{
    auto rec = g.reconstruct(g.gamma(r));
    Sym6 d;
    for (int i = 0; i < 6; ++i) d[i] = rec[i] - r[i];
    return frobenius(d);
}

} // namespace

TEST_CASE("direction set invariants hold in exact arithmetic", "[geometry]")
{
    auto ds = build_direction_set();
    REQUIRE(ds.size() == 6);
    CHECK(ds.n_star == 3);
    CHECK(dyad_rank(ds.directions) == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        const RVec3* t[3] = {&ds.directions[i], &ds.frame_a[i], &ds.frame_b[i]};
        for (int p = 0; p < 3; ++p) {
            for (int q = 0; q < 3; ++q) CHECK(rdot(*t[p], *t[q]) == (p == q ? 1 : 0));
            for (const auto& c : *t[p]) CHECK(denominator(Rational(c * ds.n_star)) == 1);
        }
        CHECK(rcross(ds.directions[i], ds.frame_a[i]) == ds.frame_b[i]);
    }
}

TEST_CASE("rank oracle detects a degenerate set", "[geometry]")
{
    auto ds = build_direction_set();
    auto dirs = ds.directions;
    dirs[5] = dirs[4];
    CHECK(dyad_rank(dirs) == 5);
}

TEST_CASE("coefficients at the identity", "[geometry]")
{
    GammaSolver g(build_direction_set());
    // frozen exact values for this set
    CHECK(g.coefficient_at_identity(0) == rat(3, 8));
    CHECK(g.coefficient_at_identity(1) == rat(3, 8));
    for (int x = 2; x < 6; ++x) CHECK(g.coefficient_at_identity(x) == rat(9, 16));
    auto rec = g.reconstruct(g.gamma(identity6()));
    for (int i = 0; i < 6; ++i) CHECK(std::abs(rec[i] - identity6()[i]) < 1e-15);
}

TEST_CASE("exact inverse agrees with a floating point solve", "[geometry]")
{
    auto ds = build_direction_set();
    GammaSolver g(ds);
    Eigen::Matrix<double, 6, 6> m;
    for (int x = 0; x < 6; ++x) {
        Vec3 v = ds.xi(x);
        double d[6] = {v[0] * v[0], v[0] * v[1], v[0] * v[2], v[1] * v[1], v[1] * v[2], v[2] * v[2]};
        for (int e = 0; e < 6; ++e) m(e, x) = d[e];
    }
    Sym6 r{1.1, 0.1, 0.0, 0.9, -0.05, 1.0};
    Eigen::Matrix<double, 6, 1> rhs;
    for (int e = 0; e < 6; ++e) rhs(e) = r[e];
    Eigen::Matrix<double, 6, 1> c = m.fullPivLu().solve(rhs);
    auto ce = g.coefficients(r);
    for (int x = 0; x < 6; ++x) CHECK(std::abs(c(x) - ce[x]) < 1e-13);
}

TEST_CASE("reconstruction on the admissible ball", "[geometry]")
{
    auto ds = build_direction_set();
    GammaSolver g(ds);
    Sym6 shear = plus_identity({0, 0.1, 0, 0, 0, 0});
    CHECK(recon_error(g, shear) < 1e-12);
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    for (int s = 0; s < 1000; ++s) worst = std::max(worst, recon_error(g, plus_identity(random_ball_point(rng, ds.positivity_radius))));
    CHECK(worst < 1e-12);
    for (int s = 0; s < 200; ++s) {
        auto gm = g.gamma(plus_identity(random_ball_point(rng, ds.positivity_radius)));
        for (double v : gm) CHECK(v >= 0.0);
    }
}

TEST_CASE("coefficients are linear", "[geometry]")
{
    GammaSolver g(build_direction_set());
    std::mt19937_64 rng(9);
    for (int s = 0; s < 50; ++s) {
        Sym6 a = random_ball_point(rng, 3.0), b = random_ball_point(rng, 3.0);
        double al = 0.37;
        Sym6 mix;
        for (int i = 0; i < 6; ++i) mix[i] = al * a[i] + (1 - al) * b[i];
        auto ca = g.coefficients(a), cb = g.coefficients(b), cm = g.coefficients(mix);
        for (int x = 0; x < 6; ++x) CHECK(std::abs(cm[x] - (al * ca[x] + (1 - al) * cb[x])) < 1e-14);
    }
}

TEST_CASE("positivity radius is positive, sampled and sharp", "[geometry]")
{
    auto ds = build_direction_set();
    GammaSolver g(ds);
    CHECK(ds.positivity_radius > 0.0);
    CHECK(std::abs(ds.positivity_radius - 0.2) < 1e-12);
    auto cert = certify_positivity(g, ds.positivity_radius, 20000, 3);
    CHECK(cert.certified);
    CHECK(cert.min_coefficient_inside > 0.0);
    CHECK(cert.min_coefficient_beyond < 0.0);
}

TEST_CASE("gamma rejects points outside the ball", "[geometry]")
{
    auto ds = build_direction_set();
    GammaSolver g(ds);
    Sym6 far = plus_identity({0.3, 0, 0, 0, 0, 0});
    try {
        g.gamma(far);
        FAIL("expected a domain error");
    } catch (const DomainError& e) {
        CHECK(std::abs(e.distance - 0.3) < 1e-14);
    }
}

TEST_CASE("geometry constants", "[geometry]")
{
    auto ds = build_direction_set();
    GammaSolver g(ds);
    double cl = c_lambda(6);
    CHECK(std::abs(cl - 48.0 * std::sqrt(1.0 + 8.0 * std::pow(M_PI, 3))) < 1e-12);
    CHECK(std::abs(cl - 757.6) < 0.1);
    double r = domain_radius(ds);
    CHECK(std::abs(r - 0.18) < 1e-12);
    auto k = constants(g, r, 4000, 5);
    for (std::size_t x = 0; x < 6; ++x) CHECK(k.M >= cl * std::sqrt(to_double(g.coefficient_at_identity(x))));
    CHECK(k.M_sampled <= k.M * (1 + 1e-12));
    auto k2 = constants(g, r, 8000, 6);
    CHECK(std::abs(k2.M_sampled - k.M_sampled) < 0.01 * k.M_sampled);
    CHECK(std::abs(k.M_sampled - k.M) < 1e-9 * k.M);
}

TEST_CASE("fingerprint is stable", "[geometry]")
{
    auto a = geometry_fingerprint(build_direction_set());
    auto b = geometry_fingerprint(build_direction_set());
    CHECK(a == b);
    CHECK(a.find("n_star=3") != std::string::npos);
}
