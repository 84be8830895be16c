#include "stochci/noise.hpp"

#include <catch_amalgamated.hpp>

#include <map>
#include <random>

using namespace stochci;

namespace {

NoiseMode probe_mode(int kx, int ky, int kz, double s0, double m)
{
    for (const auto& md : noise_modes(2 * (std::max({kx, ky, kz}) + 4), s0, m))
        if (md.kx == kx && md.ky == ky && md.kz == kz) return md;
    throw std::logic_error("probe mode not retained");
}

//! Sample mean of |x|^2 with its standard error.
template <typename F>
MomentEstimate second_moment(int samples, F&& draw)
{
    std::vector<double> v(samples);
    for (int s = 0; s < samples; ++s) v[s] = std::norm(draw(s));
    return moment(v);
}

bool within(const MomentEstimate& e, double target, double k = 3.0) { return std::abs(e.mean - target) <= k * e.stderr_; }

NoiseConfig small_additive(std::uint64_t seed = 7)
{
    NoiseConfig c;
    c.n = 16;
    c.dt = 0.125;
    c.T = 1.0;
    c.seed = seed;
    return c;
}

} // namespace

TEST_CASE("retained modes are one representative per pair with an orthonormal frame orthogonal to k", "[noise]")
{
    auto modes = noise_modes(16, 5.0, 1.0);
    // all nonzero k with |k_i| < 8, halved
    CHECK(modes.size() == (15u * 15u * 15u - 1u) / 2u);
    for (const auto& md : modes) {
        std::array<double, 3> k{double(md.kx), double(md.ky), double(md.kz)};
        auto dot = [](auto& a, auto& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; };
        REQUIRE(std::abs(dot(md.e1, k)) < 1e-13);
        REQUIRE(std::abs(dot(md.e2, k)) < 1e-13);
        REQUIRE(std::abs(dot(md.e1, md.e2)) < 1e-14);
        REQUIRE(std::abs(dot(md.e1, md.e1) - 1.0) < 1e-14);
        REQUIRE(std::abs(dot(md.e2, md.e2) - 1.0) < 1e-14);
        REQUIRE(md.g == Catch::Approx(std::pow(md.k2, -2.5)).epsilon(1e-14));
    }
    CHECK_THROWS(noise_modes(7, 5.0, 1.0));
}

TEST_CASE("Wiener increments have variance T |k|^{-2 s0} per direction", "[noise]")
{
    // MC oracle: 10^4 independent seeds for one probe mode
    const double s0 = 1.5;
    NoiseMode md = probe_mode(1, 2, 0, s0, 1.0);
    NoiseConfig c = small_additive();
    c.s0 = s0;
    c.T = 2.0;
    auto e = second_moment(10000, [&](int s) {
        NoiseConfig ci = c;
        ci.seed = mix_seed(99, s);
        return single_mode(ci, md).first;
    });
    CHECK(within(e, c.T * std::pow(md.k2, -s0)));
}

TEST_CASE("OU convolution reaches the stationary variance g^2 / (2 |k|^{2m})", "[noise]")
{
    const double s0 = 1.0, m = 1.0;
    NoiseMode md = probe_mode(1, 0, 1, s0, m);
    NoiseConfig c = small_additive();
    c.s0 = s0;
    c.m = m;
    c.dt = 0.25;
    c.T = 12.0;
    auto e = second_moment(10000, [&](int s) {
        NoiseConfig ci = c;
        ci.seed = mix_seed(5, s);
        return single_mode(ci, md).second;
    });
    double g2 = std::pow(md.k2, -s0), rate = std::pow(md.k2, m);
    CHECK(within(e, g2 / (2.0 * rate)));
}

TEST_CASE("joint discretization couples z to the same draws as B", "[noise]")
{
    // E[B_k(T) conj z_k(T)] = g^2 (1 - e^{-rate T}) / rate for the continuous pair
    const double s0 = 0.5, m = 0.8;
    NoiseMode md = probe_mode(1, 1, 0, s0, m);
    NoiseConfig c = small_additive();
    c.s0 = s0;
    c.m = m;
    c.dt = 0.05;
    c.T = 1.0;
    std::vector<double> v(10000);
    for (int s = 0; s < 10000; ++s) {
        NoiseConfig ci = c;
        ci.seed = mix_seed(11, s);
        auto [b, z] = single_mode(ci, md);
        v[s] = std::real(b * std::conj(z));
    }
    auto e = moment(v);
    double g2 = std::pow(md.k2, -s0), rate = std::pow(md.k2, m);
    CHECK(within(e, g2 * (1.0 - std::exp(-rate * c.T)) / rate));
}

TEST_CASE("exact OU update is dt-exact and matches Euler-Maruyama at dt/64", "[noise]")
{
    const double s0 = 0.0, m = 1.0;
    NoiseMode md = probe_mode(1, 1, 0, s0, m);
    const double rate = std::pow(md.k2, m), T = 1.0;
    const double target = (1.0 - std::exp(-2.0 * rate * T)) / (2.0 * rate);
    const int N = 10000;
    auto exact = [&](double dt, std::uint64_t base) {
        NoiseConfig c = small_additive();
        c.s0 = s0;
        c.m = m;
        c.dt = dt;
        c.T = T;
        return second_moment(N, [&](int s) {
            NoiseConfig ci = c;
            ci.seed = mix_seed(base, s);
            return single_mode(ci, md).second;
        });
    };
    auto coarse = exact(0.25, 1), fine = exact(0.125, 2);
    CHECK(within(coarse, target));
    CHECK(std::abs(coarse.mean - fine.mean) <= 3.0 * std::hypot(coarse.stderr_, fine.stderr_));

    // Euler-Maruyama reference with an independent generator
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
    const double h = 0.25 / 64.0;
    const int steps = int(std::llround(T / h));
    auto em = second_moment(N, [&](int) {
        cplx z = 0.0;
        for (int i = 0; i < steps; ++i) z += -rate * z * h + std::sqrt(h) * cplx(nd(rng), nd(rng));
        return z;
    });
    CHECK(std::abs(coarse.mean - em.mean) <= 3.0 * std::hypot(coarse.stderr_, em.stderr_));
}

TEST_CASE("paths start at zero, are divergence free and deterministic in the seed", "[noise]")
{
    NoiseConfig c = small_additive();
    NoisePath p = ou_convolve(sample_wiener(c), c.m);
    REQUIRE(p.times.size() == 9);
    for (std::size_t mi = 0; mi < p.modes.size(); ++mi)
        for (int j = 0; j < 2; ++j) {
            REQUIRE(p.B.at(0, mi, j) == cplx(0.0, 0.0));
            REQUIRE(p.z.at(0, mi, j) == cplx(0.0, 0.0));
        }
    for (std::size_t t = 0; t < p.times.size(); ++t) {
        for (const ModeSeries* s : {&p.B, &p.z}) {
            FourierField3 f = to_field(p, *s, t);
            ScalarField d = divergence(f);
            double mx = 0.0;
            for (const auto& v : d.c[0]) mx = std::max(mx, std::abs(v));
            REQUIRE(mx < 1e-12);
        }
    }
    // the field carries exactly the H^s norm computed from the frame coefficients
    FourierField3 f = to_field(p, p.z, 5, 20);
    CHECK(hs_norm(f, 1.25) == Catch::Approx(series_hs_norm(p, p.z, 5, 1.25)).epsilon(1e-12));
    CHECK(to_phys(f).v[0].size() == 20u * 20u * 20u);

    NoisePath q = ou_convolve(sample_wiener(c), c.m);
    CHECK(q.B.data == p.B.data);
    CHECK(q.z.data == p.z.data);
    c.seed = 8;
    CHECK(ou_convolve(sample_wiener(c), c.m).z.data != p.z.data);

    // a finer truncation shares the low-mode paths
    NoiseConfig c2 = small_additive();
    c2.n = 24;
    NoisePath r = sample_wiener(c2);
    std::size_t matched = 0;
    for (std::size_t mi = 0; mi < r.modes.size(); ++mi)
        for (std::size_t mj = 0; mj < p.modes.size(); ++mj)
            if (r.modes[mi].kx == p.modes[mj].kx && r.modes[mi].ky == p.modes[mj].ky && r.modes[mi].kz == p.modes[mj].kz) {
                REQUIRE(r.B.at(8, mi, 1) == p.B.at(8, mj, 1));
                ++matched;
            }
    CHECK(matched == p.modes.size());

    NoiseConfig cm = c;
    cm.mode = SchemeMode::multiplicative;
    NoisePath b = sample_wiener(cm);
    CHECK(b.scalar_B.front() == 0.0);
    CHECK(sample_wiener(cm).scalar_B == b.scalar_B);
    CHECK_THROWS(ou_convolve(b, 1.0));
    CHECK_THROWS(time_grid(0.0, 1.0));
    CHECK_THROWS(time_grid(0.5, 0.25));
}

TEST_CASE("Hoelder estimates on simple paths", "[noise]")
{
    std::vector<double> t, lin, cst;
    for (int i = 0; i <= 40; ++i) {
        t.push_back(0.1 * i);
        lin.push_back(0.1 * i);
        cst.push_back(2.5);
    }
    // f(t) = t on [0, 4]: |t - s|^{1/2} is largest at the full interval
    auto h = holder_norm(t, lin, 0.5);
    CHECK(h.seminorm == Catch::Approx(2.0).epsilon(1e-12));
    CHECK(h.sup == Catch::Approx(4.0).epsilon(1e-12));
    CHECK(h.norm() == Catch::Approx(6.0).epsilon(1e-12));
    auto hc = holder_norm(t, cst, 0.3);
    CHECK(hc.seminorm == 0.0);
    CHECK(hc.sup == 2.5);
    CHECK_THROWS(holder_norm(t, lin, 0.0));
    CHECK_THROWS(holder_norm(t, lin, 1.0));
    CHECK_THROWS(holder_norm({0.0}, {1.0}, 0.5));
    // two samples fall back to the only pair
    CHECK(holder_norm({0.0, 0.25}, {0.0, 1.0}, 0.5).seminorm == Catch::Approx(2.0));
}

TEST_CASE("Brownian Hoelder estimates: exponents above 1/2 grow under refinement, below stay bounded", "[noise]")
{
    // nested refinements of the same paths (subsampling the finest grid)
    const int paths = 40, finest = 1024;
    const std::vector<int> levels{64, 256, 1024};
    std::map<double, std::vector<double>> mean;
    for (double theta : {0.40, 0.45, 0.55}) mean[theta].assign(levels.size(), 0.0);
    std::mt19937_64 rng(31);
    std::normal_distribution<double> nd(0.0, std::sqrt(1.0 / finest));
    for (int p = 0; p < paths; ++p) {
        std::vector<double> B(finest + 1, 0.0);
        for (int i = 1; i <= finest; ++i) B[i] = B[i - 1] + nd(rng);
        for (std::size_t l = 0; l < levels.size(); ++l) {
            int stride = finest / levels[l];
            std::vector<double> t, v;
            for (int i = 0; i <= finest; i += stride) {
                t.push_back(double(i) / finest);
                v.push_back(B[i]);
            }
            for (auto& [theta, m] : mean) m[l] += holder_norm(t, v, theta).norm() / paths;
        }
    }
    auto& g = mean[0.55];
    CHECK(g[1] > 1.1 * g[0]);
    CHECK(g[2] > 1.1 * g[1]);
    // Levy modulus: exponents below 1/2 stay bounded; the estimate is
    // nondecreasing under nested refinement and levels off
    for (double theta : {0.40, 0.45}) {
        auto& b = mean[theta];
        CHECK(b[2] < 1.1 * b[1]);
        CHECK(b[2] / b[1] < g[2] / g[1]);
    }
}

TEST_CASE("stopping times: zero path, constructed ramps and monotonicity in L", "[noise]")
{
    const double delta = 1.0 / 60.0;
    NoiseConfig cm;
    cm.mode = SchemeMode::multiplicative;
    cm.dt = 0.1;
    cm.T = 20.0;
    NoisePath zero = sample_wiener(cm);
    std::fill(zero.scalar_B.begin(), zero.scalar_B.end(), 0.0);
    CHECK(stopping_time(zero, 16.0, delta).time == 16.0);
    CHECK(stopping_time(zero, 16.0, delta).capped);

    NoiseConfig ca = small_additive();
    ca.T = 3.0;
    NoisePath za = ou_convolve(sample_wiener(ca), ca.m);
    std::fill(za.z.data.begin(), za.z.data.end(), cplx(0.0, 0.0));
    CHECK(stopping_time(za, 3.0, delta).time == 3.0);

    // multiplicative ramp crossing |B| = L^{1/4} = 2 at t* = 1.33
    const double tstar = 1.33;
    NoisePath ramp = zero;
    for (std::size_t i = 0; i < ramp.times.size(); ++i) ramp.scalar_B[i] = 2.0 * ramp.times[i] / tstar;
    auto st = stopping_time(ramp, 16.0, delta);
    CHECK(!st.capped);
    CHECK(st.trigger == "|B|");
    CHECK(st.time >= tstar);
    CHECK(st.time < tstar + cm.dt);

    // additive ramp: one mode with ||z(t)||_{H^{(5+sigma)/2}} = t / t*
    NoisePath ar;
    ar.config = small_additive();
    ar.config.dt = 0.05;
    ar.times = time_grid(0.05, 16.0);
    ar.modes = {probe_mode(1, 0, 0, 5.0, 1.0)};
    ar.z.modes = 1;
    ar.z.data.assign(ar.times.size() * 2, cplx(0.0, 0.0));
    const double r1 = (5.0 + ar.config.sigma) / 2.0, scale = std::sqrt(2.0 * std::pow(kTwoPi, 3) * std::pow(2.0, r1));
    const double t2 = 0.77;
    for (std::size_t i = 0; i < ar.times.size(); ++i) ar.z.at(i, 0, 0) = 2.0 * ar.times[i] / (t2 * scale);
    auto sa = stopping_time(ar, 16.0, delta);
    CHECK(sa.trigger == "H^{(5+sigma)/2} norm");
    CHECK(sa.time >= t2);
    CHECK(sa.time < t2 + 0.05);
    // C_S scales the thresholds down
    ar.config.C_S = 2.0;
    CHECK(stopping_time(ar, 16.0, delta).time < sa.time);

    NoisePath w = sample_wiener(cm);
    double prev = 0.0;
    for (double L = 0.5; L <= 20.0; L += 0.5) {
        double tl = stopping_time(w, L, delta).time;
        REQUIRE(tl >= prev);
        REQUIRE(tl <= L);
        prev = tl;
    }
    CHECK_THROWS(stopping_time(w, 25.0, delta));
    CHECK_THROWS(stopping_time(w, 4.0, 0.0));
}

TEST_CASE("Upsilon = exp(B) and its causal mollification obey the pathwise bounds", "[noise]")
{
    std::vector<double> t, zero;
    for (int i = 0; i <= 64; ++i) {
        t.push_back(i / 64.0);
        zero.push_back(0.0);
    }
    auto u0 = upsilon(t, zero, 0.125);
    for (std::size_t i = 0; i < t.size(); ++i) {
        REQUIRE(u0.upsilon[i] == 1.0);
        REQUIRE(u0.upsilon_l[i] == Catch::Approx(1.0).epsilon(1e-14));
    }
    CHECK(m_L(16.0) == Catch::Approx(std::sqrt(3.0) * 2.0 * std::exp(1.0)));

    NoiseConfig c;
    c.mode = SchemeMode::multiplicative;
    c.dt = 1.0 / 64.0;
    c.T = 4.0;
    const double L = 4.0, delta = 1.0 / 60.0, l = 4.0 * c.dt;
    int stopped = 0;
    for (int s = 0; s < 100; ++s) {
        c.seed = mix_seed(77, s);
        NoisePath p = sample_wiener(c);
        auto u = upsilon(p.times, p.scalar_B, l);
        REQUIRE(u.upsilon[0] == 1.0);
        for (std::size_t i = 0; i < p.times.size(); ++i) REQUIRE(u.upsilon[i] == Catch::Approx(std::exp(p.scalar_B[i])));
        auto chk = check_upsilon_bounds(p, L, delta, l);
        REQUIRE(chk.holds());
        if (chk.T_L < L) ++stopped;
    }
    // the thresholds are reached on some paths, so the check is not vacuous
    CHECK(stopped > 0);
}

TEST_CASE("regularity report: stable moments under the trace hypothesis, growth without it", "[noise][slow]")
{
    NoiseConfig c = small_additive(3);
    c.dt = 0.125;
    c.s0 = 5.0;
    auto good = regularity_report(c, 100, {16, 24, 32});
    CHECK(good.trace_hypothesis);
    CHECK(good.rows.size() == 3);
    CHECK(good.bounded());
    CHECK(good.verdict() == "bounded under refinement");
    CHECK(good.drift_sup < 0.2);
    CHECK(good.drift_holder < 0.2);

    c.s0 = 2.0;
    auto bad = regularity_report(c, 100, {16, 24, 32});
    CHECK(!bad.trace_hypothesis);
    CHECK(!bad.bounded());
    CHECK(bad.rows[2].sup_high.mean > 1.2 * bad.rows[0].sup_high.mean);
    CHECK(bad.rows[2].trace > bad.rows[0].trace);
    CHECK_THROWS(regularity_report(c, 99));
}

TEST_CASE("path evaluation interpolates between samples", "[noise]")
{
    NoiseConfig c = small_additive(5);
    NoisePath p = ou_convolve(sample_wiener(c), c.m);
    Grid3 g(16);
    FourierField3 a = to_field(p, p.z, 3, 16), b = to_field(p, p.z, 4, 16);
    const double t = 0.75 * p.times[3] + 0.25 * p.times[4];
    FourierField3 mid = field_at(p, p.z, t, g);
    CHECK(rel_l2(mid, 0.75 * a + 0.25 * b) < 1e-14);
    CHECK(*mid.time_tag == t);
    CHECK(rel_l2(field_at(p, p.z, p.times[3], g), a) < 1e-14);
    CHECK(l2(field_at(p, p.z, -0.2, g)) == 0.0);
    CHECK_THROWS(field_at(p, p.z, c.T + 0.1, g));
    CHECK_THROWS(field_at(p, p.z, 0.5, Grid3(8)));

    c.mode = SchemeMode::multiplicative;
    NoisePath s = sample_wiener(c);
    CHECK(scalar_at(s, -1.0) == 0.0);
    CHECK(scalar_at(s, 0.5 * (s.times[2] + s.times[3])) == Catch::Approx(0.5 * (s.scalar_B[2] + s.scalar_B[3])));
    CHECK_THROWS(scalar_at(s, c.T * 2.0));
}
