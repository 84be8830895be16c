#include "stochci/builder.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace stochci;
using stochci::testing::random_field;
using stochci::testing::sup_abs;
using stochci::testing::sup_diff;

namespace {

StageConfig toy_config()
{
    StageConfig c;
    return c;
}

AuxPath small_path(SchemeMode mode, std::uint64_t seed)
{
    NoiseConfig c;
    c.mode = mode;
    c.n = 8;
    c.dt = 1.0 / 256.0;
    c.T = 0.25;
    c.seed = seed;
    return sample_aux(c);
}

} // namespace

TEST_CASE("smooth step and cutoff are monotone with the right branches", "[builder]")
{
    CHECK(smooth_step(-1.0) == 0.0);
    CHECK(smooth_step(0.0) == 0.0);
    CHECK(smooth_step(1.0) == 1.0);
    CHECK(smooth_step(0.5) == Catch::Approx(0.5).margin(1e-15));
    for (double t = 0.01; t < 1.0; t += 0.01) CHECK(smooth_step(t) + smooth_step(1.0 - t) == Catch::Approx(1.0).margin(1e-14));

    CHECK(cutoff_chi(0.0) == 1.0);
    CHECK(cutoff_chi(0.7) == 1.0);
    CHECK(cutoff_chi(2.0) == 2.0);
    CHECK(cutoff_chi(5.5) == 5.5);
    CHECK_THROWS_AS(cutoff_chi(-0.1), std::invalid_argument);
    double prev = 1.0;
    for (double z = 0.0; z <= 3.0; z += 1e-3) {
        double c = cutoff_chi(z);
        CHECK(c >= prev - 1e-15);
        CHECK(c >= 1.0);
        CHECK(c <= std::max(1.0, z) + 1e-15);
        prev = c;
    }
    // smooth across the branch points: one-sided slopes agree
    for (double z : {1.0, 2.0}) {
        double left = (cutoff_chi(z) - cutoff_chi(z - 1e-4)) / 1e-4;
        double right = (cutoff_chi(z + 1e-4) - cutoff_chi(z)) / 1e-4;
        CHECK(left == Catch::Approx(right).margin(1e-3));
    }
}

TEST_CASE("time weight matches both growth forms", "[builder]")
{
    CHECK(time_weight(SchemeMode::additive, 2.0, 0.0) == Catch::Approx(16.0));
    CHECK(time_weight(SchemeMode::additive, 2.0, 0.5) == Catch::Approx(16.0 * std::exp(4.0)));
    CHECK(time_weight(SchemeMode::multiplicative, 2.0, 0.25) == Catch::Approx(std::exp(2.0 + 4.0)));
}

TEST_CASE("toy scales validate their constraints", "[builder]")
{
    ToyScales s;
    CHECK_NOTHROW(s.validate());
    s.r_perp = 0.15;
    CHECK_THROWS_AS(s.validate(), LedgerError);
    s = ToyScales{};
    s.r_par = 0.1;
    CHECK_THROWS_AS(s.validate(), LedgerError);
    s = ToyScales{};
    s.l = 0.0;
    CHECK_THROWS_AS(s.validate(), LedgerError);
}

TEST_CASE("energy pump keeps R / rho in the amplitude domain", "[builder]")
{
    Grid3 g(8);
    const double r_dom = domain_radius(build_direction_set());
    SymTensorField3 R = random_field<6>(g, 2, 3, false);
    PhysSym Rp = to_phys(R);
    for (double scale : {1e-3, 0.1, 1.0, 100.0}) {
        PhysScalar rho = energy_pump_rho(Rp, scale, r_dom);
        for (std::size_t p = 0; p < g.phys_size(); ++p) {
            double mag = std::sqrt(magnitude2(Rp, p));
            CHECK(mag / rho.v[0][p] <= r_dom * (1.0 + 1e-12));
            CHECK(rho.v[0][p] >= 2.0 * scale * (1.0 - 1e-12));
            CHECK(rho.v[0][p] <= 2.0 / r_dom * (scale + mag) * (1.0 + 1e-12));
        }
    }
    CHECK_THROWS_AS(energy_pump_rho(Rp, 0.0, r_dom), std::invalid_argument);
    CHECK_THROWS_AS(energy_pump_rho(Rp, 1.0, 0.6), std::invalid_argument);
}

TEST_CASE("amplitudes reproduce rho Id - R through the direction dyads", "[builder]")
{
    Grid3 g(8);
    DirectionSet ds = build_direction_set();
    GammaSolver gs(ds);
    const double r_dom = domain_radius(ds);
    PhysSym R = to_phys(random_field<6>(g, 2, 5, false));
    PhysScalar rho = energy_pump_rho(R, 0.05, r_dom);
    for (double ups : {1.0, 0.37, 2.9}) {
        Amplitudes A = amplitudes(rho, R, gs, false, ups);
        CHECK(A.max_ratio <= r_dom * (1.0 + 1e-12));
        double err = 0.0;
        for (std::size_t p = 0; p < g.phys_size(); ++p) {
            Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
            for (std::size_t i = 0; i < ds.size(); ++i) {
                Eigen::Vector3d xi(ds.xi(i).data());
                M += ups * A.abar[i][p] * A.abar[i][p] * xi * xi.transpose();
                CHECK(A.abar[i][p] == Catch::Approx(A.a[i][p] / std::sqrt(ups)));
            }
            Eigen::Matrix3d target = rho.v[0][p] * Eigen::Matrix3d::Identity() - to_matrix(detail::sym_at(R, p));
            err = std::max(err, (M - target).norm() / target.norm());
        }
        CHECK(err < 1e-12);
    }
    Amplitudes lit = amplitudes(rho, R, gs, true);
    Amplitudes unit = amplitudes(rho, R, gs, false);
    CHECK(lit.a[2][17] == Catch::Approx(unit.a[2][17] * std::pow(2.0 * M_PI, -0.75)));
}

TEST_CASE("amplitudes outside the domain report the grid point", "[builder]")
{
    Grid3 g(8);
    GammaSolver gs(build_direction_set());
    PhysSym R(g);
    PhysScalar rho(g);
    for (auto& x : rho.v[0]) x = 1.0;
    R.v[0][g.pidx(1, 2, 3)] = 0.9;
    try {
        amplitudes(rho, R, gs);
        FAIL("expected a domain error");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("(1,2,3)") != std::string::npos);
    }
}

TEST_CASE("amplitude corrector matches spectral curl curl on smooth inputs", "[builder]")
{
    Grid3 g(24);
    ScalarField a = random_field<1>(g, 2, 11, false);
    ScalarField f = random_field<1>(g, 3, 12, false);
    Vec3 xi{1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0};
    PhysScalar fp = to_phys(f);
    PhysVector gf = to_phys(gradient(f));
    std::array<std::vector<double>, 3> grad{gf.v[0], gf.v[1], gf.v[2]};
    PhysVector got = amplitude_corrector(a, fp.v[0], grad, xi);

    // oracle: curl curl(a xi f) - a curl curl(xi f), both spectral on a grid that resolves the product
    PhysScalar ap = to_phys(a);
    PhysVector af(g), xf(g);
    for (std::size_t p = 0; p < g.phys_size(); ++p)
        for (int k = 0; k < 3; ++k) {
            af.v[k][p] = ap.v[0][p] * fp.v[0][p] * xi[k];
            xf.v[k][p] = fp.v[0][p] * xi[k];
        }
    PhysVector cc = to_phys(curl(curl(to_spec(af))));
    PhysVector cx = to_phys(curl(curl(to_spec(xf))));
    PhysVector want(g);
    for (int k = 0; k < 3; ++k)
        for (std::size_t p = 0; p < g.phys_size(); ++p) want.v[k][p] = cc.v[k][p] - ap.v[0][p] * cx.v[k][p];
    CHECK(sup_diff(got, want) < 1e-9 * sup_abs(want));
}

TEST_CASE("base pairs solve their stage equations", "[builder]")
{
    Grid3 g(16);
    for (SchemeMode mode : {SchemeMode::additive, SchemeMode::multiplicative})
        for (double m : {0.8, 1.0, 1.2}) {
            auto base = base_pair(mode, 2.0, g, m);
            for (double t : {0.0, 0.3}) {
                ResidualReport r = residual(materialize(*base, t, 1e-4));
                INFO(to_string(mode) << " m=" << m << " t=" << t);
                CHECK(r.relative < 1e-10);
                CHECK(r.pressure_relative < 1e-10);
                CHECK(r.divergence < 1e-14);
            }
        }
}

TEST_CASE("base pairs with a noise path solve their stage equations", "[builder]")
{
    Grid3 g(16);
    for (SchemeMode mode : {SchemeMode::additive, SchemeMode::multiplicative}) {
        auto base = base_pair(mode, 2.0, g, 1.0, small_path(mode, 4));
        ResidualReport r = residual(materialize(*base, 0.1, 1e-4));
        INFO(to_string(mode));
        CHECK(r.relative < 1e-10);
        CHECK(r.pressure_relative < 1e-10);
    }
}

TEST_CASE("base pair norms follow the closed forms", "[builder]")
{
    Grid3 g(16);
    const double L = 2.0, c = std::pow(2.0 * M_PI, -1.5);
    auto add = base_pair(SchemeMode::additive, L, g, 1.0);
    auto mul = base_pair(SchemeMode::multiplicative, L, g, 1.0);
    for (double t : {0.0, 0.4}) {
        // ||A sin x3||_L2 = A (2 pi)^{3/2} / sqrt 2
        CHECK(l2(add->velocity(t)) == Catch::Approx(L * L * std::exp(2 * L * t) * c * std::pow(2 * M_PI, 1.5) / std::sqrt(2.0)));
        CHECK(l2(mul->velocity(t)) == Catch::Approx(m_L(L) * std::exp(2 * L * t + L) / std::sqrt(2.0)));
    }
    // with m = 1 and no noise R0 = (2L + 1) A (-cos x3)(E13 + E31) in the additive form
    StageState s = add->state(0.2);
    PhysSym R = to_phys(s.R);
    const double A = add->velocity_amplitude(0.2);
    double err = 0.0;
    for (int k = 0; k < g.n; ++k) err = std::max(err, std::abs(R.v[2][g.pidx(3, 5, k)] + (2 * L + 1) * A * std::cos(g.coord(k))));
    CHECK(err < 1e-12 * A);
    CHECK(sup_abs(R - PhysSym(g)) == Catch::Approx((2 * L + 1) * A));
}

TEST_CASE("residual grows linearly with a stress corruption", "[builder]")
{
    Grid3 g(16);
    auto base = base_pair(SchemeMode::additive, 2.0, g, 1.0);
    StagePair p = materialize(*base, 0.1, 1e-4);
    double norm_divR = l2(divergence(p.R[2]));
    SymTensorField3 bump = random_field<6>(g, 3, 8);
    for (double eps : {1e-2, 2e-2}) {
        StagePair q = p;
        q.R[2] += (eps * norm_divR / l2(divergence(bump))) * bump;
        ResidualReport r = residual(q);
        double want = l2(leray_project(divergence(q.R[2] - p.R[2])));
        CHECK(r.l2 == Catch::Approx(want).epsilon(1e-6));
    }
}

namespace {

std::shared_ptr<PerturbedStage> toy_stage(SchemeMode mode, const AuxPath& aux, int n = 32)
{
    return iterate(base_pair(mode, 2.0, Grid3(n), 1.0, aux), toy_config());
}

} // namespace

TEST_CASE("stage rejects grids that miss the jet supports", "[builder]")
{
    CHECK_THROWS_AS(toy_stage(SchemeMode::additive, trivial_aux(SchemeMode::additive), 8), ResolutionError);
    StageConfig c = toy_config();
    c.min_points_per_radius = 4.0;
    CHECK_THROWS_AS(iterate(base_pair(SchemeMode::additive, 2.0, Grid3(32), 1.0), c), ResolutionError);
}

TEST_CASE("one step satisfies its algebraic identities", "[builder][stage]")
{
    for (SchemeMode mode : {SchemeMode::additive, SchemeMode::multiplicative}) {
        INFO(to_string(mode));
        auto stage = toy_stage(mode, small_path(mode, 9));
        const double t = 0.1;
        IdentityReport r = stage->identities(t);
        CHECK(r.amplitude < 1e-12);
        CHECK(r.oscillation_pw < 1e-12);
        CHECK(r.div_wpc < 1e-12);
        CHECK(r.div_w < 1e-12);
        CHECK(r.mean_w < 1e-14);
        CHECK(r.max_ratio <= r.r_dom * (1.0 + 1e-12));
        CHECK(r.min_rho_over_scale >= 2.0 * (1.0 - 1e-12));
        if (mode == SchemeMode::multiplicative) CHECK(stage->perturbation(t)->moll.upsilon_l != 1.0);

        // every stress term except the oscillation is exact algebra: the
        // equation residual is the Leray part of the oscillation defect
        ResidualReport res = residual(materialize(*stage, t, toy_config().h));
        double defect = l2(leray_project(stage->oscillation_defect(t)));
        CHECK(res.l2 == Catch::Approx(defect).epsilon(1e-8));
        CHECK(res.divergence < 1e-12);
    }
}

TEST_CASE("corrector formula equals the spectral route for constant amplitudes", "[builder][stage]")
{
    // with a constant the derivative terms vanish and both routes reduce to curl curl V = W + W^c
    auto stage = toy_stage(SchemeMode::additive, trivial_aux(SchemeMode::additive));
    PerturbationAt P = *stage->perturbation(0.0);
    for (auto& a : P.abar) std::fill(a.begin(), a.end(), 0.5);
    auto js = stage->samples(0.0);
    FourierField3 formula = stage->corrector_formula(P, js);
    PhysVector want(stage->grid());
    for (std::size_t i = 0; i < js.size(); ++i) want += 0.5 * stage->jets().Wc(i, js[i]);
    CHECK(sup_diff(to_phys(formula), want) < 1e-12 * sup_abs(want));
}

TEST_CASE("new stage does not see the noise at time zero", "[builder][stage]")
{
    for (SchemeMode mode : {SchemeMode::additive, SchemeMode::multiplicative}) {
        INFO(to_string(mode));
        StageState a = toy_stage(mode, small_path(mode, 1))->state(0.0);
        StageState b = toy_stage(mode, small_path(mode, 2))->state(0.0);
        CHECK(sup_diff(to_phys(a.v), to_phys(b.v)) <= 1e-12 * sup_abs(to_phys(a.v)));
        CHECK(sup_diff(to_phys(a.R), to_phys(b.R)) <= 1e-12 * sup_abs(to_phys(a.R)));
        // later times do depend on the path
        FourierField3 va = toy_stage(mode, small_path(mode, 1))->velocity(0.2);
        FourierField3 vb = toy_stage(mode, small_path(mode, 2))->velocity(0.2);
        CHECK(rel_l2(va, vb) > 1e-6);
    }
}

TEST_CASE("stage evaluation is deterministic and cached", "[builder][stage]")
{
    auto s1 = toy_stage(SchemeMode::additive, small_path(SchemeMode::additive, 5));
    auto s2 = toy_stage(SchemeMode::additive, small_path(SchemeMode::additive, 5));
    FourierField3 a = s1->velocity(0.05), b = s2->velocity(0.05);
    for (int c = 0; c < 3; ++c) CHECK(a.c[c] == b.c[c]);
    CHECK(s1->perturbation(0.05).get() == s1->perturbation(0.05).get());
}

TEST_CASE("stage report collects the step diagnostics", "[builder][stage]")
{
    auto stage = toy_stage(SchemeMode::additive, trivial_aux(SchemeMode::additive));
    StageReport r = stage_report(*stage, 0.0);
    CHECK(r.q == 1);
    CHECK(r.stress_terms_l1.size() == 6);
    CHECK(r.prev_stress_l1 > 0.0);
    CHECK(r.v_increment_l2 == Catch::Approx(l2(stage->perturbation(0.0)->w() + stage->perturbation(0.0)->moll.v_l -
                                              stage->previous().velocity(0.0))));
    // without noise the second commutator vanishes
    for (auto& [name, v] : r.stress_terms_l1)
        if (name == "commutator2") CHECK(v == 0.0);
}
