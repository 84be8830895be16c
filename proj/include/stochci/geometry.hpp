#pragma once

#include "stochci/rational.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace stochci {

using RVec3 = std::array<Rational, 3>;
using Vec3 = std::array<double, 3>;
//! Symmetric 3x3 matrix as (11, 12, 13, 22, 23, 33).
using Sym6 = std::array<double, 6>;

inline Rational rdot(const RVec3& a, const RVec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline RVec3 rcross(const RVec3& a, const RVec3& b)
{
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline Vec3 to_vec(const RVec3& a) { return {to_double(a[0]), to_double(a[1]), to_double(a[2])}; }

inline Eigen::Matrix3d to_matrix(const Sym6& s)
{
    Eigen::Matrix3d m;
    m << s[0], s[1], s[2], s[1], s[3], s[4], s[2], s[4], s[5];
    return m;
}
inline Sym6 to_sym6(const Eigen::Matrix3d& m) { return {m(0, 0), m(0, 1), m(0, 2), m(1, 1), m(1, 2), m(2, 2)}; }
inline Sym6 identity6() { return {1, 0, 0, 1, 0, 1}; }
inline double frobenius(const Sym6& s)
{
    return std::sqrt(s[0] * s[0] + s[3] * s[3] + s[5] * s[5] + 2 * (s[1] * s[1] + s[2] * s[2] + s[4] * s[4]));
}
//! Largest absolute eigenvalue.
inline double operator_norm(const Sym6& s)
{
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(to_matrix(s), Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

//! gamma evaluated outside its admissible ball.
struct DomainError : std::domain_error {
    double distance;
    DomainError(const std::string& what, double d) : std::domain_error(what), distance(d) {}
};

//! Six rational unit directions, their rational frames and derived data.
struct DirectionSet {
    std::vector<RVec3> directions;
    std::vector<RVec3> frame_a; //!< A_xi
    std::vector<RVec3> frame_b; //!< xi x A_xi
    int n_star = 1;
    double positivity_radius = 0.0;

    std::size_t size() const { return directions.size(); }
    Vec3 xi(std::size_t i) const { return to_vec(directions[i]); }
    Vec3 a(std::size_t i) const { return to_vec(frame_a[i]); }
    Vec3 b(std::size_t i) const { return to_vec(frame_b[i]); }
};

//! Exact linear map R -> (c_xi(R)) with sum c_xi xi (x) xi = R, and
//! gamma_xi = sqrt(c_xi).
class GammaSolver {
public:
    explicit GammaSolver(DirectionSet ds);

    const DirectionSet& directions() const { return ds_; }
    //! Exact entries of the 6x6 inverse, row xi, column sym entry.
    const std::array<std::array<Rational, 6>, 6>& exact_inverse() const { return inv_; }

    double coefficient(std::size_t xi, const Sym6& r) const
    {
        double s = 0.0;
        for (int e = 0; e < 6; ++e) s += invd_[xi][e] * r[e];
        return s;
    }
    std::array<double, 6> coefficients(const Sym6& r) const
    {
        std::array<double, 6> c{};
        for (std::size_t x = 0; x < 6; ++x) c[x] = coefficient(x, r);
        return c;
    }
    //! c_xi(Id), exact.
    Rational coefficient_at_identity(std::size_t xi) const
    {
        return inv_[xi][0] + inv_[xi][3] + inv_[xi][5];
    }

    //! Dual matrix C_xi with <C_xi, R>_F = c_xi(R).
    Eigen::Matrix3d dual(std::size_t xi) const
    {
        Sym6 s{invd_[xi][0], 0.5 * invd_[xi][1], 0.5 * invd_[xi][2], invd_[xi][3], 0.5 * invd_[xi][4], invd_[xi][5]};
        return to_matrix(s);
    }
    double dual_nuclear(std::size_t xi) const
    {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(dual(xi), Eigen::EigenvaluesOnly);
        return es.eigenvalues().cwiseAbs().sum();
    }
    double dual_frobenius(std::size_t xi) const { return dual(xi).norm(); }

    //! gamma_xi(R) for all xi; throws DomainError outside the admissible ball
    //! (operator norm of R - Id above the positivity radius).
    std::array<double, 6> gamma(const Sym6& r) const
    {
        Sym6 d = r;
        d[0] -= 1.0;
        d[3] -= 1.0;
        d[5] -= 1.0;
        double dist = operator_norm(d);
        if (dist > ds_.positivity_radius) {
            std::ostringstream s;
            s << std::setprecision(17) << "gamma: |R - Id| = " << dist << " exceeds positivity radius " << ds_.positivity_radius;
            throw DomainError(s.str(), dist);
        }
        return gamma_unchecked(r);
    }
    std::array<double, 6> gamma_unchecked(const Sym6& r) const
    {
        auto c = coefficients(r);
        std::array<double, 6> g{};
        for (int x = 0; x < 6; ++x) g[x] = std::sqrt(std::max(c[x], 0.0));
        return g;
    }

    //! sum_xi gamma_xi^2 xi (x) xi.
    Sym6 reconstruct(const std::array<double, 6>& g) const
    {
        Sym6 r{};
        for (std::size_t x = 0; x < 6; ++x) {
            Vec3 v = ds_.xi(x);
            double w = g[x] * g[x];
            r[0] += w * v[0] * v[0];
            r[1] += w * v[0] * v[1];
            r[2] += w * v[0] * v[2];
            r[3] += w * v[1] * v[1];
            r[4] += w * v[1] * v[2];
            r[5] += w * v[2] * v[2];
        }
        return r;
    }

private:
    DirectionSet ds_;
    std::array<std::array<Rational, 6>, 6> inv_;
    std::array<std::array<double, 6>, 6> invd_;
};

//! Dyad xi (x) xi in the 6-entry layout, exact.
inline std::array<Rational, 6> rational_dyad(const RVec3& v)
{
    return {v[0] * v[0], v[0] * v[1], v[0] * v[2], v[1] * v[1], v[1] * v[2], v[2] * v[2]};
}

//! Exact Gauss-Jordan inverse; throws if singular. Column j of m is the
//! dyad of direction j, so row i of the result gives c_i.
inline std::array<std::array<Rational, 6>, 6> rational_inverse(std::array<std::array<Rational, 6>, 6> m)
{
    std::array<std::array<Rational, 6>, 6> inv{};
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) inv[i][j] = i == j ? 1 : 0;
    for (int col = 0; col < 6; ++col) {
        int piv = -1;
        for (int r = col; r < 6; ++r)
            if (m[r][col] != 0) {
                piv = r;
                break;
            }
        if (piv < 0) throw std::runtime_error("dyads do not span the symmetric matrices");
        std::swap(m[piv], m[col]);
        std::swap(inv[piv], inv[col]);
        Rational p = m[col][col];
        for (int j = 0; j < 6; ++j) {
            m[col][j] /= p;
            inv[col][j] /= p;
        }
        for (int r = 0; r < 6; ++r) {
            if (r == col || m[r][col] == 0) continue;
            Rational f = m[r][col];
            for (int j = 0; j < 6; ++j) {
                m[r][j] -= f * m[col][j];
                inv[r][j] -= f * inv[col][j];
            }
        }
    }
    return inv;
}

//! Rank of the dyad matrix by exact elimination.
inline int dyad_rank(const std::vector<RVec3>& dirs)
{
    std::vector<std::array<Rational, 6>> rows;
    for (const auto& d : dirs) rows.push_back(rational_dyad(d));
    int rank = 0;
    for (int col = 0; col < 6 && rank < int(rows.size()); ++col) {
        int piv = -1;
        for (int r = rank; r < int(rows.size()); ++r)
            if (rows[r][col] != 0) {
                piv = r;
                break;
            }
        if (piv < 0) continue;
        std::swap(rows[piv], rows[rank]);
        for (int r = 0; r < int(rows.size()); ++r) {
            if (r == rank || rows[r][col] == 0) continue;
            Rational f = rows[r][col] / rows[rank][col];
            for (int j = 0; j < 6; ++j) rows[r][j] -= f * rows[rank][j];
        }
        ++rank;
    }
    return rank;
}

inline GammaSolver::GammaSolver(DirectionSet ds) : ds_(std::move(ds))
{
    if (ds_.size() != 6) throw std::invalid_argument("direction set must have six elements");
    std::array<std::array<Rational, 6>, 6> m{};
    for (int x = 0; x < 6; ++x) {
        auto d = rational_dyad(ds_.directions[x]);
        for (int e = 0; e < 6; ++e) m[e][x] = d[e];
    }
    inv_ = rational_inverse(m);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) invd_[i][j] = to_double(inv_[i][j]);
}

//! Largest r with c_xi(Id + E) > 0 for all |E|_op <= r: the linear form
//! attains its minimum -r |C_xi|_nuclear on that ball.
inline double positivity_radius_bound(const GammaSolver& g)
{
    double r = INFINITY;
    for (std::size_t x = 0; x < 6; ++x) r = std::min(r, to_double(g.coefficient_at_identity(x)) / g.dual_nuclear(x));
    return r;
}

//! Random symmetric E with |E|_op <= radius: Haar rotation of a random
//! diagonal.
inline Sym6 random_ball_point(std::mt19937_64& rng, double radius)
{
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(-radius, radius);
    Eigen::Matrix3d gm;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) gm(i, j) = nd(rng);
    Eigen::HouseholderQR<Eigen::Matrix3d> qr(gm);
    Eigen::Matrix3d q = qr.householderQ();
    Eigen::Vector3d ev(ud(rng), ud(rng), ud(rng));
    return to_sym6(q * ev.asDiagonal() * q.transpose());
}

//! The point of the radius-r ball minimizing (sign -1) or maximizing (+1)
//! c_xi: -/+ r times the sign pattern of C_xi in its eigenbasis.
inline Sym6 extremal_point(const GammaSolver& g, std::size_t xi, double r, int sign)
{
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(g.dual(xi));
    Eigen::Vector3d s = es.eigenvalues().unaryExpr([](double v) { return v >= 0 ? 1.0 : -1.0; });
    Eigen::Matrix3d e = double(sign) * r * es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
    return to_sym6(e);
}

struct PositivityCertificate {
    double radius = 0.0;
    long samples = 0;
    double min_coefficient_inside = INFINITY; //!< over samples at 0.999999 r
    double min_coefficient_beyond = INFINITY; //!< extremal points at 1.001 r
    bool certified = false;
};

//! Dense sampling check of the positivity radius together with sharpness.
inline PositivityCertificate certify_positivity(const GammaSolver& g, double r, long samples, std::uint64_t seed)
{
    PositivityCertificate c;
    c.radius = r;
    c.samples = samples;
    std::mt19937_64 rng(seed);
    const double inner = r * (1.0 - 1e-6);
    auto check = [&](const Sym6& e) {
        Sym6 m = e;
        m[0] += 1;
        m[3] += 1;
        m[5] += 1;
        for (double v : g.coefficients(m)) c.min_coefficient_inside = std::min(c.min_coefficient_inside, v);
    };
    for (long s = 0; s < samples; ++s) check(random_ball_point(rng, inner));
    for (std::size_t x = 0; x < 6; ++x) {
        check(extremal_point(g, x, inner, -1));
        Sym6 out = extremal_point(g, x, r * 1.001, -1);
        out[0] += 1;
        out[3] += 1;
        out[5] += 1;
        c.min_coefficient_beyond = std::min(c.min_coefficient_beyond, g.coefficient(x, out));
    }
    c.certified = c.min_coefficient_inside > 0.0 && c.min_coefficient_beyond < 0.0;
    return c;
}

//! The hard-coded six directions (coordinates over 3) with their frames.
inline DirectionSet build_direction_set()
{
    const int dirs[6][3] = {{3, 0, 0}, {0, 3, 0}, {1, 2, 2}, {1, 2, -2}, {2, -1, 2}, {2, -1, -2}};
    const int frames[6][3] = {{0, 3, 0}, {3, 0, 0}, {2, 1, -2}, {2, 1, 2}, {2, 2, -1}, {2, 2, 1}};
    DirectionSet ds;
    for (int i = 0; i < 6; ++i) {
        RVec3 x{rat(dirs[i][0], 3), rat(dirs[i][1], 3), rat(dirs[i][2], 3)};
        RVec3 a{rat(frames[i][0], 3), rat(frames[i][1], 3), rat(frames[i][2], 3)};
        ds.directions.push_back(x);
        ds.frame_a.push_back(a);
        ds.frame_b.push_back(rcross(x, a));
    }
    BigInt l = 1;
    for (int i = 0; i < 6; ++i)
        for (const auto* v : {&ds.directions[i], &ds.frame_a[i], &ds.frame_b[i]})
            for (const auto& c : *v) l = boost::multiprecision::lcm(l, denominator(c));
    ds.n_star = int(l);
    for (int i = 0; i < 6; ++i) {
        const RVec3* t[3] = {&ds.directions[i], &ds.frame_a[i], &ds.frame_b[i]};
        for (int p = 0; p < 3; ++p)
            for (int q = 0; q < 3; ++q)
                if (rdot(*t[p], *t[q]) != (p == q ? 1 : 0)) throw std::logic_error("frame is not orthonormal");
    }
    if (dyad_rank(ds.directions) != 6) throw std::logic_error("dyads do not span Sym(3)");
    GammaSolver tmp(ds);
    for (std::size_t x = 0; x < 6; ++x)
        if (tmp.coefficient_at_identity(x) <= 0) throw std::logic_error("c_xi(Id) must be positive");
    ds.positivity_radius = positivity_radius_bound(tmp);
    return ds;
}

//! Constants C_Lambda = 8 |Lambda| (1 + 8 pi^3)^{1/2} and
//! M = C_Lambda max_xi (sup gamma_xi + sup |grad gamma_xi|) on the ball of
//! radius r around Id (|grad| is the Frobenius norm of C_xi / (2 gamma_xi)).
struct GeometryConstants {
    double c_lambda = 0.0;
    double radius = 0.0;
    double M = 0.0;         //!< closed form
    double M_sampled = 0.0; //!< sampled estimate
    long samples = 0;
};

inline double c_lambda(std::size_t count) { return 8.0 * double(count) * std::sqrt(1.0 + 8.0 * std::pow(M_PI, 3)); }

inline double closed_form_M(const GammaSolver& g, double r)
{
    double best = 0.0;
    for (std::size_t x = 0; x < 6; ++x) {
        double c0 = to_double(g.coefficient_at_identity(x)), nuc = g.dual_nuclear(x);
        if (c0 - r * nuc <= 0.0) return INFINITY;
        double v = std::sqrt(c0 + r * nuc) + g.dual_frobenius(x) / (2.0 * std::sqrt(c0 - r * nuc));
        best = std::max(best, v);
    }
    return c_lambda(g.directions().size()) * best;
}

//! Sampled sup of |gamma| and |grad gamma| over the ball: random points plus
//! the extremal points of each linear form.
inline double sampled_M(const GammaSolver& g, double r, long samples, std::uint64_t seed)
{
    std::array<double, 6> sup_g{}, sup_dg{};
    auto visit = [&](const Sym6& e) {
        Sym6 m = e;
        m[0] += 1;
        m[3] += 1;
        m[5] += 1;
        auto c = g.coefficients(m);
        for (std::size_t x = 0; x < 6; ++x) {
            double gam = std::sqrt(std::max(c[x], 0.0));
            sup_g[x] = std::max(sup_g[x], gam);
            sup_dg[x] = std::max(sup_dg[x], g.dual_frobenius(x) / (2.0 * gam));
        }
    };
    std::mt19937_64 rng(seed);
    for (long s = 0; s < samples; ++s) visit(random_ball_point(rng, r));
    for (std::size_t x = 0; x < 6; ++x) {
        visit(extremal_point(g, x, r, -1));
        visit(extremal_point(g, x, r, +1));
    }
    double best = 0.0;
    for (std::size_t x = 0; x < 6; ++x) best = std::max(best, sup_g[x] + sup_dg[x]);
    return c_lambda(g.directions().size()) * best;
}

inline GeometryConstants constants(const GammaSolver& g, double r, long samples = 20000, std::uint64_t seed = 1)
{
    GeometryConstants k;
    k.c_lambda = c_lambda(g.directions().size());
    k.radius = r;
    k.M = closed_form_M(g, r);
    k.M_sampled = sampled_M(g, r, samples, seed);
    k.samples = samples;
    return k;
}

//! Admissible radius used downstream: min(1/2, theta r*). The margin keeps
//! grad gamma bounded, which blows up at r*.
inline double domain_radius(const DirectionSet& ds, double theta = 0.9) { return std::min(0.5, theta * ds.positivity_radius); }

//! Short stable text identifying Lambda, n_star and the positivity radius.
inline std::string geometry_fingerprint(const DirectionSet& ds)
{
    std::ostringstream s;
    s << "Lambda=";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        s << (i ? ";" : "") << "(";
        for (int c = 0; c < 3; ++c) s << (c ? "," : "") << to_string(ds.directions[i][c]);
        s << ")";
    }
    s << "|n_star=" << ds.n_star << "|r_star=" << std::setprecision(12) << ds.positivity_radius;
    std::string txt = s.str();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : txt) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    std::ostringstream out;
    out << txt << "|fnv=" << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

} // namespace stochci
