#pragma once

#include "stochci/field.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

namespace stochci {

//! Per-mode data handed to symbol callbacks.
struct Mode {
    int kx, ky, kz;    //!< signed wavenumbers
    double dx, dy, dz; //!< derivative symbols (0 at Nyquist)
    std::size_t idx;
    double k2() const { return dx * dx + dy * dy + dz * dz; }
    double true_k2() const { return double(kx) * kx + double(ky) * ky + double(kz) * kz; }
    //! Modes with no derivative content: the mean and the Nyquist corners.
    bool null() const { return dx == 0.0 && dy == 0.0 && dz == 0.0; }
    //! Weight of this half-spectrum entry in a full-spectrum sum.
    double multiplicity(int n) const { return (kz == 0 || kz == n / 2) ? 1.0 : 2.0; }
};

template <typename F>
void for_each_mode(const Grid3& g, F&& f)
{
    const int n = g.n, nh = g.nh();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < nh; ++k) {
                Mode m{g.wavenumber(i), g.wavenumber(j), k,
                       g.deriv_symbol(i), g.deriv_symbol(j), g.deriv_symbol(k), g.sidx(i, j, k)};
                f(m);
            }
}

//! Multiplies every component by a real symbol s(mode).
template <int NC, typename S>
SpectralField<NC> apply_symbol(const SpectralField<NC>& f, S&& s)
{
    SpectralField<NC> r = f;
    for_each_mode(f.grid, [&](const Mode& m) {
        double v = s(m);
        for (int a = 0; a < NC; ++a) r.c[a][m.idx] *= v;
    });
    return r;
}

inline double axis_symbol(const Mode& m, int axis) { return axis == 0 ? m.dx : (axis == 1 ? m.dy : m.dz); }

//! Spectral partial derivative of one component.
template <int NC>
ScalarField partial(const SpectralField<NC>& f, int comp, int axis)
{
    ScalarField r(f.grid);
    r.time_tag = f.time_tag;
    for_each_mode(f.grid, [&](const Mode& m) { r.c[0][m.idx] = cplx(0.0, axis_symbol(m, axis)) * f.c[comp][m.idx]; });
    return r;
}

inline FourierField3 gradient(const ScalarField& f)
{
    FourierField3 r(f.grid);
    r.time_tag = f.time_tag;
    for_each_mode(f.grid, [&](const Mode& m) {
        cplx v = f.c[0][m.idx];
        r.c[0][m.idx] = cplx(0.0, m.dx) * v;
        r.c[1][m.idx] = cplx(0.0, m.dy) * v;
        r.c[2][m.idx] = cplx(0.0, m.dz) * v;
    });
    return r;
}

inline ScalarField divergence(const FourierField3& f)
{
    ScalarField r(f.grid);
    r.time_tag = f.time_tag;
    for_each_mode(f.grid, [&](const Mode& m) {
        r.c[0][m.idx] = cplx(0.0, m.dx) * f.c[0][m.idx] + cplx(0.0, m.dy) * f.c[1][m.idx] +
                        cplx(0.0, m.dz) * f.c[2][m.idx];
    });
    return r;
}

//! Row divergence (div T)_i = d_j T_ij of a symmetric tensor field.
inline FourierField3 divergence(const SymTensorField3& t)
{
    FourierField3 r(t.grid);
    r.time_tag = t.time_tag;
    for_each_mode(t.grid, [&](const Mode& m) {
        const double d[3] = {m.dx, m.dy, m.dz};
        for (int i = 0; i < 3; ++i) {
            cplx s(0.0, 0.0);
            for (int j = 0; j < 3; ++j) s += cplx(0.0, d[j]) * t.c[sym_index(i, j)][m.idx];
            r.c[i][m.idx] = s;
        }
    });
    return r;
}

inline FourierField3 curl(const FourierField3& f)
{
    FourierField3 r(f.grid);
    r.time_tag = f.time_tag;
    for_each_mode(f.grid, [&](const Mode& m) {
        const cplx ix(0.0, m.dx), iy(0.0, m.dy), iz(0.0, m.dz);
        cplx u = f.c[0][m.idx], v = f.c[1][m.idx], w = f.c[2][m.idx];
        r.c[0][m.idx] = iy * w - iz * v;
        r.c[1][m.idx] = iz * u - ix * w;
        r.c[2][m.idx] = ix * v - iy * u;
    });
    return r;
}

template <int NC>
SpectralField<NC> laplacian(const SpectralField<NC>& f)
{
    return apply_symbol(f, [](const Mode& m) { return -m.k2(); });
}

//! Inverse Laplacian on the complement of the null modes (set to zero there).
template <int NC>
SpectralField<NC> inverse_laplacian(const SpectralField<NC>& f)
{
    return apply_symbol(f, [](const Mode& m) { return m.null() ? 0.0 : -1.0 / m.k2(); });
}

//! (-Delta)^m with symbol |k|^{2m}; the zero mode is annihilated.
template <int NC>
SpectralField<NC> fractional_laplacian(const SpectralField<NC>& f, double m)
{
    if (!std::isfinite(m) || m <= 0.0) throw std::invalid_argument("fractional_laplacian: exponent must be finite and > 0");
    return apply_symbol(f, [m](const Mode& md) {
        double k2 = md.k2();
        return k2 == 0.0 ? 0.0 : std::pow(k2, m);
    });
}

//! e^{-t (-Delta)^m}.
template <int NC>
SpectralField<NC> heat_semigroup(const SpectralField<NC>& f, double t, double m)
{
    if (!(t >= 0.0)) throw std::invalid_argument("heat_semigroup: t must be >= 0");
    if (!std::isfinite(m) || m <= 0.0) throw std::invalid_argument("heat_semigroup: exponent must be finite and > 0");
    return apply_symbol(f, [t, m](const Mode& md) {
        double k2 = md.k2();
        return k2 == 0.0 ? 1.0 : std::exp(-t * std::pow(k2, m));
    });
}

//! Removes the null modes (mean and Nyquist corners).
template <int NC>
SpectralField<NC> remove_null_modes(const SpectralField<NC>& f)
{
    return apply_symbol(f, [](const Mode& m) { return m.null() ? 0.0 : 1.0; });
}

//! Removes only the k = 0 coefficient.
template <int NC>
SpectralField<NC> remove_mean(const SpectralField<NC>& f)
{
    SpectralField<NC> r = f;
    for (int a = 0; a < NC; ++a) r.c[a][0] = 0.0;
    return r;
}

//! Leray projection. Keeps the mean, drops the Nyquist corners.
inline FourierField3 leray_project(const FourierField3& f)
{
    FourierField3 r(f.grid);
    r.time_tag = f.time_tag;
    for_each_mode(f.grid, [&](const Mode& m) {
        if (m.null()) {
            if (m.idx == 0)
                for (int a = 0; a < 3; ++a) r.c[a][0] = f.c[a][0];
            return;
        }
        const double d[3] = {m.dx, m.dy, m.dz};
        double k2 = m.k2();
        cplx kf = d[0] * f.c[0][m.idx] + d[1] * f.c[1][m.idx] + d[2] * f.c[2][m.idx];
        for (int a = 0; a < 3; ++a) r.c[a][m.idx] = f.c[a][m.idx] - d[a] * kf / k2;
    });
    return r;
}

//! Inverse divergence: with u = Delta^{-1} v,
//!   R v = 1/4 (grad P u + (grad P u)^T) + 3/4 (grad u + (grad u)^T) - 1/2 (div u) Id.
//! Symmetric and trace-free; div R v = v on non-null modes.
inline SymTensorField3 inverse_divergence(const FourierField3& v)
{
    SymTensorField3 r(v.grid);
    r.time_tag = v.time_tag;
    for_each_mode(v.grid, [&](const Mode& m) {
        if (m.null()) return;
        const double d[3] = {m.dx, m.dy, m.dz};
        const double k2 = m.k2();
        cplx u[3], pu[3];
        for (int a = 0; a < 3; ++a) u[a] = -v.c[a][m.idx] / k2;
        cplx ku = d[0] * u[0] + d[1] * u[1] + d[2] * u[2];
        for (int a = 0; a < 3; ++a) pu[a] = u[a] - d[a] * ku / k2;
        const cplx I(0.0, 1.0);
        cplx divu = I * ku;
        for (int i = 0; i < 3; ++i)
            for (int j = i; j < 3; ++j) {
                cplx gp = I * (d[j] * pu[i] + d[i] * pu[j]);
                cplx gu = I * (d[j] * u[i] + d[i] * u[j]);
                cplx val = 0.25 * gp + 0.75 * gu;
                if (i == j) val -= 0.5 * divu;
                r.c[sym_index(i, j)][m.idx] = val;
            }
    });
    return r;
}

//! Delta^{-1} div of a vector field, scalar result, null modes dropped.
inline ScalarField inverse_laplacian_div(const FourierField3& f) { return inverse_laplacian(divergence(f)); }

//! Copies a spectrum onto a grid of size N >= n, dropping Nyquist content.
template <int NC>
SpectralField<NC> pad_spectrum(const SpectralField<NC>& f, const Grid3& big)
{
    SpectralField<NC> r(big);
    const int n = f.grid.n, N = big.n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n / 2; ++k) {
                if (i == n / 2 || j == n / 2) continue;
                int ki = f.grid.wavenumber(i), kj = f.grid.wavenumber(j);
                int I = ki < 0 ? ki + N : ki, J = kj < 0 ? kj + N : kj;
                for (int a = 0; a < NC; ++a) r.c[a][big.sidx(I, J, k)] = f.c[a][f.grid.sidx(i, j, k)];
            }
    return r;
}

//! Inverse of pad_spectrum: keeps |k_i| < n/2.
template <int NC>
SpectralField<NC> truncate_spectrum(const SpectralField<NC>& f, const Grid3& small)
{
    SpectralField<NC> r(small);
    const int n = small.n, N = f.grid.n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n / 2; ++k) {
                if (i == n / 2 || j == n / 2) continue;
                int ki = small.wavenumber(i), kj = small.wavenumber(j);
                int I = ki < 0 ? ki + N : ki, J = kj < 0 ? kj + N : kj;
                for (int a = 0; a < NC; ++a) r.c[a][small.sidx(i, j, k)] = f.c[a][f.grid.sidx(I, J, k)];
            }
    return r;
}

//! Pointwise product evaluated on the grid enlarged by the dealias factor,
//! then truncated back. Exact when the inputs are band-limited to n/(1+f).
template <int NA, int NB, int NR, typename Op>
SpectralField<NR> dealiased_apply(const SpectralField<NA>& a, const SpectralField<NB>& b, Op&& op)
{
    Grid3 big(a.grid.padded_n(), 1, 1);
    auto pa = to_phys(pad_spectrum(a, big));
    auto pb = to_phys(pad_spectrum(b, big));
    PhysField<NR> pr(big);
    std::array<double, NA> xa;
    std::array<double, NB> xb;
    for (std::size_t p = 0; p < big.phys_size(); ++p) {
        for (int c = 0; c < NA; ++c) xa[c] = pa.v[c][p];
        for (int c = 0; c < NB; ++c) xb[c] = pb.v[c][p];
        std::array<double, NR> out = op(xa, xb);
        for (int c = 0; c < NR; ++c) pr.v[c][p] = out[c];
    }
    auto r = truncate_spectrum(to_spec(pr), a.grid);
    r.time_tag = a.time_tag;
    return r;
}

inline ScalarField dealiased_product(const ScalarField& a, const ScalarField& b)
{
    return dealiased_apply<1, 1, 1>(a, b, [](const auto& x, const auto& y) { return std::array<double, 1>{x[0] * y[0]}; });
}

} // namespace stochci
