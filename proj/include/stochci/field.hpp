#pragma once

#include "stochci/grid.hpp"

#include <array>
#include <optional>
#include <vector>

namespace stochci {

//! Real field on T^3 held as half-spectrum coefficients, NC components.
template <int NC>
struct SpectralField {
    Grid3 grid;
    std::array<std::vector<cplx>, NC> c;
    std::optional<double> time_tag;

    SpectralField() = default;
    explicit SpectralField(const Grid3& g) : grid(g)
    {
        for (auto& v : c) v.assign(g.spec_size(), cplx(0.0, 0.0));
    }

    static constexpr int components = NC;

    cplx mean(int comp) const { return c[comp][0]; }

    SpectralField& operator+=(const SpectralField& o)
    {
        for (int a = 0; a < NC; ++a)
            for (std::size_t i = 0; i < c[a].size(); ++i) c[a][i] += o.c[a][i];
        return *this;
    }
    SpectralField& operator-=(const SpectralField& o)
    {
        for (int a = 0; a < NC; ++a)
            for (std::size_t i = 0; i < c[a].size(); ++i) c[a][i] -= o.c[a][i];
        return *this;
    }
    SpectralField& operator*=(double s)
    {
        for (auto& v : c)
            for (auto& x : v) x *= s;
        return *this;
    }
    friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
    friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
    friend SpectralField operator*(double s, SpectralField a) { return a *= s; }
};

using ScalarField = SpectralField<1>;
using FourierField3 = SpectralField<3>;
//! Entries ordered 11, 12, 13, 22, 23, 33.
using SymTensorField3 = SpectralField<6>;

//! Index of entry (i, j) in the 6-component symmetric layout.
inline constexpr int sym_index(int i, int j)
{
    if (i > j) { int t = i; i = j; j = t; }
    constexpr int table[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
    return table[i][j];
}

//! Pointwise samples on the grid, NC components.
template <int NC>
struct PhysField {
    Grid3 grid;
    std::array<std::vector<double>, NC> v;

    PhysField() = default;
    explicit PhysField(const Grid3& g) : grid(g)
    {
        for (auto& x : v) x.assign(g.phys_size(), 0.0);
    }

    PhysField& operator+=(const PhysField& o)
    {
        for (int a = 0; a < NC; ++a)
            for (std::size_t i = 0; i < v[a].size(); ++i) v[a][i] += o.v[a][i];
        return *this;
    }
    PhysField& operator-=(const PhysField& o)
    {
        for (int a = 0; a < NC; ++a)
            for (std::size_t i = 0; i < v[a].size(); ++i) v[a][i] -= o.v[a][i];
        return *this;
    }
    PhysField& operator*=(double s)
    {
        for (auto& x : v)
            for (auto& y : x) y *= s;
        return *this;
    }
    friend PhysField operator+(PhysField a, const PhysField& b) { return a += b; }
    friend PhysField operator-(PhysField a, const PhysField& b) { return a -= b; }
    friend PhysField operator*(double s, PhysField a) { return a *= s; }
};

using PhysScalar = PhysField<1>;
using PhysVector = PhysField<3>;
using PhysSym = PhysField<6>;

template <int NC>
PhysField<NC> to_phys(const SpectralField<NC>& f)
{
    PhysField<NC> p(f.grid);
    for (int a = 0; a < NC; ++a) inverse_fft(f.grid.n, f.c[a].data(), p.v[a].data());
    return p;
}

template <int NC>
SpectralField<NC> to_spec(const PhysField<NC>& p)
{
    SpectralField<NC> f(p.grid);
    for (int a = 0; a < NC; ++a) forward_fft(p.grid.n, p.v[a].data(), f.c[a].data());
    return f;
}

//! Samples a callable g(x, y, z) -> std::array<double, NC> on the grid.
template <int NC, typename G>
PhysField<NC> sample(const Grid3& grid, G&& g)
{
    PhysField<NC> p(grid);
    const int n = grid.n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                std::array<double, NC> val = g(grid.coord(i), grid.coord(j), grid.coord(k));
                std::size_t id = grid.pidx(i, j, k);
                for (int a = 0; a < NC; ++a) p.v[a][id] = val[a];
            }
    return p;
}

//! Picks components out of a field.
template <int NOut, int NC>
SpectralField<NOut> components(const SpectralField<NC>& f, std::array<int, NOut> which)
{
    SpectralField<NOut> r(f.grid);
    r.time_tag = f.time_tag;
    for (int a = 0; a < NOut; ++a) r.c[a] = f.c[which[a]];
    return r;
}

} // namespace stochci
