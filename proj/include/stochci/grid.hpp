#pragma once

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace stochci {

using cplx = std::complex<double>;
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

//! Uniform grid on [-pi, pi)^3 with n samples per axis.
//! Sample j on an axis sits at x = -pi + 2 pi j / n.
struct Grid3 {
    int n = 32;
    int dealias_num = 3; //!< products use a grid enlarged by num/den
    int dealias_den = 2;

    Grid3() = default;
    explicit Grid3(int n_, int num = 3, int den = 2) : n(n_), dealias_num(num), dealias_den(den)
    {
        validate();
    }

    void validate() const
    {
        if (n < 8 || n % 2 != 0) throw std::invalid_argument("grid n must be even and >= 8, got " + std::to_string(n));
        if (dealias_den <= 0 || dealias_num < dealias_den)
            throw std::invalid_argument("dealias factor must be >= 1");
        if ((n * dealias_num) % dealias_den != 0 || (n * dealias_num / dealias_den) % 2 != 0)
            throw std::invalid_argument("dealias factor does not give an even integer grid");
    }

    int nh() const { return n / 2 + 1; }
    std::size_t spec_size() const { return std::size_t(n) * n * nh(); }
    std::size_t phys_size() const { return std::size_t(n) * n * n; }
    int padded_n() const { return n * dealias_num / dealias_den; }
    double cell_volume() const { return std::pow(kTwoPi / n, 3); }
    double coord(int j) const { return -kPi + kTwoPi * j / n; }

    //! Signed wavenumber of FFT index i along a full axis.
    int wavenumber(int i) const { return i < n / 2 ? i : i - n; }
    //! Derivative symbol: the Nyquist index carries no derivative, so the
    //! sample/coefficient map stays a real bijection and d/dx stays real.
    double deriv_symbol(int i) const
    {
        if (i == n / 2) return 0.0;
        return double(wavenumber(i));
    }

    std::size_t sidx(int i, int j, int k) const { return (std::size_t(i) * n + j) * nh() + k; }
    std::size_t pidx(int i, int j, int k) const { return (std::size_t(i) * n + j) * n + k; }

    bool operator==(const Grid3& o) const
    {
        return n == o.n && dealias_num * o.dealias_den == o.dealias_num * dealias_den;
    }
};

namespace detail {

struct PlanPair {
    fftw_plan r2c = nullptr;
    fftw_plan c2r = nullptr;
};

//! FFTW plans keyed by grid size. Planning is serialized; execution through
//! the new-array interface is thread-safe.
inline PlanPair plans_for(int n)
{
    static std::mutex mu;
    static std::map<int, PlanPair> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::size_t ns = std::size_t(n) * n * (n / 2 + 1);
    std::size_t np = std::size_t(n) * n * n;
    double* r = fftw_alloc_real(np);
    fftw_complex* c = fftw_alloc_complex(ns);
    unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    PlanPair p;
    p.r2c = fftw_plan_dft_r2c_3d(n, n, n, r, c, flags);
    p.c2r = fftw_plan_dft_c2r_3d(n, n, n, c, r, flags | FFTW_DESTROY_INPUT);
    fftw_free(r);
    fftw_free(c);
    if (!p.r2c || !p.c2r) throw std::runtime_error("FFTW planning failed");
    cache[n] = p;
    return p;
}

} // namespace detail

//! Samples -> coefficients normalized by 1/n^3, so the k=0 entry is the mean.
//! Grid samples are taken at x_j = -pi + 2 pi j/n; the phase shift to the
//! origin is folded in so coefficients refer to e^{i k x}.
inline void forward_fft(int n, const double* in, cplx* out)
{
    auto p = detail::plans_for(n);
    std::vector<double> tmp(in, in + std::size_t(n) * n * n);
    fftw_execute_dft_r2c(p.r2c, tmp.data(), reinterpret_cast<fftw_complex*>(out));
    const double scale = 1.0 / (double(n) * n * n);
    const int nh = n / 2 + 1;
    // sample offset -pi gives a factor e^{i k pi} = (-1)^k
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < nh; ++k) {
                int ki = i < n / 2 ? i : i - n;
                int kj = j < n / 2 ? j : j - n;
                double sgn = ((ki + kj + k) & 1) ? -1.0 : 1.0;
                out[(std::size_t(i) * n + j) * nh + k] *= scale * sgn;
            }
}

inline void inverse_fft(int n, const cplx* in, double* out)
{
    auto p = detail::plans_for(n);
    const int nh = n / 2 + 1;
    std::vector<cplx> tmp(in, in + std::size_t(n) * n * nh);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < nh; ++k) {
                int ki = i < n / 2 ? i : i - n;
                int kj = j < n / 2 ? j : j - n;
                if ((ki + kj + k) & 1) tmp[(std::size_t(i) * n + j) * nh + k] *= -1.0;
            }
    fftw_execute_dft_c2r(p.c2r, reinterpret_cast<fftw_complex*>(tmp.data()), out);
}

} // namespace stochci
