#pragma once

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <vector>

namespace stochci {

//! Periodic "support patch" grids in native jet coordinates: [-P, P) with N
//! points per axis. Functions supported well inside the patch are smooth and
//! periodic on it, so spectral derivatives there are accurate to roundoff.
namespace patch {

inline std::mutex& plan_mutex()
{
    static std::mutex m;
    return m;
}

inline double coord(int j, int N, double half) { return -half + 2.0 * half * j / N; }

//! Derivative symbol on a patch of length 2*half; zero at Nyquist.
inline double symbol(int i, int N, double half)
{
    if (i == N / 2) return 0.0;
    int k = i < N / 2 ? i : i - N;
    return std::numbers::pi * k / half;
}

inline std::complex<double> ipow(double k, int order)
{
    std::complex<double> r(1.0, 0.0), ik(0.0, k);
    for (int o = 0; o < order; ++o) r *= ik;
    return r;
}

//! d^order f / dy^order of samples f on the 1D patch.
inline std::vector<double> derivative_1d(const std::vector<double>& f, double half, int order)
{
    const int N = int(f.size());
    if (order == 0) return f;
    std::vector<std::complex<double>> a(f.begin(), f.end()), b(N);
    fftw_plan fw, bw;
    {
        std::lock_guard<std::mutex> lk(plan_mutex());
        fw = fftw_plan_dft_1d(N, reinterpret_cast<fftw_complex*>(a.data()), reinterpret_cast<fftw_complex*>(b.data()),
                              FFTW_FORWARD, FFTW_ESTIMATE);
        bw = fftw_plan_dft_1d(N, reinterpret_cast<fftw_complex*>(b.data()), reinterpret_cast<fftw_complex*>(a.data()),
                              FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    fftw_execute(fw);
    for (int i = 0; i < N; ++i) b[i] *= ipow(symbol(i, N, half), order) / double(N);
    fftw_execute(bw);
    {
        std::lock_guard<std::mutex> lk(plan_mutex());
        fftw_destroy_plan(fw);
        fftw_destroy_plan(bw);
    }
    std::vector<double> r(N);
    for (int i = 0; i < N; ++i) r[i] = a[i].real();
    return r;
}

//! d^ox/du^ox d^oy/dv^oy of row-major N x N samples on the 2D patch.
inline std::vector<double> derivative_2d(const std::vector<double>& f, int N, double half, int ox, int oy)
{
    if (ox == 0 && oy == 0) return f;
    std::vector<std::complex<double>> a(f.begin(), f.end()), b(std::size_t(N) * N);
    fftw_plan fw, bw;
    {
        std::lock_guard<std::mutex> lk(plan_mutex());
        fw = fftw_plan_dft_2d(N, N, reinterpret_cast<fftw_complex*>(a.data()), reinterpret_cast<fftw_complex*>(b.data()),
                              FFTW_FORWARD, FFTW_ESTIMATE);
        bw = fftw_plan_dft_2d(N, N, reinterpret_cast<fftw_complex*>(b.data()), reinterpret_cast<fftw_complex*>(a.data()),
                              FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    fftw_execute(fw);
    const double norm = 1.0 / (double(N) * N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            b[std::size_t(i) * N + j] *= ipow(symbol(i, N, half), ox) * ipow(symbol(j, N, half), oy) * norm;
    fftw_execute(bw);
    {
        std::lock_guard<std::mutex> lk(plan_mutex());
        fftw_destroy_plan(fw);
        fftw_destroy_plan(bw);
    }
    std::vector<double> r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i].real();
    return r;
}

//! Trapezoid integrals on the patches.
inline double integral_1d(const std::vector<double>& f, double half)
{
    double s = 0.0;
    for (double v : f) s += v;
    return s * 2.0 * half / f.size();
}
inline double integral_2d(const std::vector<double>& f, int N, double half)
{
    double s = 0.0;
    for (double v : f) s += v;
    double h = 2.0 * half / N;
    return s * h * h;
}
inline double l2_1d(const std::vector<double>& f, double half)
{
    double s = 0.0;
    for (double v : f) s += v * v;
    return std::sqrt(s * 2.0 * half / f.size());
}
inline double l2_2d(const std::vector<double>& f, int N, double half)
{
    double s = 0.0;
    for (double v : f) s += v * v;
    double h = 2.0 * half / N;
    return std::sqrt(s * h * h);
}

} // namespace patch
} // namespace stochci
