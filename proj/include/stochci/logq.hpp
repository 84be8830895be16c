#pragma once

#include "stochci/rational.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <string>
#include <vector>

namespace stochci {

//! 50-digit float for natural logs of tower-sized quantities.
using LogReal = boost::multiprecision::cpp_bin_float_50;

inline LogReal to_logreal(const Rational& r)
{
    return LogReal(numerator(r)) / LogReal(denominator(r));
}

//! value = exp(additive_log) * a^{coeff_ln_a}. The a-exponent is exact, so
//! products and powers never round the tower part.
struct LogQuantity {
    Rational coeff_ln_a = 0;
    LogReal additive_log = 0;

    static LogQuantity power_of_a(const Rational& c) { return {c, LogReal(0)}; }
    static LogQuantity from_log(const LogReal& l) { return {Rational(0), l}; }
    static LogQuantity from_value(double v) { return {Rational(0), boost::multiprecision::log(LogReal(v))}; }
    static LogQuantity one() { return {}; }

    LogQuantity operator*(const LogQuantity& o) const { return {coeff_ln_a + o.coeff_ln_a, additive_log + o.additive_log}; }
    LogQuantity operator/(const LogQuantity& o) const { return {coeff_ln_a - o.coeff_ln_a, additive_log - o.additive_log}; }
    LogQuantity pow(const Rational& r) const { return {coeff_ln_a * r, additive_log * to_logreal(r)}; }
    LogQuantity inverse() const { return pow(Rational(-1)); }

    //! ln(value) for a given ln a.
    LogReal log_value(const LogReal& log_a) const { return to_logreal(coeff_ln_a) * log_a + additive_log; }
    bool pure_power() const { return additive_log == 0; }
};

//! Exponent of x in powers of base; both must be pure powers of a.
inline Rational exponent_in(const LogQuantity& x, const LogQuantity& base)
{
    if (!x.pure_power() || !base.pure_power() || base.coeff_ln_a == 0)
        throw std::invalid_argument("exponent_in needs pure powers of a with a nonzero base exponent");
    return x.coeff_ln_a / base.coeff_ln_a;
}

//! ln(sum_i exp(v_i)) without overflow.
inline LogReal log_sum_exp(const std::vector<LogReal>& v)
{
    if (v.empty()) return LogReal(-1) / LogReal(0);
    LogReal mx = v[0];
    for (const auto& x : v) mx = x > mx ? x : mx;
    LogReal s = 0;
    for (const auto& x : v) s += boost::multiprecision::exp(x - mx);
    return mx + boost::multiprecision::log(s);
}

inline std::string to_string(const LogReal& x, int digits = 17)
{
    return x.str(digits, std::ios_base::fmtflags(0));
}

} // namespace stochci
