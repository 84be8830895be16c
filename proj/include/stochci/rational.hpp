#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <sstream>
#include <string>

namespace stochci {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

inline Rational rat(long num, long den = 1) { return Rational(num) / Rational(den); }

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

inline std::string to_string(const Rational& r)
{
    std::ostringstream s;
    s << numerator(r);
    if (denominator(r) != 1) s << "/" << denominator(r);
    return s.str();
}

//! Natural log of a positive big integer without overflow.
inline double log_bigint(const BigInt& v)
{
    if (v <= 0) return -INFINITY;
    unsigned bits = boost::multiprecision::msb(v);
    if (bits < 1000) return std::log(v.convert_to<double>());
    unsigned shift = bits - 60;
    BigInt top = v >> shift;
    return std::log(top.convert_to<double>()) + double(shift) * std::log(2.0);
}

//! Decimal digits to a big integer (cpp_int reads a leading 0 as octal).
inline BigInt parse_decimal_digits(std::string d)
{
    bool neg = !d.empty() && d[0] == '-';
    if (neg || (!d.empty() && d[0] == '+')) d = d.substr(1);
    std::size_t nz = d.find_first_not_of('0');
    d = nz == std::string::npos ? "0" : d.substr(nz);
    BigInt v(d);
    return neg ? BigInt(-v) : v;
}

//! Parses "p/q", an integer, or a finite decimal into an exact rational.
inline Rational parse_rational(const std::string& s)
{
    auto slash = s.find('/');
    if (slash != std::string::npos)
        return Rational(parse_decimal_digits(s.substr(0, slash))) / Rational(parse_decimal_digits(s.substr(slash + 1)));
    auto dot = s.find('.');
    if (dot == std::string::npos) return Rational(parse_decimal_digits(s));
    std::string ip = s.substr(0, dot), fp = s.substr(dot + 1);
    bool neg = !ip.empty() && ip[0] == '-';
    if (neg) ip = ip.substr(1);
    BigInt den = 1;
    for (std::size_t i = 0; i < fp.size(); ++i) den *= 10;
    BigInt num = parse_decimal_digits(ip.empty() ? "0" : ip) * den + parse_decimal_digits(fp.empty() ? "0" : fp);
    Rational r = Rational(num) / Rational(den);
    return neg ? Rational(-r) : r;
}

} // namespace stochci
