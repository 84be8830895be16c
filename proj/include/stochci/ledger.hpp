#pragma once

#include "stochci/errors.hpp"
#include "stochci/geometry.hpp"
#include "stochci/logq.hpp"
#include "stochci/stationary_phase.hpp"

#include <boost/math/constants/constants.hpp>

#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace stochci {

enum class SchemeMode { additive, multiplicative };

inline std::string to_string(SchemeMode m) { return m == SchemeMode::additive ? "additive" : "multiplicative"; }
inline SchemeMode parse_mode(const std::string& s)
{
    if (s == "additive") return SchemeMode::additive;
    if (s == "multiplicative") return SchemeMode::multiplicative;
    throw std::invalid_argument("mode must be additive or multiplicative, got '" + s + "'");
}

//! Targets of the non-uniqueness statement: growth factor K, horizon T,
//! probability level iota and the noise trace Tr(GG*).
struct LedgerTargets {
    double K = 2.0;
    double T = 1.0;
    double iota = 0.5;
    double trace_GG = 1.0;
};

struct ParameterLedger {
    Rational m = 1;
    LogReal log_a = 0;
    //! When set, a = a_base^{a_exponent} exactly.
    std::optional<std::pair<BigInt, Rational>> a_power;
    BigInt b = 2;
    Rational beta = 0;
    double L = 16.0;
    double c_R = 1e-3;
    double sigma = 1.0;
    Rational delta_holder = rat(1, 60);
    SchemeMode mode = SchemeMode::additive;
    int q_max = 2;
    double eps = 1e-2;        //!< "much smaller than" threshold
    double geometry_M = 0.0;  //!< 0 selects the computed geometry constant
    LedgerTargets targets;
};

//! (25 - 20m)/24, the power of a that must be an integer.
inline Rational jet_root_exponent(const Rational& m) { return (Rational(25) - 20 * m) / 24; }

inline void set_a_power(ParameterLedger& p, const BigInt& base, const Rational& exponent)
{
    if (base < 2 || exponent <= 0) throw LedgerError("a = base^exponent needs base >= 2 and exponent > 0");
    p.a_power = std::make_pair(base, exponent);
    p.log_a = to_logreal(exponent) * boost::multiprecision::log(LogReal(base));
}

//! a = k^{24/(25-20m)}, so that a^{(25-20m)/24} = k.
inline void set_a_root(ParameterLedger& p, const BigInt& k) { set_a_power(p, k, 1 / jet_root_exponent(p.m)); }

//! Parses a as "k^(p/q)", "k^p/q", an integer or a decimal.
inline void parse_a(ParameterLedger& p, const std::string& s)
{
    auto caret = s.find('^');
    if (caret != std::string::npos) {
        std::string e = s.substr(caret + 1);
        if (!e.empty() && e.front() == '(' && e.back() == ')') e = e.substr(1, e.size() - 2);
        set_a_power(p, parse_decimal_digits(s.substr(0, caret)), parse_rational(e));
        return;
    }
    if (s.find_first_not_of("0123456789") == std::string::npos && !s.empty()) {
        set_a_power(p, parse_decimal_digits(s), Rational(1));
        return;
    }
    LogReal v(s);
    if (!(v > 1)) throw LedgerError("a must exceed 1");
    p.a_power.reset();
    p.log_a = boost::multiprecision::log(v);
}

inline std::string format_a(const ParameterLedger& p)
{
    if (p.a_power) return p.a_power->first.str() + "^(" + to_string(p.a_power->second) + ")";
    return to_string(boost::multiprecision::exp(p.log_a), 20);
}

//! Closed-form time weight M_0(t).
struct TimeWeight {
    SchemeMode mode = SchemeMode::additive;
    double L = 0.0;
    LogReal log_at(double t) const
    {
        LogReal Lr(L);
        if (mode == SchemeMode::additive) return 4 * boost::multiprecision::log(Lr) + 4 * Lr * LogReal(t);
        return 4 * Lr * LogReal(t) + 2 * Lr;
    }
    std::string formula() const { return mode == SchemeMode::additive ? "L^4 exp(4 L t)" : "exp(4 L t + 2 L)"; }
};

struct StageParameters {
    int q = 0;
    LogQuantity lambda_q, lambda_q1, delta_q1, delta_q2, l, r_perp, r_par, mu;
    Rational alpha, p_star;
    //! Exponents of r_perp, r_par and mu in powers of lambda_{q+1}.
    Rational r_perp_exponent, r_par_exponent, mu_exponent;
    TimeWeight M0;
};

inline Rational alpha_of(const Rational& m) { return (Rational(5) - 4 * m) / 480; }
inline Rational p_star_of(const Rational& m, const Rational& alpha) { return (40 * m - 14) / (170 * alpha - 19 + 44 * m); }
inline bool m_in_range(const Rational& m) { return m > rat(13, 20) && m < rat(5, 4); }

inline BigInt big_pow(const BigInt& b, unsigned e) { return boost::multiprecision::pow(b, e); }

//! Stage parameters in exact log_a arithmetic.
inline StageParameters derive(const ParameterLedger& p, int q = 0)
{
    if (!m_in_range(p.m)) throw LedgerError("m = " + to_string(p.m) + " outside (13/20, 5/4)");
    if (p.b < 1) throw LedgerError("b must be a positive integer");
    if (q < 0) throw LedgerError("stage index must be nonnegative");
    StageParameters s;
    s.q = q;
    s.alpha = alpha_of(p.m);
    s.p_star = p_star_of(p.m, s.alpha);
    if (!(s.p_star > 1 && s.p_star < 2)) throw LedgerError("p* = " + to_string(s.p_star) + " outside (1, 2)");
    const Rational bq(big_pow(p.b, unsigned(q))), bq1(big_pow(p.b, unsigned(q + 1))), bq2(big_pow(p.b, unsigned(q + 2)));
    s.lambda_q = LogQuantity::power_of_a(bq);
    s.lambda_q1 = LogQuantity::power_of_a(bq1);
    s.delta_q1 = s.lambda_q1.pow(-2 * p.beta);
    s.delta_q2 = LogQuantity::power_of_a(bq2).pow(-2 * p.beta);
    s.l = s.lambda_q1.pow(-3 * s.alpha / 2) * s.lambda_q.pow(Rational(-2));
    s.r_perp = s.lambda_q1.pow((Rational(1) - 20 * p.m) / 24);
    s.r_par = s.lambda_q1.pow((Rational(13) - 20 * p.m) / 12);
    s.mu = s.lambda_q1.pow(2 * p.m - 1) * s.lambda_q1.pow((Rational(25) - 20 * p.m) / 24);
    s.r_perp_exponent = exponent_in(s.r_perp, s.lambda_q1);
    s.r_par_exponent = exponent_in(s.r_par, s.lambda_q1);
    s.mu_exponent = exponent_in(s.mu, s.lambda_q1);
    s.M0 = {p.mode, p.L};
    return s;
}

//! Exponent of lambda_{q+1} r_perp in powers of a, straight from the formula
//! b^{q+1}(25-20m)/24 (the catalogue also forms it as a product).
inline Rational jet_frequency_exponent(const Rational& m, const BigInt& b, int q)
{
    BigInt bq1 = 1;
    for (int i = 0; i <= q; ++i) bq1 *= b;
    return Rational(bq1) * (Rational(25) - 20 * m) / 24;
}

inline double default_geometry_M()
{
    static const double M = [] {
        DirectionSet ds = build_direction_set();
        GammaSolver g(ds);
        return closed_form_M(g, domain_radius(ds));
    }();
    return M;
}

// ---------------------------------------------------------------------------
// Constraint catalogue

//! One inequality lhs (<|<=) rhs. Exact comparisons use rationals; log-space
//! ones compare ln(sum lhs) with ln(sum rhs); predicates carry their verdict.
struct Comparison {
    enum class Kind { exact, log_space, predicate };
    Kind kind = Kind::exact;
    Rational lhs_exact, rhs_exact;
    std::vector<LogQuantity> lhs, rhs;
    bool strict = false;
    bool holds = false;
    double margin = 0.0;
    std::string detail;
};

struct LedgerContext {
    const ParameterLedger& p;
    Rational alpha;
    double M = 0.0;
    LogReal log_eps;
    std::vector<StageParameters> stages;
};

struct ConstraintSpec {
    std::string name;
    std::string formula;
    bool per_stage = false;
    bool additive = true;
    bool multiplicative = true;
    bool a_monotone = false; //!< flips at most once as a grows (beta following a^{2 beta b} fixed)
    std::function<Comparison(const LedgerContext&, int)> eval;
};

namespace detail {

inline LogReal lpi() { return boost::math::constants::pi<LogReal>(); }
inline LogReal lg(const LogReal& x) { return boost::multiprecision::log(x); }
inline LogQuantity C(const LogReal& v) { return LogQuantity::from_log(lg(v)); }
inline LogQuantity CL(const LogReal& logv) { return LogQuantity::from_log(logv); }
inline LogQuantity A(const Rational& c) { return LogQuantity::power_of_a(c); }
inline LogReal two_pi_32() { return boost::multiprecision::pow(2 * lpi(), LogReal(1.5)); }

inline Comparison exact(const Rational& lhs, const Rational& rhs, bool strict)
{
    Comparison c;
    c.kind = Comparison::Kind::exact;
    c.lhs_exact = lhs;
    c.rhs_exact = rhs;
    c.strict = strict;
    return c;
}
inline Comparison logs(std::vector<LogQuantity> lhs, std::vector<LogQuantity> rhs, bool strict)
{
    Comparison c;
    c.kind = Comparison::Kind::log_space;
    c.lhs = std::move(lhs);
    c.rhs = std::move(rhs);
    c.strict = strict;
    return c;
}
inline Comparison predicate(bool ok, double margin, std::string detail)
{
    Comparison c;
    c.kind = Comparison::Kind::predicate;
    c.holds = ok;
    c.margin = margin;
    c.detail = std::move(detail);
    return c;
}
inline Rational exact_of(double v) { return Rational(v); }

//! m_L = sqrt(3) L^{1/4} exp(L^{1/4} / 2), as a log.
inline LogReal log_mL(double L)
{
    LogReal q = boost::multiprecision::pow(LogReal(L), LogReal(0.25));
    return lg(LogReal(3)) / 2 + lg(q) + q / 2;
}

//! ln(c_R e^L / (L^{1/4} (2L + 13) e^{L^{1/4}/2})).
inline LogReal log_multiplicative_ceiling(double L, double c_R)
{
    LogReal Lr(L), q = boost::multiprecision::pow(Lr, LogReal(0.25));
    return lg(LogReal(c_R)) + Lr - lg(q) - lg(2 * Lr + 13) - q / 2;
}

//! ln((e^{x} - K) c L^2 + L e^{x}) for x = L T, with c = 1/sqrt2 - 1/2.
inline LogReal log_energy_gain(double L, double T, double K)
{
    LogReal Lr(L), x = Lr * LogReal(T), c = 1 / boost::multiprecision::sqrt(LogReal(2)) - LogReal(0.5);
    if (x < 1e6) {
        LogReal v = (boost::multiprecision::exp(x) - LogReal(K)) * c * Lr * Lr + Lr * boost::multiprecision::exp(x);
        return v > 0 ? lg(v) : LogReal(-1e300);
    }
    return x + lg(c * Lr * Lr + Lr); // K e^{-x} is below working precision here
}

} // namespace detail

inline const std::vector<ConstraintSpec>& constraint_catalogue()
{
    using namespace detail;
    using K = LedgerContext;
    static const std::vector<ConstraintSpec> cat = [] {
        std::vector<ConstraintSpec> v;
        auto add = [&](std::string name, std::string formula, bool stage, bool additive, bool mult, bool mono,
                       std::function<Comparison(const K&, int)> f) {
            v.push_back({std::move(name), std::move(formula), stage, additive, mult, mono, std::move(f)});
        };
        // ---- exponents and ranges
        add("m_lower", "13/20 < m", false, true, true, false, [](const K& c, int) { return exact(rat(13, 20), c.p.m, true); });
        add("m_upper", "m < 5/4", false, true, true, false, [](const K& c, int) { return exact(c.p.m, rat(5, 4), true); });
        add("p_star_above_one", "1 < p* = (40m-14)/(170 alpha-19+44m)", false, true, true, false,
            [](const K& c, int) { return exact(Rational(1), p_star_of(c.p.m, c.alpha), true); });
        add("p_star_below_two", "p* < 2", false, true, true, false,
            [](const K& c, int) { return exact(p_star_of(c.p.m, c.alpha), Rational(2), true); });
        add("alpha_margin", "alpha < (5-4m)/384", false, true, true, false,
            [](const K& c, int) { return exact(c.alpha, (Rational(5) - 4 * c.p.m) / 384, true); });
        add("holder_margin_positive", "0 < delta", false, true, true, false,
            [](const K& c, int) { return exact(Rational(0), c.p.delta_holder, true); });
        add("holder_margin_upper", "delta < 1/30 (additive), delta < 1/12 (multiplicative)", false, true, true, false,
            [](const K& c, int) { return exact(c.p.delta_holder, c.p.mode == SchemeMode::additive ? rat(1, 30) : rat(1, 12), true); });
        add("sigma_positive", "0 < sigma", false, true, true, false,
            [](const K& c, int) { return exact(Rational(0), exact_of(c.p.sigma), true); });
        add("c_R_positive", "0 < c_R", false, true, true, false,
            [](const K& c, int) { return exact(Rational(0), exact_of(c.p.c_R), true); });
        add("beta_positive", "0 < beta", false, true, true, false, [](const K& c, int) { return exact(Rational(0), c.p.beta, true); });
        add("decay_exponent_corrector", "20 alpha + (20m-25)/24 < 0", false, true, true, false,
            [](const K& c, int) { return exact(20 * c.alpha + (20 * c.p.m - 25) / 24, Rational(0), true); });
        add("decay_exponent_temporal", "4 alpha + m/2 - 5/8 < 0", false, true, true, false,
            [](const K& c, int) { return exact(4 * c.alpha + c.p.m / 2 - rat(5, 8), Rational(0), true); });
        add("bulk_exponent_sign", "(5-4m)/48 - 49 alpha/24 + (4m-5)/24 < 0", false, true, true, false, [](const K& c, int) {
            return exact((Rational(5) - 4 * c.p.m) / 48 - 49 * c.alpha / 24 + (4 * c.p.m - 5) / 24, Rational(0), true);
        });
        add("corrector_alpha_margin", "alpha < (15-12m)/335", false, false, true, false,
            [](const K& c, int) { return exact(c.alpha, (Rational(15) - 12 * c.p.m) / 335, true); });
        // ---- b
        add("b_at_least_two", "2 <= b", false, true, true, false, [](const K& c, int) { return exact(Rational(2), Rational(c.p.b), false); });
        add("b_vs_L_squared", "L^2 < b", false, true, false, false,
            [](const K& c, int) { return exact(exact_of(c.p.L) * exact_of(c.p.L), Rational(c.p.b), true); });
        add("b_vs_alpha", "16 < alpha b", false, true, true, false,
            [](const K& c, int) { return exact(Rational(16), c.alpha * Rational(c.p.b), true); });
        add("alpha_vs_beta_b", "16 beta b < alpha", false, true, true, true,
            [](const K& c, int) { return exact(16 * c.p.beta * Rational(c.p.b), c.alpha, true); });
        add("exponent_budget", "-alpha b/2 + 10/3 + 2 beta b^2 < -8/3", false, true, true, true, [](const K& c, int) {
            Rational b(c.p.b);
            return exact(-c.alpha * b / 2 + rat(10, 3) + 2 * c.p.beta * b * b, rat(-8, 3), true);
        });
        // ---- L and c_R
        add("L_floor", "16 <= L", false, true, false, false, [](const K& c, int) { return exact(Rational(16), exact_of(c.p.L), false); });
        add("L_above_one", "1 < L", false, false, true, false, [](const K& c, int) { return exact(Rational(1), exact_of(c.p.L), true); });
        add("L_vs_c_R", "153 (2 pi)^{3/2} / c_R < L", false, true, false, false, [](const K& c, int) {
            return logs({C(153 * two_pi_32() / LogReal(c.p.c_R))}, {C(LogReal(c.p.L))}, true);
        });
        add("L_lower_necessary", "18 (2 pi)^{3/2} sqrt3 < c_R e^L / (L^{1/4} (2L+13) e^{L^{1/4}/2})", false, false, true, false,
            [](const K& c, int) {
                return logs({C(18 * two_pi_32() * boost::multiprecision::sqrt(LogReal(3)))},
                            {CL(log_multiplicative_ceiling(c.p.L, c.p.c_R))}, true);
            });
        add("c_R_amplitude", "c_R^{1/4} M <= eps (additive), c_R M^4 <= eps (multiplicative)", false, true, true, false,
            [](const K& c, int) {
                LogReal lm = lg(LogReal(c.M)), lc = lg(LogReal(c.p.c_R));
                LogReal l = c.p.mode == SchemeMode::additive ? lc / 4 + lm : lc + 4 * lm;
                return logs({CL(l)}, {CL(c.log_eps)}, false);
            });
        add("c_R_perturbation", "c_R (2 pi)^6 <= eps", false, true, true, false, [](const K& c, int) {
            return logs({CL(lg(LogReal(c.p.c_R)) + 6 * lg(2 * lpi()))}, {CL(c.log_eps)}, false);
        });
        add("growth_floor", "3/2 + 1/L < (1/sqrt2 - 1/2) e^{L T}", false, true, false, false, [](const K& c, int) {
            LogReal cc = 1 / boost::multiprecision::sqrt(LogReal(2)) - LogReal(0.5);
            return logs({C(LogReal(1.5) + 1 / LogReal(c.p.L))}, {CL(lg(cc) + LogReal(c.p.L) * LogReal(c.p.targets.T))}, true);
        });
        add("growth_energy",
            "L^{1/4} (2 pi)^{3/2} + K (T Tr GG*)^{1/2} <= (e^{LT} - K)(1/sqrt2 - 1/2) L^2 + L e^{LT}", false, true, false, false,
            [](const K& c, int) {
                const auto& t = c.p.targets;
                LogReal lhs = boost::multiprecision::pow(LogReal(c.p.L), LogReal(0.25)) * two_pi_32() +
                              LogReal(t.K) * boost::multiprecision::sqrt(LogReal(t.T) * LogReal(t.trace_GG));
                return logs({C(lhs)}, {CL(log_energy_gain(c.p.L, t.T, t.K))}, false);
            });
        add("growth_floor_multiplicative", "(3/2) e^{2 L^{1/2}} < (1/sqrt2 - 1/2) e^{2 L T}", false, false, true, false,
            [](const K& c, int) {
                LogReal Lr(c.p.L), cc = 1 / boost::multiprecision::sqrt(LogReal(2)) - LogReal(0.5);
                return logs({CL(lg(LogReal(1.5)) + 2 * boost::multiprecision::sqrt(Lr))}, {CL(lg(cc) + 2 * Lr * LogReal(c.p.targets.T))},
                            true);
            });
        add("growth_rate_multiplicative", "[ln(K e^{T/2})]^2 < L", false, false, true, false, [](const K& c, int) {
            LogReal v = lg(LogReal(c.p.targets.K)) + LogReal(c.p.targets.T) / 2;
            return logs({C(v * v)}, {C(LogReal(c.p.L))}, true);
        });
        // ---- a
        add("pump_floor", "9 < a^{2 beta b}", false, true, true, true,
            [](const K& c, int) { return logs({C(LogReal(9))}, {A(2 * c.p.beta * Rational(c.p.b))}, true); });
        add("pump_ceiling", "17 (2 pi)^{3/2} a^{2 beta b} <= c_R L", false, true, false, true, [](const K& c, int) {
            return logs({C(17 * two_pi_32()) * A(2 * c.p.beta * Rational(c.p.b))}, {C(LogReal(c.p.c_R) * LogReal(c.p.L))}, false);
        });
        add("pump_ceiling_multiplicative",
            "2 (2 pi)^{3/2} sqrt3 a^{2 beta b} <= c_R e^L / (L^{1/4} (2L+13) e^{L^{1/4}/2})", false, false, true, true,
            [](const K& c, int) {
                return logs({C(2 * two_pi_32() * boost::multiprecision::sqrt(LogReal(3))) * A(2 * c.p.beta * Rational(c.p.b))},
                            {CL(log_multiplicative_ceiling(c.p.L, c.p.c_R))}, false);
            });
        add("initial_frequency", "L <= ((2 pi)^{3/2} a^4 - 2)/2", false, true, true, true, [](const K& c, int) {
            return logs({C(2 * LogReal(c.p.L) + 2)}, {C(two_pi_32()) * A(Rational(4))}, false);
        });
        add("bulk_smallness", "b a^{b(5-4m)/48} a^{b(-49 alpha/24 + (4m-5)/24)} <= eps", false, true, true, true,
            [](const K& c, int) {
                Rational b(c.p.b), e = (Rational(5) - 4 * c.p.m) / 48 - 49 * c.alpha / 24 + (4 * c.p.m - 5) / 24;
                return logs({C(LogReal(c.p.b)) * A(b * e)}, {CL(c.log_eps)}, false);
            });
        add("bulk_e_squared", "e^2 <= a^{(5-4m)/48}", false, true, true, true,
            [](const K& c, int) { return logs({CL(LogReal(2))}, {A((Rational(5) - 4 * c.p.m) / 48)}, false); });
        add("noise_weight_vs_mollifier", "sqrt3 L^{1/4} e^{L^{1/4}/2} <= a^26", false, false, true, true,
            [](const K& c, int) { return logs({CL(log_mL(c.p.L))}, {A(Rational(26))}, false); });
        // ---- per stage
        add("a_root_integral", "lambda_{q+1} r_perp = a^{b^{q+1}(25-20m)/24} in N", true, true, true, false, [](const K& c, int q) {
            const StageParameters& s = c.stages[q];
            Rational via_product = (s.lambda_q1 * s.r_perp).coeff_ln_a;
            Rational via_formula = jet_frequency_exponent(c.p.m, c.p.b, q);
            if (via_product != via_formula)
                return predicate(false, -1.0, "exponent paths disagree: " + to_string(via_product) + " vs " + to_string(via_formula));
            if (c.p.a_power) {
                Rational e = c.p.a_power->second * via_formula;
                bool ok = denominator(e) == 1 && e > 0;
                return predicate(ok, ok ? 1.0 : -1.0, "kappa = " + c.p.a_power->first.str() + "^" + to_string(e));
            }
            LogReal root = boost::multiprecision::exp(c.p.log_a * to_logreal(jet_root_exponent(c.p.m)));
            if (root > LogReal(1e15)) return predicate(false, -1.0, "a^{(25-20m)/24} too large to certify from a decimal a");
            LogReal r = boost::multiprecision::round(root);
            double off = boost::multiprecision::abs(root - r).convert_to<double>();
            bool ok = off <= 1e-9 * r.convert_to<double>() && r >= 1;
            return predicate(ok, -off, "a^{(25-20m)/24} = " + to_string(root, 20));
        });
        add("mollifier_velocity", "l lambda_q^4 <= lambda_{q+1}^{-alpha}", true, true, true, false, [](const K& c, int q) {
            const auto& s = c.stages[q];
            return logs({s.l * s.lambda_q.pow(Rational(4))}, {s.lambda_q1.pow(-c.alpha)}, false);
        });
        add("mollifier_time", "4 L <= l^{-1}", true, true, true, true,
            [](const K& c, int q) { return logs({C(4 * LogReal(c.p.L))}, {c.stages[q].l.inverse()}, false); });
        add("mollifier_cap", "l^{-1} <= lambda_{q+1}^{2 alpha}", true, true, true, false, [](const K& c, int q) {
            const auto& s = c.stages[q];
            return logs({s.l.inverse()}, {s.lambda_q1.pow(2 * c.alpha)}, false);
        });
        add("stress_smallness", "M_0(L)^{1/2} lambda_{q+1}^{(4m-5-52 alpha)/24} delta_{q+2}^{-1} <= eps", true, true, false, true,
            [](const K& c, int q) {
                const auto& s = c.stages[q];
                LogQuantity t = CL(s.M0.log_at(c.p.L) / 2) * s.lambda_q1.pow((4 * c.p.m - 5 - 52 * c.alpha) / 24) * s.delta_q2.inverse();
                return logs({t}, {CL(c.log_eps)}, false);
            });
        add("corrector_smallness",
            "lambda_{q+1}^{20 alpha + (20m-25)/24} + M_0(L)^{1/2} lambda_{q+1}^{4 alpha + m/2 - 5/8} <= eps", true, true, false, true,
            [](const K& c, int q) {
                const auto& s = c.stages[q];
                return logs({s.lambda_q1.pow(20 * c.alpha + (20 * c.p.m - 25) / 24),
                             CL(s.M0.log_at(c.p.L) / 2) * s.lambda_q1.pow(4 * c.alpha + c.p.m / 2 - rat(5, 8))},
                            {CL(c.log_eps)}, false);
            });
        add("corrector_smallness_multiplicative",
            "m_L^4 lambda_{q+1}^{(335 alpha+12m-15)/24} + m_L^4 M_0(L)^{1/2} lambda_{q+1}^{(4m-5-49 alpha)/24} <= eps", true, false,
            true, true, [](const K& c, int q) {
                const auto& s = c.stages[q];
                LogQuantity w = CL(4 * log_mL(c.p.L));
                return logs({w * s.lambda_q1.pow((335 * c.alpha + 12 * c.p.m - 15) / 24),
                             w * CL(s.M0.log_at(c.p.L) / 2) * s.lambda_q1.pow((4 * c.p.m - 5 - 49 * c.alpha) / 24)},
                            {CL(c.log_eps)}, false);
            });
        add("product_estimate_hypothesis", "zeta = l^{-8}, kappa = lambda_{q+1} r_perp, minimal N", true, true, true, true,
            [](const K& c, int q) {
                const auto& s = c.stages[q];
                LogQuantity zeta = s.l.pow(Rational(-8)), kappa = s.lambda_q1 * s.r_perp;
                double lz = zeta.log_value(c.p.log_a).convert_to<double>(), lk = kappa.log_value(c.p.log_a).convert_to<double>();
                // log of 2 pi sqrt3 zeta / kappa with the exact exponent difference
                double lr = (std::log(2 * kPi * std::sqrt(3.0)) + (zeta / kappa).log_value(c.p.log_a)).convert_to<double>();
                if (!(lr < 0.0)) return predicate(false, -lr, "zeta/kappa not small");
                double nmin = std::max(1.0, std::ceil(-4.0 * lz / lr));
                if (nmin > 1e15) return predicate(false, -nmin, "N too large");
                int N = int(std::min(nmin, 2e9));
                bool ok = product_hypothesis_log(lz, lk, N);
                return predicate(ok, -std::log(3.0) - lr, "N = " + std::to_string(N));
            });
        add("commutator_estimate_hypothesis", "zeta = l^{-5}, kappa = lambda_{q+1} r_perp, 1 <= zeta < kappa, zeta^N <= kappa^{N-2}",
            true, true, true, false, [](const K& c, int q) {
                const auto& s = c.stages[q];
                LogQuantity zeta = s.l.pow(Rational(-5)), kappa = s.lambda_q1 * s.r_perp;
                // all three are pure powers of a, so the exponents decide exactly
                Rational ez = zeta.coeff_ln_a, ek = kappa.coeff_ln_a;
                if (!(ez >= 0 && ez < ek)) return predicate(false, -1.0, "zeta exponent " + to_string(ez) + " vs kappa " + to_string(ek));
                Rational nmin = 2 * ek / (ek - ez);
                BigInt N = numerator(nmin) / denominator(nmin);
                if (Rational(N) < nmin) N += 1;
                if (N < 3) N = 3;
                bool ok = Rational(N) * ez <= (Rational(N) - 2) * ek;
                double lz = zeta.log_value(c.p.log_a).convert_to<double>(), lk = kappa.log_value(c.p.log_a).convert_to<double>();
                if (N < 1000000) ok = ok && commutator_hypothesis_log(lz, lk, int(N));
                return predicate(ok, to_double(ek - ez), "N = " + N.str());
            });
        return v;
    }();
    return cat;
}

// ---------------------------------------------------------------------------
// Feasibility report

struct ConstraintVerdict {
    std::string name;
    std::string formula;
    int stage = -1; //!< -1 for stage-independent constraints
    std::string kind;
    bool a_monotone = false;
    bool pass = false;
    double margin = 0.0; //!< > 0 when satisfied with room; log-space margins are ln(rhs/lhs)
    std::string detail;
    std::string key() const { return stage < 0 ? name : name + ".q" + std::to_string(stage); }
};

struct ConstraintReport {
    std::vector<ConstraintVerdict> verdicts;
    bool all_pass = false;
    std::string binding; //!< first failing constraint
    const ConstraintVerdict* find(const std::string& key) const
    {
        for (const auto& v : verdicts)
            if (v.key() == key) return &v;
        return nullptr;
    }
};

inline ConstraintVerdict evaluate(const ConstraintSpec& spec, const LedgerContext& ctx, int q)
{
    ConstraintVerdict v;
    v.name = spec.name;
    v.formula = spec.formula;
    v.stage = spec.per_stage ? q : -1;
    v.a_monotone = spec.a_monotone;
    Comparison c = spec.eval(ctx, q);
    switch (c.kind) {
    case Comparison::Kind::exact:
        v.kind = "exact";
        v.pass = c.strict ? c.lhs_exact < c.rhs_exact : c.lhs_exact <= c.rhs_exact;
        v.margin = to_double(c.rhs_exact - c.lhs_exact);
        break;
    case Comparison::Kind::log_space: {
        if (c.lhs.size() == 1 && c.rhs.size() == 1 && c.lhs[0].additive_log == c.rhs[0].additive_log) {
            // prefactors cancel, so the exponent difference decides exactly
            Rational d = c.rhs[0].coeff_ln_a - c.lhs[0].coeff_ln_a;
            v.kind = "exact-exponent";
            v.pass = c.strict ? d > 0 : d >= 0;
            v.margin = (to_logreal(d) * ctx.p.log_a).convert_to<double>();
            break;
        }
        std::vector<LogReal> l, r;
        for (const auto& x : c.lhs) l.push_back(x.log_value(ctx.p.log_a));
        for (const auto& x : c.rhs) r.push_back(x.log_value(ctx.p.log_a));
        LogReal m = log_sum_exp(r) - log_sum_exp(l);
        v.kind = "log-space";
        v.pass = c.strict ? m > 0 : m >= 0;
        v.margin = m.convert_to<double>();
        break;
    }
    case Comparison::Kind::predicate:
        v.kind = "predicate";
        v.pass = c.holds;
        v.margin = c.margin;
        break;
    }
    v.detail = c.detail;
    return v;
}

inline bool applies(const ConstraintSpec& s, SchemeMode m) { return m == SchemeMode::additive ? s.additive : s.multiplicative; }

//! Evaluates every catalogued constraint for stages 0..q_max. With
//! monotone_only, only the a-monotone entries run (used inside the search).
inline ConstraintReport check_feasibility(const ParameterLedger& p, bool monotone_only = false)
{
    ConstraintReport rep;
    if (!m_in_range(p.m) || p.b < 1 || p.q_max < 0) {
        ConstraintVerdict v;
        v.name = "derivation";
        v.formula = "13/20 < m < 5/4, b >= 1, q_max >= 0";
        v.kind = "exact";
        v.detail = "stage parameters cannot be derived";
        rep.verdicts.push_back(v);
        rep.binding = v.name;
        return rep;
    }
    LedgerContext ctx{p, alpha_of(p.m), p.geometry_M > 0 ? p.geometry_M : default_geometry_M(),
                      boost::multiprecision::log(LogReal(p.eps)), {}};
    for (int q = 0; q <= p.q_max; ++q) ctx.stages.push_back(derive(p, q));
    for (const auto& spec : constraint_catalogue()) {
        if (!applies(spec, p.mode) || (monotone_only && !spec.a_monotone)) continue;
        const int stages = spec.per_stage ? p.q_max + 1 : 1;
        for (int q = 0; q < stages; ++q) rep.verdicts.push_back(evaluate(spec, ctx, q));
    }
    rep.all_pass = true;
    for (const auto& v : rep.verdicts)
        if (!v.pass) {
            rep.all_pass = false;
            rep.binding = v.key();
            break;
        }
    return rep;
}

// ---------------------------------------------------------------------------
// Search

struct SearchOptions {
    int q_max = 2;
    double eps = 1e-2;
    LedgerTargets targets;
    double geometry_M = 0.0;
    Rational delta_holder = rat(1, 60);
    double sigma = 1.0;
    int max_squarings = 48;
};

struct SearchResult {
    bool found = false;
    ParameterLedger ledger;
    ConstraintReport report;
    std::string binding;
    BigInt b_alpha_floor;   //!< floor(16/alpha) + 1, the m-driven part of b
    LogReal log_eta = 0;    //!< ln a^{2 beta b} targeted by the search
    int evaluations = 0;
};

//! c_R chosen at half the largest value the smallness constraints allow.
inline double search_c_R(SchemeMode mode, double eps, double M)
{
    double a = eps / std::pow(2.0 * kPi, 6.0);
    double b = mode == SchemeMode::additive ? std::pow(eps / M, 4.0) : eps / std::pow(M, 4.0);
    return 0.5 * std::min(a, b);
}

//! Ledger with a = k^{24/(25-20m)} and beta set so that a^{2 beta b} is
//! within 1e-12 (relative in the exponent) of exp(log_eta).
inline ParameterLedger with_root(ParameterLedger p, const BigInt& k, const LogReal& log_eta)
{
    set_a_root(p, k);
    const BigInt D = BigInt(1000000000000LL);
    LogReal n = boost::multiprecision::round(log_eta / p.log_a * LogReal(D));
    BigInt N = n.convert_to<BigInt>();
    if (N < 1) N = 1;
    p.beta = Rational(N) / Rational(2 * p.b * D);
    return p;
}

inline BigInt floor_rational(const Rational& r) { return numerator(r) / denominator(r); }

//! Parameter search in the order: c_R, L, b, then a (with beta tracking a
//! fixed a^{2 beta b}). The smallest k = a^{(25-20m)/24} passing every
//! a-monotone constraint wins.
inline SearchResult search(const Rational& m, SchemeMode mode, const SearchOptions& opt = {})
{
    SearchResult res;
    if (!m_in_range(m)) throw LedgerError("m = " + to_string(m) + " outside (13/20, 5/4)");
    ParameterLedger p;
    p.m = m;
    p.mode = mode;
    p.q_max = opt.q_max;
    p.eps = opt.eps;
    p.targets = opt.targets;
    p.delta_holder = opt.delta_holder;
    p.sigma = opt.sigma;
    p.geometry_M = opt.geometry_M > 0 ? opt.geometry_M : default_geometry_M();
    p.c_R = search_c_R(mode, opt.eps, p.geometry_M);
    const Rational alpha = alpha_of(m);
    const double tp = std::pow(2.0 * kPi, 1.5);
    LogReal log_eta_max;
    if (mode == SchemeMode::additive) {
        p.L = std::max(16.0, 2.0 * 153.0 * tp / p.c_R);
        auto growth_ok = [&] {
            p.b = 2;
            ConstraintReport r = check_feasibility(p);
            return r.find("growth_floor")->pass && r.find("growth_energy")->pass;
        };
        for (int i = 0; i < 200 && !growth_ok(); ++i) p.L *= 2.0;
        log_eta_max = detail::lg(LogReal(p.c_R) * LogReal(p.L) / (17 * detail::two_pi_32()));
    } else {
        auto ceiling = [&] { return detail::log_multiplicative_ceiling(p.L, p.c_R) - detail::lg(2 * detail::two_pi_32() * boost::multiprecision::sqrt(LogReal(3))); };
        auto ok = [&] {
            double LT = 2 * p.L * opt.targets.T;
            double g = std::log(opt.targets.K) + opt.targets.T / 2;
            return ceiling() >= detail::lg(LogReal(18)) &&
                   std::log(1 / std::sqrt(2.0) - 0.5) + LT > std::log(1.5) + 2 * std::sqrt(p.L) && p.L > g * g;
        };
        p.L = 2.0;
        for (int i = 0; i < 100000 && !ok(); ++i) p.L *= 1.01;
        log_eta_max = ceiling();
    }
    res.log_eta = (detail::lg(LogReal(9)) + log_eta_max) / 2;
    res.b_alpha_floor = floor_rational(16 / alpha) + 1;
    p.b = res.b_alpha_floor;
    if (mode == SchemeMode::additive) {
        Rational L2 = Rational(p.L) * Rational(p.L);
        BigInt bL = floor_rational(L2) + 1;
        if (bL > p.b) p.b = bL;
    }
    auto passes = [&](const BigInt& k) {
        ++res.evaluations;
        return check_feasibility(with_root(p, k, res.log_eta), true).all_pass;
    };
    BigInt lo = 1, hi = 2;
    int sq = 0;
    while (!passes(hi)) {
        if (++sq > opt.max_squarings) {
            res.ledger = with_root(p, hi, res.log_eta);
            res.report = check_feasibility(res.ledger);
            res.binding = res.report.binding.empty() ? "iteration cap" : res.report.binding;
            return res;
        }
        lo = hi;
        hi = hi * hi;
    }
    while (hi - lo > 1) {
        BigInt mid = (lo + hi) / 2;
        if (passes(mid))
            hi = mid;
        else
            lo = mid;
    }
    res.ledger = with_root(p, hi, res.log_eta);
    res.report = check_feasibility(res.ledger);
    res.found = res.report.all_pass;
    res.binding = res.report.binding;
    return res;
}

// ---------------------------------------------------------------------------
// Formatting

inline std::string fmt_double(double v)
{
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

//! Ledger inputs as key=value lines; every value parses back exactly.
inline std::string ledger_kv(const ParameterLedger& p)
{
    std::ostringstream s;
    s << "ledger.m=" << to_string(p.m) << "\n";
    s << "ledger.a=" << format_a(p) << "\n";
    s << "ledger.log_a=" << to_string(p.log_a, 20) << "\n";
    s << "ledger.b=" << p.b.str() << "\n";
    s << "ledger.beta=" << to_string(p.beta) << "\n";
    s << "ledger.L=" << fmt_double(p.L) << "\n";
    s << "ledger.c_R=" << fmt_double(p.c_R) << "\n";
    s << "ledger.sigma=" << fmt_double(p.sigma) << "\n";
    s << "ledger.delta=" << to_string(p.delta_holder) << "\n";
    s << "ledger.mode=" << to_string(p.mode) << "\n";
    s << "ledger.q_max=" << p.q_max << "\n";
    s << "ledger.eps=" << fmt_double(p.eps) << "\n";
    s << "ledger.K=" << fmt_double(p.targets.K) << "\n";
    s << "ledger.T=" << fmt_double(p.targets.T) << "\n";
    s << "ledger.iota=" << fmt_double(p.targets.iota) << "\n";
    s << "ledger.trace=" << fmt_double(p.targets.trace_GG) << "\n";
    return s.str();
}

//! Inverse of ledger_kv; unknown keys are ignored, missing keys keep defaults.
inline ParameterLedger parse_ledger_kv(const std::string& text)
{
    ParameterLedger p;
    std::istringstream in(text);
    std::string line, a_text;
    while (std::getline(in, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos || line.rfind("ledger.", 0) != 0) continue;
        std::string k = line.substr(7, eq - 7), v = line.substr(eq + 1);
        if (k == "m") p.m = parse_rational(v);
        else if (k == "a") a_text = v;
        else if (k == "b") p.b = parse_decimal_digits(v);
        else if (k == "beta") p.beta = parse_rational(v);
        else if (k == "L") p.L = std::stod(v);
        else if (k == "c_R") p.c_R = std::stod(v);
        else if (k == "sigma") p.sigma = std::stod(v);
        else if (k == "delta") p.delta_holder = parse_rational(v);
        else if (k == "mode") p.mode = parse_mode(v);
        else if (k == "q_max") p.q_max = std::stoi(v);
        else if (k == "eps") p.eps = std::stod(v);
        else if (k == "K") p.targets.K = std::stod(v);
        else if (k == "T") p.targets.T = std::stod(v);
        else if (k == "iota") p.targets.iota = std::stod(v);
        else if (k == "trace") p.targets.trace_GG = std::stod(v);
    }
    if (!a_text.empty()) parse_a(p, a_text);
    return p;
}

inline std::string stage_kv(const StageParameters& st)
{
    std::ostringstream s;
    std::string pre = "stage.q" + std::to_string(st.q) + ".";
    s << pre << "alpha=" << to_string(st.alpha) << "\n";
    s << pre << "p_star=" << to_string(st.p_star) << "\n";
    s << pre << "r_perp_exponent=" << to_string(st.r_perp_exponent) << "\n";
    s << pre << "r_par_exponent=" << to_string(st.r_par_exponent) << "\n";
    s << pre << "mu_exponent=" << to_string(st.mu_exponent) << "\n";
    s << pre << "M0=" << st.M0.formula() << "\n";
    return s.str();
}

inline std::string report_kv(const ConstraintReport& r)
{
    std::ostringstream s;
    for (const auto& v : r.verdicts) {
        s << "constraint." << v.key() << ".pass=" << (v.pass ? 1 : 0) << "\n";
        s << "constraint." << v.key() << ".kind=" << v.kind << "\n";
        s << "constraint." << v.key() << ".margin=" << std::setprecision(9) << v.margin << "\n";
        if (!v.detail.empty()) s << "constraint." << v.key() << ".detail=" << v.detail << "\n";
    }
    s << "all_pass=" << (r.all_pass ? 1 : 0) << "\n";
    s << "binding=" << (r.binding.empty() ? "none" : r.binding) << "\n";
    return s.str();
}

inline std::string report_text(const ConstraintReport& r)
{
    std::ostringstream s;
    s << "Parameter ledger (scheme-scale values; no grid resolves them)\n";
    for (const auto& v : r.verdicts) {
        s << "  [" << (v.pass ? "pass" : "FAIL") << "] " << std::left << std::setw(40) << v.key() << " " << std::setw(15) << v.kind
          << " margin " << std::setprecision(6) << v.margin;
        if (!v.detail.empty()) s << "  (" << v.detail << ")";
        s << "\n      " << v.formula << "\n";
    }
    s << (r.all_pass ? "all constraints pass\n" : "binding constraint: " + r.binding + "\n");
    return s.str();
}

} // namespace stochci
