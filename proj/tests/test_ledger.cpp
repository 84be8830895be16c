#include "stochci/ledger.hpp"

#include <catch_amalgamated.hpp>

#include <cstdint>
#include <map>
#include <numeric>

using namespace stochci;

namespace {

//! Plain int64 fraction for oracle arithmetic independent of the rational type.
struct Frac {
    std::int64_t n, d;
    Frac(std::int64_t n_, std::int64_t d_ = 1) : n(n_), d(d_) { norm(); }
    void norm()
    {
        if (d < 0) n = -n, d = -d;
        std::int64_t g = std::gcd(n < 0 ? -n : n, d);
        if (g > 1) n /= g, d /= g;
    }
    Frac operator+(Frac o) const { return {n * o.d + o.n * d, d * o.d}; }
    Frac operator-(Frac o) const { return {n * o.d - o.n * d, d * o.d}; }
    Frac operator*(Frac o) const { return {n * o.n, d * o.d}; }
    Frac operator/(Frac o) const { return {n * o.d, d * o.n}; }
    bool equals(const Rational& r) const { return Rational(n) / Rational(d) == r; }
};

const SearchResult& cached_search(const std::string& m, SchemeMode mode)
{
    static std::map<std::pair<std::string, int>, SearchResult> cache;
    auto key = std::make_pair(m, int(mode));
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, search(parse_rational(m), mode)).first;
    return it->second;
}

} // namespace

TEST_CASE("derived exponents at m = 1", "[ledger]")
{
    ParameterLedger p;
    p.m = 1;
    p.b = 7;
    p.beta = rat(1, 10000);
    set_a_root(p, 3);
    StageParameters s = derive(p, 0);
    CHECK(s.alpha == rat(1, 480));
    CHECK(s.r_par_exponent == rat(-7, 12));
    CHECK(s.r_perp_exponent == rat(-19, 24));
    CHECK(s.mu_exponent == rat(29, 24));
    // p* from the defining fraction with plain integer arithmetic
    Frac m(1), alpha = (Frac(5) - Frac(4) * m) / Frac(480);
    Frac pstar = (Frac(40) * m - Frac(14)) / (Frac(170) * alpha - Frac(19) + Frac(44) * m);
    CHECK(pstar.n == 1248);
    CHECK(pstar.d == 1217);
    CHECK(pstar.equals(s.p_star));
    CHECK(s.p_star > 1);
    CHECK(s.p_star < 2);
}

TEST_CASE("stage quantities follow the tower", "[ledger]")
{
    ParameterLedger p;
    p.m = rat(9, 10);
    p.b = 5;
    p.beta = rat(1, 1000);
    set_a_root(p, 2);
    for (int q = 0; q < 3; ++q) {
        StageParameters s = derive(p, q);
        std::int64_t bq = 1;
        for (int i = 0; i < q; ++i) bq *= 5;
        CHECK(s.lambda_q.coeff_ln_a == Rational(bq));
        CHECK(s.lambda_q1.coeff_ln_a == Rational(bq * 5));
        CHECK(s.delta_q1.coeff_ln_a == Rational(-2 * bq * 5) / 1000);
        CHECK(s.delta_q2.coeff_ln_a == Rational(-2 * bq * 25) / 1000);
        // l = lambda_{q+1}^{-3 alpha/2} lambda_q^{-2}
        Frac alpha = (Frac(5) - Frac(4) * Frac(9, 10)) / Frac(480);
        Frac l = Frac(-3) * alpha / Frac(2) * Frac(bq * 5) - Frac(2 * bq);
        CHECK(l.equals(s.l.coeff_ln_a));
        CHECK(s.l.pure_power());
    }
}

TEST_CASE("p* stays inside (1, 2) across the admissible range", "[ledger]")
{
    for (int k = 1; k <= 50; ++k) {
        Rational m = rat(13, 20) + Rational(k) / 51 * (rat(5, 4) - rat(13, 20));
        Rational ps = p_star_of(m, alpha_of(m));
        CHECK(ps > 1);
        CHECK(ps < 2);
        double md = to_double(m), ad = (5 - 4 * md) / 480;
        CHECK(std::abs(to_double(ps) - (40 * md - 14) / (170 * ad - 19 + 44 * md)) < 1e-12);
    }
}

TEST_CASE("bulk exponent is negative for every m", "[ledger]")
{
    for (int k = 1; k <= 50; ++k) {
        Rational m = rat(13, 20) + Rational(k) / 51 * (rat(5, 4) - rat(13, 20));
        Rational a = alpha_of(m);
        Rational e = (Rational(5) - 4 * m) / 48 - 49 * a / 24 + (4 * m - 5) / 24;
        CHECK(e < 0);
        double md = to_double(m);
        CHECK(std::abs(to_double(e) - (-(5 - 4 * md) / 48 - 49 * (5 - 4 * md) / 480 / 24)) < 1e-15);
    }
}

TEST_CASE("derivation rejects m outside the range", "[ledger]")
{
    ParameterLedger p;
    p.m = rat(13, 20);
    CHECK_THROWS_AS(derive(p), LedgerError);
    p.m = rat(5, 4);
    CHECK_THROWS_AS(derive(p), LedgerError);
    auto rep = check_feasibility(p);
    CHECK_FALSE(rep.all_pass);
    CHECK(rep.binding == "derivation");
    CHECK_THROWS_AS(search(rat(3, 2), SchemeMode::additive), LedgerError);
}

TEST_CASE("log quantities keep exact exponents", "[ledger]")
{
    LogQuantity x = LogQuantity::power_of_a(rat(3, 7)) * LogQuantity::from_value(5.0);
    LogQuantity y = x.pow(rat(7, 3));
    CHECK(y.coeff_ln_a == 1);
    CHECK(std::abs(y.additive_log.convert_to<double>() - 7.0 / 3.0 * std::log(5.0)) < 1e-14);
    CHECK((x / x).coeff_ln_a == 0);
    CHECK(exponent_in(LogQuantity::power_of_a(rat(-19, 24) * 11), LogQuantity::power_of_a(Rational(11))) == rat(-19, 24));
    CHECK_THROWS(exponent_in(x, LogQuantity::power_of_a(Rational(1))));
    LogReal big = log_sum_exp({LogReal(1e6), LogReal(1e6)});
    CHECK(std::abs((big - LogReal(1e6)).convert_to<double>() - std::log(2.0)) < 1e-14);
}

TEST_CASE("a is parsed in power, integer and decimal form", "[ledger]")
{
    ParameterLedger p;
    p.m = 1;
    parse_a(p, "7^(24/5)");
    REQUIRE(p.a_power);
    CHECK(p.a_power->first == 7);
    CHECK(p.a_power->second == rat(24, 5));
    CHECK(std::abs(p.log_a.convert_to<double>() - 24.0 / 5.0 * std::log(7.0)) < 1e-14);
    parse_a(p, "1000");
    CHECK(p.a_power->second == 1);
    parse_a(p, "12.5");
    CHECK_FALSE(p.a_power);
    CHECK(std::abs(p.log_a.convert_to<double>() - std::log(12.5)) < 1e-14);
    CHECK_THROWS_AS(parse_a(p, "0.5"), LedgerError);
}

TEST_CASE("two exponent paths for the jet frequency agree", "[ledger]")
{
    for (const char* ms : {"7/10", "1", "6/5", "0.83"}) {
        ParameterLedger p;
        p.m = parse_rational(ms);
        p.b = BigInt("123456789012345678901234567890");
        p.beta = rat(1, 3);
        set_a_root(p, 5);
        for (int q = 0; q < 4; ++q) {
            StageParameters s = derive(p, q);
            CHECK((s.lambda_q1 * s.r_perp).coeff_ln_a == jet_frequency_exponent(p.m, p.b, q));
        }
    }
}

TEST_CASE("search round trip passes every catalogued constraint", "[ledger]")
{
    for (const char* ms : {"0.7", "1", "1.2"})
        for (SchemeMode mode : {SchemeMode::additive, SchemeMode::multiplicative}) {
            const SearchResult& r = cached_search(ms, mode);
            INFO(ms << " " << to_string(mode) << " binding " << r.binding);
            REQUIRE(r.found);
            // independent re-check from the printed parameters
            ParameterLedger back = parse_ledger_kv(ledger_kv(r.ledger));
            CHECK(back.m == r.ledger.m);
            CHECK(back.b == r.ledger.b);
            CHECK(back.beta == r.ledger.beta);
            CHECK(back.L == r.ledger.L);
            CHECK(back.c_R == r.ledger.c_R);
            ConstraintReport rep = check_feasibility(back);
            CHECK(rep.all_pass);
            CHECK(report_kv(rep) == report_kv(r.report));
            // every catalogued entry for the mode appears, per stage where needed
            std::size_t expected = 0;
            for (const auto& s : constraint_catalogue())
                if (applies(s, mode)) expected += s.per_stage ? std::size_t(back.q_max + 1) : 1;
            CHECK(rep.verdicts.size() == expected);
        }
}

TEST_CASE("violating the pump floor fails by name", "[ledger]")
{
    ParameterLedger p = cached_search("1", SchemeMode::additive).ledger;
    p.beta = p.beta / 1000;
    auto rep = check_feasibility(p);
    CHECK_FALSE(rep.all_pass);
    REQUIRE(rep.find("pump_floor"));
    CHECK_FALSE(rep.find("pump_floor")->pass);
    CHECK(rep.binding == "pump_floor");
}

TEST_CASE("tightening eps exposes the c_R smallness constraints", "[ledger]")
{
    ParameterLedger p = cached_search("1", SchemeMode::additive).ledger;
    p.eps = 1e-4;
    auto rep = check_feasibility(p);
    CHECK_FALSE(rep.find("c_R_amplitude")->pass);
    CHECK_FALSE(rep.all_pass);
}

TEST_CASE("non integral a root is rejected", "[ledger]")
{
    ParameterLedger p = cached_search("1", SchemeMode::additive).ledger;
    set_a_power(p, p.a_power->first, p.a_power->second * rat(7, 6));
    auto rep = check_feasibility(p);
    CHECK_FALSE(rep.find("a_root_integral.q0")->pass);
    ParameterLedger d;
    d.m = 1;
    parse_a(d, "12.5");
    d.b = 20;
    d.q_max = 0;
    CHECK_FALSE(check_feasibility(d).find("a_root_integral.q0")->pass);
    parse_a(d, std::to_string(std::pow(1.5, 24.0 / 5.0))); // a^{5/24} = 1.5
    CHECK_FALSE(check_feasibility(d).find("a_root_integral.q0")->pass);
}

TEST_CASE("a-monotone constraints flip at most once along an a sweep", "[ledger]")
{
    for (SchemeMode mode : {SchemeMode::additive, SchemeMode::multiplicative}) {
        const SearchResult& r = cached_search("1", mode);
        const ParameterLedger& base = r.ledger;
        double lk_max = 2.0 * log_bigint(base.a_power->first);
        std::map<std::string, std::vector<bool>> seq;
        for (int i = 0; i < 20; ++i) {
            double lk = std::log(2.0) + (lk_max - std::log(2.0)) * i / 19.0;
            BigInt k = LogReal(boost::multiprecision::exp(LogReal(lk))).convert_to<BigInt>();
            if (k < 2) k = 2;
            ParameterLedger p = with_root(base, k, r.log_eta);
            for (const auto& v : check_feasibility(p, true).verdicts) seq[v.key()].push_back(v.pass);
        }
        REQUIRE(!seq.empty());
        for (const auto& [name, s] : seq) {
            int flips = 0;
            for (std::size_t i = 1; i < s.size(); ++i) flips += s[i] != s[i - 1];
            INFO(name);
            CHECK(flips <= 1);
            CHECK(s.back());
        }
    }
}

TEST_CASE("b grows as m approaches 5/4", "[ledger]")
{
    const auto& a1 = cached_search("1", SchemeMode::additive);
    const auto& a2 = cached_search("1.2", SchemeMode::additive);
    CHECK(a2.ledger.b >= a1.ledger.b);
    CHECK(a2.b_alpha_floor > 4 * a1.b_alpha_floor);
    const auto& m1 = cached_search("1", SchemeMode::multiplicative);
    const auto& m2 = cached_search("1.2", SchemeMode::multiplicative);
    CHECK(m2.ledger.b > 4 * m1.ledger.b);
    // 16/alpha = 7680/(5-4m)
    CHECK(m1.ledger.b == 7681);
    CHECK(m2.ledger.b == 38401);
}

TEST_CASE("multiplicative search satisfies the initial stress bound by direct evaluation", "[ledger]")
{
    const auto& r = cached_search("1", SchemeMode::multiplicative);
    const auto& p = r.ledger;
    double L = p.L, cR = p.c_R;
    double ceiling = cR * std::exp(L) / (std::pow(L, 0.25) * (2 * L + 13) * std::exp(0.5 * std::pow(L, 0.25)));
    // a^{2 beta b} with a = k^{24/(25-20m)} in plain doubles
    double lna = 24.0 / 5.0 * log_bigint(p.a_power->first);
    double pump = std::exp(2.0 * to_double(p.beta) * to_double(Rational(p.b)) * lna);
    double c = std::pow(2 * M_PI, 1.5) * std::sqrt(3.0);
    CHECK(18 * c < 2 * c * pump);
    CHECK(2 * c * pump <= ceiling);
    CHECK(18 * c < ceiling);
    CHECK(L <= (std::pow(2 * M_PI, 1.5) * std::exp(4 * lna) - 2) / 2);
}

TEST_CASE("feasible ledger satisfies the stationary phase hypotheses", "[ledger]")
{
    const auto& r = cached_search("1", SchemeMode::additive);
    for (int q = 0; q <= r.ledger.q_max; ++q) {
        auto key = ".q" + std::to_string(q);
        CHECK(r.report.find("product_estimate_hypothesis" + key)->pass);
        CHECK(r.report.find("commutator_estimate_hypothesis" + key)->pass);
    }
    // direct check at q = 0 with zeta = l^{-8}, kappa = lambda_1 r_perp, in doubles
    StageParameters s = derive(r.ledger, 0);
    double lna = r.ledger.log_a.convert_to<double>();
    double b = to_double(Rational(r.ledger.b)), alpha = 1.0 / 480;
    double lz = 8 * (1.5 * alpha * b + 2) * lna, lk = b * 5.0 / 24.0 * lna;
    CHECK(std::abs(lz / (s.l.pow(Rational(-8)).log_value(r.ledger.log_a).convert_to<double>()) - 1) < 1e-12);
    int N = int(std::ceil(-4 * lz / (std::log(2 * M_PI * std::sqrt(3.0)) + lz - lk)));
    CHECK(product_hypothesis_log(lz, lk, N));
    CHECK_FALSE(product_hypothesis_log(lz, lk, N - 1));
}

TEST_CASE("reports are deterministic and name every constraint", "[ledger]")
{
    const auto& r = cached_search("0.7", SchemeMode::additive);
    auto again = check_feasibility(r.ledger);
    CHECK(report_kv(again) == report_kv(r.report));
    CHECK(report_text(again).find("all constraints pass") != std::string::npos);
    for (const auto& v : again.verdicts) CHECK(!v.formula.empty());
}
