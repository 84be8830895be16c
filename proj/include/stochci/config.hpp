#pragma once

#include "stochci/builder.hpp"
#include "stochci/ledger.hpp"
#include "stochci/noise.hpp"

#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

namespace stochci {

//! Malformed or unknown configuration entries.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

//! Flat "section.key" -> value map read from
//!
//!     # comment
//!     [section]
//!     key = value
//!
//! Keys before any section header live in the empty section.
class ConfigMap {
public:
    static ConfigMap parse(const std::string& text)
    {
        ConfigMap c;
        std::istringstream in(text);
        std::string line, section;
        int no = 0;
        while (std::getline(in, line)) {
            ++no;
            auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']' || line.size() < 3) throw ConfigError("line " + std::to_string(no) + ": bad section header");
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            auto eq = line.find('=');
            if (eq == std::string::npos) throw ConfigError("line " + std::to_string(no) + ": expected key = value");
            std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
            if (key.empty()) throw ConfigError("line " + std::to_string(no) + ": empty key");
            std::string full = section.empty() ? key : section + "." + key;
            if (c.values_.count(full)) throw ConfigError("line " + std::to_string(no) + ": duplicate key " + full);
            c.values_[full] = val;
        }
        return c;
    }

    bool has(const std::string& k) const { return values_.count(k) > 0; }
    void set(const std::string& k, const std::string& v) { values_[k] = v; }

    std::string str(const std::string& k, const std::string& def) const
    {
        used_.insert(k);
        auto it = values_.find(k);
        return it == values_.end() ? def : it->second;
    }
    double num(const std::string& k, double def) const
    {
        used_.insert(k);
        auto it = values_.find(k);
        if (it == values_.end()) return def;
        try {
            std::size_t pos = 0;
            double v = std::stod(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("key " + k + ": not a number: " + it->second);
        }
    }
    long integer(const std::string& k, long def) const
    {
        double v = num(k, double(def));
        if (v != std::floor(v)) throw ConfigError("key " + k + ": not an integer");
        return long(v);
    }
    bool flag(const std::string& k, bool def) const
    {
        std::string v = str(k, def ? "1" : "0");
        if (v == "1" || v == "true" || v == "yes") return true;
        if (v == "0" || v == "false" || v == "no") return false;
        throw ConfigError("key " + k + ": not a boolean: " + v);
    }
    //! Entries under a section, with the prefix stripped; marks them used.
    std::map<std::string, std::string> section(const std::string& s) const
    {
        std::map<std::string, std::string> r;
        const std::string pre = s + ".";
        for (const auto& [k, v] : values_)
            if (k.rfind(pre, 0) == 0) {
                used_.insert(k);
                r[k.substr(pre.size())] = v;
            }
        return r;
    }
    //! Throws on keys nobody asked for.
    void reject_unused() const
    {
        for (const auto& [k, v] : values_)
            if (!used_.count(k)) throw ConfigError("unknown config key " + k);
    }

private:
    static std::string trim(const std::string& s)
    {
        auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return "";
        auto b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
    }
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> used_;
};

//! Tolerances a stage run is judged by.
struct StageTolerances {
    double identity = 1e-7;
    double residual = 1e-6;
    double divergence = 1e-10;
    //! When false, identities that differentiate the jets are reported but
    //! do not fail the run if the grid is below the resolving size.
    bool enforce_unresolved = false;
};

//! Everything `stage run` needs to rebuild a stage deterministically.
struct StageRunConfig {
    SchemeMode mode = SchemeMode::additive;
    int q = 1;
    int n = 32;
    double m = 1.0; //!< dissipation exponent
    double t = 0.1;
    double base_h = 1e-4;
    std::string scales_kind = "toy";
    double kappa = 1.0;
    StageConfig stage;
    bool noise = false;
    NoiseConfig noise_cfg;
    StageTolerances tol;
    std::map<std::string, std::string> ledger; //!< [ledger] entries for scales.kind = ledger
};

inline NoiseConfig default_stage_noise()
{
    NoiseConfig c;
    c.n = 8;
    c.dt = 1.0 / 256.0;
    c.T = 0.5;
    return c;
}

inline StageRunConfig stage_run_config(const ConfigMap& c)
{
    StageRunConfig r;
    r.mode = parse_mode(c.str("stage.mode", "additive"));
    r.q = int(c.integer("stage.q", 1));
    r.n = int(c.integer("grid.n", 32));
    r.t = c.num("stage.t", 0.1);
    r.base_h = c.num("stage.base_h", 1e-4);
    r.scales_kind = c.str("scales.kind", "toy");
    if (r.scales_kind != "toy" && r.scales_kind != "ledger") throw ConfigError("scales.kind must be toy or ledger");
    ToyScales& s = r.stage.scales;
    s.lambda_q = c.num("scales.lambda_q", s.lambda_q);
    s.lambda_q1 = c.num("scales.lambda_q1", s.lambda_q1);
    r.kappa = c.num("scales.kappa", 1.0);
    s.r_perp = r.kappa / s.lambda_q1;
    s.r_par = c.num("scales.r_par", s.r_par);
    s.mu = c.num("scales.mu", s.mu);
    s.l = c.num("scales.l", s.l);
    StageConfig& st = r.stage;
    st.c_R = c.num("stage.c_R", st.c_R);
    st.delta_q1 = c.num("stage.delta", st.delta_q1);
    st.L = c.num("stage.L", st.L);
    st.h = c.num("stage.h", st.h);
    st.domain_theta = c.num("stage.domain_theta", st.domain_theta);
    st.min_points_per_radius = c.num("stage.min_points_per_radius", st.min_points_per_radius);
    st.volume_normalized_amplitudes = c.flag("stage.volume_normalized_amplitudes", false);
    r.noise = c.flag("noise.enabled", false);
    r.noise_cfg = default_stage_noise();
    NoiseConfig& nc = r.noise_cfg;
    nc.mode = r.mode;
    nc.seed = std::uint64_t(c.integer("noise.seed", long(nc.seed)));
    nc.n = int(c.integer("noise.n", nc.n));
    nc.dt = c.num("noise.dt", nc.dt);
    nc.T = c.num("noise.T", nc.T);
    nc.s0 = c.num("noise.s0", nc.s0);
    nc.sigma = c.num("noise.sigma", nc.sigma);
    r.m = c.num("stage.m", 1.0);
    nc.m = r.m;
    r.tol.identity = c.num("tolerances.identity", r.tol.identity);
    r.tol.residual = c.num("tolerances.residual", r.tol.residual);
    r.tol.divergence = c.num("tolerances.divergence", r.tol.divergence);
    r.tol.enforce_unresolved = c.flag("tolerances.enforce_unresolved", false);
    r.ledger = c.section("ledger");
    if (r.q < 0) throw ConfigError("stage.q must be >= 0");
    if (r.n < 8 || r.n % 2) throw ConfigError("grid.n must be even and >= 8");
    return r;
}

//! The resolved configuration in the same format it is read from; parsing
//! the output gives back an identical StageRunConfig.
inline std::string format_stage_config(const StageRunConfig& r)
{
    std::ostringstream s;
    auto f = [](double v) { return fmt_double(v); };
    const ToyScales& sc = r.stage.scales;
    const StageConfig& st = r.stage;
    s << "[grid]\nn = " << r.n << "\n";
    s << "[scales]\nkind = " << r.scales_kind << "\nlambda_q = " << f(sc.lambda_q) << "\nlambda_q1 = " << f(sc.lambda_q1)
      << "\nkappa = " << f(r.kappa) << "\nr_par = " << f(sc.r_par) << "\nmu = " << f(sc.mu) << "\nl = " << f(sc.l) << "\n";
    s << "[stage]\nmode = " << to_string(r.mode) << "\nq = " << r.q << "\nt = " << f(r.t) << "\nbase_h = " << f(r.base_h)
      << "\nh = " << f(st.h) << "\nc_R = " << f(st.c_R) << "\ndelta = " << f(st.delta_q1) << "\nL = " << f(st.L)
      << "\nm = " << f(r.m) << "\ndomain_theta = " << f(st.domain_theta)
      << "\nmin_points_per_radius = " << f(st.min_points_per_radius) << "\nvolume_normalized_amplitudes = " << (st.volume_normalized_amplitudes ? 1 : 0)
      << "\n";
    const NoiseConfig& nc = r.noise_cfg;
    s << "[noise]\nenabled = " << (r.noise ? 1 : 0) << "\nseed = " << nc.seed << "\nn = " << nc.n << "\ndt = " << f(nc.dt) << "\nT = " << f(nc.T)
      << "\ns0 = " << f(nc.s0) << "\nsigma = " << f(nc.sigma) << "\n";
    s << "[tolerances]\nidentity = " << f(r.tol.identity) << "\nresidual = " << f(r.tol.residual) << "\ndivergence = " << f(r.tol.divergence)
      << "\nenforce_unresolved = " << (r.tol.enforce_unresolved ? 1 : 0) << "\n";
    if (!r.ledger.empty()) {
        s << "[ledger]\n";
        for (const auto& [k, v] : r.ledger) s << k << " = " << v << "\n";
    }
    return s.str();
}

} // namespace stochci
