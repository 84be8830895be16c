#pragma once

#include "stochci/geometry.hpp"

#include "json.hpp"

#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace stochci {

//! One judged quantity of a run.
struct Check {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    std::string relation = "<"; //!< "<", "<=", ">", ">=" or "==" against the tolerance
    bool enforced = true;       //!< false: reported only
    std::string note;
    std::optional<bool> verdict; //!< set when the pass decision is made elsewhere
    bool pass() const
    {
        if (verdict) return *verdict;
        if (relation == "<") return value < tolerance;
        if (relation == ">") return value > tolerance;
        if (relation == "<=") return value <= tolerance;
        if (relation == ">=") return value >= tolerance;
        return value == tolerance;
    }
};

//! Run report with a human-readable and a machine-readable rendering. The
//! JSON form holds no timings or host data, so equal inputs give equal bytes.
class Report {
public:
    explicit Report(std::string command) : command_(std::move(command)) {}

    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    nlohmann::ordered_json data = nlohmann::ordered_json::object();
    std::vector<std::string> notes;

    Check& check(std::string name, double value, std::string relation, double tolerance, bool enforced = true, std::string note = "")
    {
        checks_.push_back({std::move(name), value, tolerance, std::move(relation), enforced, std::move(note), std::nullopt});
        return checks_.back();
    }
    //! Appends a preformatted block to the text rendering.
    void text(const std::string& block) { blocks_.push_back(block); }

    const std::vector<Check>& checks() const { return checks_; }
    const std::string& command() const { return command_; }
    bool passed() const
    {
        for (const auto& c : checks_)
            if (c.enforced && !c.pass()) return false;
        return true;
    }

    nlohmann::ordered_json to_json() const
    {
        nlohmann::ordered_json j;
        j["command"] = command_;
        j["config"] = config;
        j["geometry"] = geometry_json();
        nlohmann::ordered_json cs = nlohmann::ordered_json::array();
        for (const auto& c : checks_) {
            nlohmann::ordered_json e;
            e["name"] = c.name;
            e["value"] = c.value;
            e["relation"] = c.relation;
            e["tolerance"] = c.tolerance;
            e["enforced"] = c.enforced;
            e["pass"] = c.pass();
            if (!c.note.empty()) e["note"] = c.note;
            cs.push_back(e);
        }
        j["checks"] = cs;
        j["data"] = data;
        j["notes"] = notes;
        j["pass"] = passed();
        return j;
    }
    std::string json_text() const { return to_json().dump(2) + "\n"; }

    std::string to_text() const
    {
        std::ostringstream s;
        s << "== " << command_ << " ==\n";
        for (const auto& n : notes) s << "note: " << n << "\n";
        if (!config.empty()) {
            s << "config:\n";
            for (const auto& [k, v] : config.items()) s << "  " << k << " = " << (v.is_string() ? v.get<std::string>() : v.dump()) << "\n";
        }
        s << "geometry: " << geometry_json()["fingerprint"].get<std::string>() << "\n";
        for (const auto& b : blocks_) s << b;
        if (!checks_.empty()) {
            s << "checks:\n";
            for (const auto& c : checks_) {
                const char* tag = c.pass() ? "pass" : (c.enforced ? "FAIL" : "info");
                s << "  [" << tag << "] " << std::left << std::setw(34) << c.name << " " << std::scientific << std::setprecision(4)
                  << std::setw(12) << c.value << " " << c.relation << " " << c.tolerance << std::defaultfloat;
                if (!c.note.empty()) s << "  (" << c.note << ")";
                s << "\n";
            }
        }
        s << (passed() ? "result: pass\n" : "result: FAIL\n");
        return s.str();
    }

    static nlohmann::ordered_json geometry_json()
    {
        static const nlohmann::ordered_json g = [] {
            DirectionSet ds = build_direction_set();
            nlohmann::ordered_json j;
            j["fingerprint"] = geometry_fingerprint(ds);
            j["n_star"] = ds.n_star;
            j["positivity_radius"] = ds.positivity_radius;
            j["directions"] = ds.size();
            return j;
        }();
        return g;
    }

private:
    std::string command_;
    std::vector<Check> checks_;
    std::vector<std::string> blocks_;
};

//! Fixed-width table for text reports.
inline std::string table(const std::vector<std::string>& head, const std::vector<std::vector<std::string>>& rows)
{
    std::vector<std::size_t> w(head.size());
    for (std::size_t i = 0; i < head.size(); ++i) w[i] = head[i].size();
    for (const auto& r : rows)
        for (std::size_t i = 0; i < r.size() && i < w.size(); ++i) w[i] = std::max(w[i], r[i].size());
    std::ostringstream s;
    auto line = [&](const std::vector<std::string>& r) {
        s << " ";
        for (std::size_t i = 0; i < r.size(); ++i) s << " " << std::left << std::setw(int(w[i])) << r[i];
        s << "\n";
    };
    line(head);
    for (const auto& r : rows) line(r);
    return s.str();
}

inline std::string sci(double v, int digits = 4)
{
    std::ostringstream s;
    s << std::scientific << std::setprecision(digits) << v;
    return s.str();
}

} // namespace stochci
