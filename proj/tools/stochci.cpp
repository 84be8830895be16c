// Command-line front end: geometry, jets, ledger, stage, noise and report
// subcommands. Exit codes: 0 pass, 1 check failure, 2 usage, 3 I/O,
// 4 configuration.

#include "stochci/builder.hpp"
#include "stochci/config.hpp"
#include "stochci/geometry.hpp"
#include "stochci/jets.hpp"
#include "stochci/ledger.hpp"
#include "stochci/noise.hpp"
#include "stochci/report.hpp"
#include "stochci/snapshot.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace stochci;
using json = nlohmann::ordered_json;

namespace {

enum Exit { kPass = 0, kFail = 1, kUsage = 2, kIo = 3, kConfig = 4, kInternal = 5 };

struct Output {
    bool json = false;
    std::string out;
};

//! Parses "x" or "x/y" as a double, so exact ratios like 1/5.2 can be passed.
double parse_ratio(const std::string& s)
{
    auto slash = s.find('/');
    std::size_t pos = 0;
    try {
        if (slash == std::string::npos) {
            double v = std::stod(s, &pos);
            if (pos == s.size()) return v;
        } else {
            std::string a = s.substr(0, slash), b = s.substr(slash + 1);
            double x = std::stod(a, &pos);
            if (pos == a.size()) {
                double y = std::stod(b, &pos);
                if (pos == b.size()) return x / y;
            }
        }
    } catch (const std::exception&) {
    }
    throw std::invalid_argument("not a number or ratio: " + s);
}

fs::path out_dir(const Output& o)
{
    fs::path p(o.out);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
    return p;
}

int emit(const Report& r, const Output& o)
{
    if (!o.out.empty()) {
        fs::path d = out_dir(o);
        write_atomic(d / "report.json", r.json_text());
        write_atomic(d / "report.txt", r.to_text());
    }
    std::cout << (o.json ? r.json_text() : r.to_text());
    return r.passed() ? kPass : kFail;
}

std::string fmt(double v) { return fmt_double(v); }

json kv_object(const std::string& kv)
{
    json j = json::object();
    std::istringstream in(kv);
    std::string line;
    while (std::getline(in, line)) {
        auto eq = line.find('=');
        if (eq != std::string::npos) j[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return j;
}

// ------------------------------------------------------------------ geometry

int geometry_dump(long samples, std::uint64_t seed, const Output& o)
{
    DirectionSet ds = build_direction_set();
    GammaSolver gs(ds);
    const double r_dom = domain_radius(ds);
    PositivityCertificate cert = certify_positivity(gs, ds.positivity_radius, samples, seed);
    GeometryConstants gc = constants(gs, r_dom, samples, seed);
    Report r("geometry dump");
    r.config["samples"] = samples;
    r.config["seed"] = seed;
    std::vector<std::vector<std::string>> rows;
    json dirs = json::array();
    double frame_err = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto rv = [](const RVec3& v) { return "(" + to_string(v[0]) + ", " + to_string(v[1]) + ", " + to_string(v[2]) + ")"; };
        rows.push_back({std::to_string(i), rv(ds.directions[i]), rv(ds.frame_a[i]), rv(ds.frame_b[i])});
        dirs.push_back({{"xi", rv(ds.directions[i])}, {"a", rv(ds.frame_a[i])}, {"b", rv(ds.frame_b[i])}});
        const RVec3* f[3] = {&ds.directions[i], &ds.frame_a[i], &ds.frame_b[i]};
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                frame_err = std::max(frame_err, std::abs(to_double(rdot(*f[a], *f[b]) - (a == b ? 1 : 0))));
    }
    auto cid = gs.coefficients(identity6());
    Sym6 back = gs.reconstruct(gs.gamma(identity6()));
    Sym6 diff;
    for (int k = 0; k < 6; ++k) diff[k] = back[k] - identity6()[k];
    r.text("directions (xi, A, B = xi x A):\n" + table({"i", "xi", "A", "B"}, rows));
    std::ostringstream s;
    s << "n_star = " << ds.n_star << "\npositivity_radius = " << fmt(ds.positivity_radius) << "\ndomain_radius = " << fmt(r_dom)
      << "\nC_Lambda = " << fmt(gc.c_lambda) << "\nM = " << fmt(gc.M) << " (sampled " << fmt(gc.M_sampled) << ")\n";
    r.text(s.str());
    r.data["directions"] = dirs;
    r.data["n_star"] = ds.n_star;
    r.data["positivity_radius"] = ds.positivity_radius;
    r.data["domain_radius"] = r_dom;
    r.data["C_Lambda"] = gc.c_lambda;
    r.data["M"] = gc.M;
    r.data["M_sampled"] = gc.M_sampled;
    r.data["coefficients_identity"] = cid;
    r.check("frames orthonormal (exact)", frame_err, "==", 0.0);
    r.check("reconstruction at Id", frobenius(diff), "<", 1e-12);
    r.check("positivity radius", ds.positivity_radius, ">", 0.0);
    r.check("min coefficient inside r*", cert.min_coefficient_inside, ">=", 0.0);
    r.check("min coefficient beyond r*", cert.min_coefficient_beyond, "<", 0.0, false, "sharpness of r*");
    r.check("M sampled <= M closed form", gc.M_sampled, "<=", gc.M);
    return emit(r, o);
}

// ------------------------------------------------------------------ jets

struct JetArgs {
    double lambda = 5.2;
    std::string rperp = "1/5.2";
    double rpar = 0.5;
    double mu = 1.0;
};

JetFamily make_family(const JetArgs& a) { return JetFamily(CutoffProfiles(), build_direction_set(), JetScales{parse_ratio(a.rperp), a.rpar, a.lambda, a.mu}); }

void jet_config(Report& r, const JetArgs& a, const JetFamily& f)
{
    r.config["lambda"] = a.lambda;
    r.config["rperp"] = f.scales().r_perp;
    r.config["rpar"] = a.rpar;
    r.config["mu"] = a.mu;
    r.data["kappa"] = f.kappa();
    r.data["stretch"] = f.stretch();
    r.data["min_clearance"] = f.placement().min_clearance;
}

int jets_build(const JetArgs& a, int n, double t, bool enforce, const Output& o)
{
    JetFamily f = make_family(a);
    Grid3 g(n);
    Report r("jets build");
    jet_config(r, a, f);
    r.config["n"] = n;
    r.config["t"] = t;
    const int need = f.min_resolving_n();
    const bool resolved = n >= need;
    r.data["min_resolving_n"] = need;
    r.data["resolved"] = resolved;
    if (!resolved) r.notes.push_back("grid n = " + std::to_string(n) + " is below the resolving size " + std::to_string(need) +
                                     "; derivative identities are reported only");
    JetGridDiagnostics d = jet_grid_diagnostics(f, g, t);
    const bool enf = resolved || enforce;
    r.check("pairwise support products", d.support_product, "==", 0.0);
    r.check("pairwise W products", d.w_product, "==", 0.0);
    r.check("grid mean of W", d.mean_w, "<", 1e-10, enf);
    r.check("div(W + Wc) relative", d.div_free, "<", 1e-10, enf);
    r.check("curl curl V - (W + Wc) relative", d.curl_curl, "<", 1e-10, enf);
    r.check("grid mean W(x)W - xi(x)xi", d.mean_ww_error, "<", 1e-6, enf);
    if (!o.out.empty()) {
        fs::path dir = out_dir(o);
        for (std::size_t i = 0; i < f.size(); ++i) {
            JetSample s = f.sample(i, g, t);
            FourierField3 w = to_spec(f.W(i, s) + f.Wc(i, s)), v = to_spec(f.V(i, s));
            w.time_tag = t;
            v.time_tag = t;
            save_snapshot(dir / ("w_" + std::to_string(i) + ".wnf"), w);
            save_snapshot(dir / ("v_" + std::to_string(i) + ".wnf"), v);
        }
        r.data["snapshots"] = 2 * f.size();
    }
    return emit(r, o);
}

int jets_verify(const JetArgs& a, int samples, std::uint64_t seed, const Output& o)
{
    JetFamily f = make_family(a);
    Report r("jets verify");
    jet_config(r, a, f);
    r.config["samples"] = samples;
    r.config["seed"] = seed;
    JetIdentityReport v = verify_jet_identities(f, samples, seed);
    r.notes.push_back("identities checked in native jet coordinates on separable patch grids");
    r.check("phi^2 normalization", v.phi_sq_error, "<", 1e-10);
    r.check("psi^2 normalization", v.psi_sq_error, "<", 1e-10);
    r.check("div(W + Wc) relative", v.div_free, "<", 1e-10);
    r.check("curl curl V - (W + Wc) relative", v.curl_curl, "<", 1e-10);
    r.check("div(W(x)W) - mu^-1 d_t(...)", v.div_ww, "<", 1e-8);
    r.check("mean W(x)W - xi(x)xi", v.mean_ww_error, "<", 1e-6);
    r.check("reconstruction at Id", v.reconstruct_id, "<", 1e-12);
    r.check("reconstruction worst", v.reconstruct_worst, "<", 1e-12);
    r.check("r_perp below clearance", v.r_perp, "<", v.min_clearance);
    return emit(r, o);
}

// ------------------------------------------------------------------ ledger

Report ledger_report(const std::string& cmd, const ParameterLedger& p, const ConstraintReport& cr)
{
    Report r(cmd);
    r.config = kv_object(ledger_kv(p));
    r.notes.push_back("scheme-scale parameters; no grid resolves them");
    for (const auto& v : cr.verdicts) r.check(v.key(), v.margin, ">=", 0.0, true, v.kind).verdict = v.pass;
    r.text(report_text(cr));
    r.data["binding"] = cr.binding.empty() ? "none" : cr.binding;
    return r;
}

int emit_ledger(const Report& r, const ParameterLedger& p, const ConstraintReport& cr, const std::string& extra, bool kv, const Output& o)
{
    const std::string kvtext = ledger_kv(p) + extra + report_kv(cr);
    if (!o.out.empty()) write_atomic(out_dir(o) / "ledger.kv", kvtext);
    if (kv) {
        if (!o.out.empty()) {
            write_atomic(out_dir(o) / "report.json", r.json_text());
            write_atomic(out_dir(o) / "report.txt", r.to_text());
        }
        std::cout << kvtext;
        return r.passed() ? kPass : kFail;
    }
    return emit(r, o);
}

// ------------------------------------------------------------------ stage

std::string stage_meta(const StagePair& p, bool resolved)
{
    std::ostringstream s;
    s << "mode=" << to_string(p.mode) << "\nq=" << p.q << "\nt_c=" << fmt(p.t_c) << "\nh=" << fmt(p.h) << "\nm=" << fmt(p.m)
      << "\nhas_pi=" << (p.has_pi ? 1 : 0) << "\nresolved=" << (resolved ? 1 : 0) << "\n";
    return s.str();
}

AuxPath stage_aux(const StageRunConfig& c) { return c.noise ? sample_aux(c.noise_cfg) : trivial_aux(c.mode); }

void stage_config_json(Report& r, const StageRunConfig& c) { r.config = kv_object([&] {
    std::string s = format_stage_config(c), out, section;
    std::istringstream in(s);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.front() == '[') {
            section = line.substr(1, line.size() - 2);
            continue;
        }
        auto eq = line.find(" = ");
        if (eq != std::string::npos) out += section + "." + line.substr(0, eq) + "=" + line.substr(eq + 3) + "\n";
    }
    return out;
}()); }

void residual_checks(Report& r, const ResidualReport& res, const StageTolerances& tol, bool enforce)
{
    r.check("residual (Leray part, relative)", res.relative, "<", tol.residual, enforce);
    r.check("pressure residual (relative)", res.pressure_relative, "<", tol.residual, enforce);
    r.check("div v relative", res.divergence, "<", tol.divergence);
    r.data["residual"] = {{"l2", res.l2},         {"hm1", res.hm1},          {"relative", res.relative},     {"gradient_l2", res.gradient_l2},
                          {"pressure_l2", res.pressure_l2}, {"dt_v", res.dt_v}, {"damping", res.damping}, {"dissipation", res.dissipation},
                          {"nonlinear", res.nonlinear}, {"stress", res.stress}};
}

int stage_ledger_scales(const StageRunConfig& c, Report& r, const Output& o)
{
    if (!c.ledger.count("a")) throw ConfigError("scales.kind = ledger needs a [ledger] section with at least a and m");
    std::string kv;
    for (const auto& [k, v] : c.ledger) kv += "ledger." + k + "=" + v + "\n";
    ParameterLedger p;
    try {
        p = parse_ledger_kv(kv);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("[ledger]: ") + e.what());
    }
    p.mode = c.mode;
    StageParameters sp = derive(p, std::max(0, c.q - 1));
    const double per_radius = 4.0, n_star = double(build_direction_set().n_star);
    const double log10_n = std::log10(per_radius * kTwoPi * n_star) + double(sp.lambda_q1.log_value(p.log_a) / boost::multiprecision::log(LogReal(10)));
    r.data["required_log10_n"] = log10_n;
    r.notes.push_back("ledger-scale jets need about 10^" + sci(log10_n, 3) + " grid points per direction");
    r.check("log10 of required grid size", log10_n, "<=", std::log10(256.0));
    return emit(r, o);
}

int stage_run(StageRunConfig c, const Output& o)
{
    Report r("stage run");
    stage_config_json(r, c);
    if (c.scales_kind == "ledger") return stage_ledger_scales(c, r, o);
    if (c.q > 1)
        throw ConfigError("stage.q > 1 needs the mollified previous stage at 240 time nodes per evaluation; only q = 0 and q = 1 are supported");
    r.notes.push_back("toy scales: norms below are not scheme-scale bounds");
    Grid3 g(c.n);
    AuxPath aux = stage_aux(c);
    auto base = base_pair(c.mode, c.stage.L, g, c.m, aux);
    StagePair pair;
    bool resolved = true;
    if (c.q == 0) {
        pair = materialize(*base, c.t, c.base_h);
        residual_checks(r, residual(pair), c.tol, true);
    } else {
        auto st = iterate(base, c.stage);
        const int need = st->jets().min_resolving_n();
        resolved = c.n >= need;
        r.data["min_resolving_n"] = need;
        r.data["resolved"] = resolved;
        if (!resolved)
            r.notes.push_back("grid n = " + std::to_string(c.n) + " is below the jet resolving size " + std::to_string(need) +
                              "; identities that differentiate the jets are reported only");
        const bool enf = resolved || c.tol.enforce_unresolved;
        pair = materialize(*st, c.t, c.stage.h);
        StageReport sr = stage_report(*st, c.t, &pair);
        const IdentityReport& id = sr.identities;
        r.check("amplitude identity", id.amplitude, "<", c.tol.identity);
        r.check("pointwise oscillation identity", id.oscillation_pw, "<", c.tol.identity);
        r.check("div(w_p + w_c) relative", id.div_wpc, "<", c.tol.divergence);
        r.check("div w relative", id.div_w, "<", c.tol.divergence);
        r.check("mean w relative", id.mean_w, "<", c.tol.divergence);
        r.check("max |R_l / rho|", id.max_ratio, "<=", id.r_dom * (1.0 + 1e-12));
        r.check("min rho / pump scale", id.min_rho_over_scale, ">=", 2.0 * (1.0 - 1e-12));
        r.check("corrector: curl curl vs formula", id.curl_curl, "<", c.tol.identity, enf);
        r.check("temporal oscillation identity", id.time_osc, "<", c.tol.identity, enf);
        r.check("oscillation identity", id.oscillation, "<", c.tol.identity, enf);
        residual_checks(r, sr.residual, c.tol, enf);
        const double defect = l2(leray_project(st->oscillation_defect(c.t)));
        const double consistency = defect > 0.0 ? std::abs(sr.residual.l2 - defect) / defect : sr.residual.l2;
        r.check("residual = Leray oscillation defect", consistency, "<", 1e-6, true, "all other stress terms are exact algebra");
        json terms = json::object();
        std::vector<std::vector<std::string>> rows;
        for (const auto& [k, v] : sr.stress_terms_l1) {
            terms[k] = v;
            rows.push_back({k, sci(v)});
        }
        r.data["stress_terms_l1"] = terms;
        r.data["stress_l1"] = sr.stress_l1;
        r.data["previous_stress_l1"] = sr.prev_stress_l1;
        r.data["v_increment_l2"] = sr.v_increment_l2;
        r.data["increment_bound"] = sr.increment_bound;
        r.text("stress terms (L1 at t_c):\n" + table({"term", "L1"}, rows));
    }
    if (!o.out.empty()) {
        fs::path d = out_dir(o);
        write_atomic(d / "stage.cfg", format_stage_config(c));
        write_atomic(d / "pair.meta", stage_meta(pair, resolved));
        for (int j = 0; j < 5; ++j) {
            save_snapshot(d / ("v_" + std::to_string(j) + ".wnf"), pair.v[j]);
            save_snapshot(d / ("R_" + std::to_string(j) + ".wnf"), pair.R[j]);
            save_snapshot(d / ("pi_" + std::to_string(j) + ".wnf"), pair.pi[j]);
        }
    }
    return emit(r, o);
}

int stage_residual(const std::string& in, const Output& o)
{
    fs::path d(in);
    ConfigMap cm = ConfigMap::parse(read_file(d / "stage.cfg"));
    StageRunConfig c = stage_run_config(cm);
    cm.reject_unused();
    ConfigMap meta = ConfigMap::parse(read_file(d / "pair.meta"));
    StagePair p;
    p.mode = parse_mode(meta.str("mode", "additive"));
    p.q = int(meta.integer("q", 0));
    p.t_c = meta.num("t_c", 0.0);
    p.h = meta.num("h", 1e-3);
    p.m = meta.num("m", 1.0);
    p.has_pi = meta.flag("has_pi", true);
    const bool resolved = meta.flag("resolved", true);
    meta.reject_unused();
    for (int j = 0; j < 5; ++j) {
        p.v[j] = load_snapshot<3>(d / ("v_" + std::to_string(j) + ".wnf"));
        p.R[j] = load_snapshot<6>(d / ("R_" + std::to_string(j) + ".wnf"));
        p.pi[j] = load_snapshot<1>(d / ("pi_" + std::to_string(j) + ".wnf"));
        if (!(p.v[j].grid == p.v[0].grid && p.R[j].grid == p.v[0].grid && p.pi[j].grid == p.v[0].grid))
            throw IoError("snapshots in " + d.string() + " have different grids");
    }
    p.aux = stage_aux(c);
    Report r("stage residual");
    stage_config_json(r, c);
    r.data["q"] = p.q;
    r.data["t_c"] = p.t_c;
    r.data["resolved"] = resolved;
    if (!resolved) r.notes.push_back("stage was built on a grid below the jet resolving size; residual is reported only");
    residual_checks(r, residual(p), c.tol, p.q == 0 || resolved || c.tol.enforce_unresolved);
    return emit(r, o);
}

// ------------------------------------------------------------------ noise

int noise_simulate(NoiseConfig c, int samples, double L, bool snapshots, const Output& o)
{
    if (samples < 1) throw std::invalid_argument("--samples must be >= 1");
    if (snapshots && o.out.empty()) throw std::invalid_argument("--snapshots needs --out");
    const bool add = c.mode == SchemeMode::additive;
    const double delta = 1.0 / 60.0, r_hi = (5.0 + c.sigma) / 2.0, r_lo = (3.0 + c.sigma) / 2.0;
    Report r("noise simulate");
    r.config["mode"] = to_string(c.mode);
    r.config["m"] = c.m;
    r.config["s0"] = c.s0;
    r.config["sigma"] = c.sigma;
    r.config["dt"] = c.dt;
    r.config["T"] = c.T;
    r.config["seed"] = c.seed;
    r.config["n"] = c.n;
    r.config["samples"] = samples;
    r.config["L"] = L;
    std::vector<double> sup(samples), hol(samples), stop(samples);
    std::vector<std::vector<std::string>> rows;
    json per = json::array();
    for (int i = 0; i < samples; ++i) {
        NoiseConfig ci = c;
        ci.seed = mix_seed(c.seed, i);
        NoisePath p = sample_wiener(ci);
        if (add) p = ou_convolve(p, c.m);
        if (add) {
            double s = 0.0;
            for (std::size_t t = 0; t < p.times.size(); ++t) s = std::max(s, series_hs_norm(p, p.z, t, r_hi));
            sup[i] = s;
            hol[i] = holder_norm(p, p.z, 0.4 - 2.0 * delta, r_lo).norm();
        } else {
            double s = 0.0;
            for (double b : p.scalar_B) s = std::max(s, std::abs(b));
            sup[i] = s;
            hol[i] = holder_norm(p.times, p.scalar_B, 0.5 - 2.0 * delta).norm();
        }
        StoppingTime st = stopping_time(p, L, delta);
        stop[i] = st.time;
        per.push_back({{"sample", i}, {"seed", ci.seed}, {"sup", sup[i]}, {"holder", hol[i]}, {"stopping_time", st.time}, {"trigger", st.trigger}});
        rows.push_back({std::to_string(i), sci(sup[i]), sci(hol[i]), sci(st.time), st.trigger});
        if (snapshots && add) save_snapshot(out_dir(o) / ("z_" + std::to_string(i) + ".wnf"), to_field(p, p.z, p.times.size() - 1));
    }
    auto agg = [](const std::vector<double>& v) {
        MomentEstimate m = moment(v);
        return json{{"mean", m.mean}, {"stderr", m.stderr_}};
    };
    r.data["samples"] = per;
    r.data["aggregate"] = {{"sup", agg(sup)}, {"holder", agg(hol)}, {"stopping_time", agg(stop)}};
    const std::string sup_name = add ? "sup_t |z|_H^{(5+s)/2}" : "sup_t |B|";
    const std::string hol_name = add ? "|z|_C^{2/5-2d} H^{(3+s)/2}" : "|B|_C^{1/2-2d}";
    if (samples <= 64) r.text("per-sample summaries:\n" + table({"sample", sup_name, hol_name, "T_L", "trigger"}, rows));
    MomentEstimate ms = moment(sup), mh = moment(hol), mt = moment(stop);
    r.text("aggregate (mean +- stderr):\n" + table({"quantity", "mean", "stderr"}, {{sup_name, sci(ms.mean), sci(ms.stderr_)},
                                                                                     {hol_name, sci(mh.mean), sci(mh.stderr_)},
                                                                                     {"T_L", sci(mt.mean), sci(mt.stderr_)}}));
    if (add) {
        r.check("trace hypothesis margin s0 - (4 - m + 2 sigma)", c.s0 - (4.0 - c.m + 2.0 * c.sigma), ">", 0.0);
        r.data["trace"] = truncated_trace(noise_modes(c.n, c.s0, c.m), 2.5 - c.m + 2.0 * c.sigma);
    }
    bool finite = true;
    for (int i = 0; i < samples; ++i) finite = finite && std::isfinite(sup[i]) && std::isfinite(hol[i]);
    r.check("all summaries finite", finite ? 1.0 : 0.0, "==", 1.0);
    return emit(r, o);
}

// ------------------------------------------------------------------ report

int aggregate(const std::string& dir, const Output& o)
{
    fs::path root(dir);
    if (!fs::is_directory(root)) throw IoError("not a directory: " + dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file() && e.path().filename() == "report.json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    Report r("report");
    r.config["dir"] = fs::relative(root, root).string();
    std::vector<std::vector<std::string>> rows;
    json entries = json::array();
    int failing = 0;
    for (const auto& f : files) {
        json j;
        try {
            j = json::parse(read_file(f));
        } catch (const json::exception& e) {
            throw IoError("cannot parse " + f.string() + ": " + e.what());
        }
        std::string rel = fs::relative(f.parent_path(), root).string();
        bool pass = j.value("pass", false);
        std::string failed;
        int n = 0;
        for (const auto& c : j["checks"])
            if (c.value("enforced", true) && !c.value("pass", false)) {
                failed += (failed.empty() ? "" : "; ") + c.value("name", std::string());
                ++n;
            }
        failing += pass ? 0 : 1;
        rows.push_back({rel, j.value("command", std::string()), pass ? "pass" : "FAIL", std::to_string(j["checks"].size()), failed});
        entries.push_back({{"path", rel}, {"command", j.value("command", std::string())}, {"pass", pass}, {"failed", n}});
    }
    r.text(table({"run", "command", "result", "checks", "failed checks"}, rows));
    r.data["runs"] = entries;
    r.check("reports found", double(files.size()), ">", 0.0);
    r.check("failing runs", double(failing), "==", 0.0);
    if (!o.out.empty()) {
        // written under its own name so a rerun over the same directory ignores it
        write_atomic(out_dir(o) / "aggregate.json", r.json_text());
        write_atomic(out_dir(o) / "aggregate.txt", r.to_text());
    }
    Output quiet = o;
    quiet.out.clear();
    return emit(r, quiet);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"stochci: stage construction, geometry, ledger and noise tools"};
    app.require_subcommand(1);
    app.fallthrough();
    Output out;
    app.add_flag("--json", out.json, "print the machine-readable report instead of text");
    app.add_option("--out", out.out, "directory for reports and artifacts");
    std::function<int()> action;

    // geometry
    auto* geo = app.add_subcommand("geometry", "direction set and constants")->require_subcommand(1);
    long geo_samples = 20000;
    std::uint64_t geo_seed = 1;
    auto* dump = geo->add_subcommand("dump", "directions, frames, n_star, radii, C_Lambda, M");
    dump->add_option("--samples", geo_samples, "sampling points for certificates")->check(CLI::PositiveNumber);
    dump->add_option("--seed", geo_seed);
    dump->callback([&] { action = [&] { return geometry_dump(geo_samples, geo_seed, out); }; });

    // jets
    auto* jets = app.add_subcommand("jets", "intermittent jets")->require_subcommand(1);
    JetArgs ja;
    int jn = 32, jsamples = 200;
    double jt = 0.0;
    bool jenforce = false;
    std::uint64_t jseed = 11;
    auto jet_flags = [&](CLI::App* s) {
        s->add_option("--lambda", ja.lambda, "frequency lambda");
        s->add_option("--rperp", ja.rperp, "r_perp (x or x/y); lambda r_perp must be an integer");
        s->add_option("--rpar", ja.rpar, "r_par");
        s->add_option("--mu", ja.mu, "time oscillation mu");
    };
    auto* jbuild = jets->add_subcommand("build", "sample jets on a grid, write snapshots, grid diagnostics");
    jet_flags(jbuild);
    jbuild->add_option("--n", jn, "grid size");
    jbuild->add_option("--t", jt, "time");
    jbuild->add_flag("--enforce-unresolved", jenforce, "fail derivative identities even on unresolved grids");
    jbuild->callback([&] { action = [&] { return jets_build(ja, jn, jt, jenforce, out); }; });
    auto* jverify = jets->add_subcommand("verify", "identities on resolved native patches");
    jet_flags(jverify);
    jverify->add_option("--samples", jsamples, "random admissible matrices for the reconstruction check");
    jverify->add_option("--seed", jseed);
    jverify->callback([&] { action = [&] { return jets_verify(ja, jsamples, jseed, out); }; });

    // ledger
    auto* led = app.add_subcommand("ledger", "parameter ledger")->require_subcommand(1);
    std::string lm = "1", la, lb, lbeta, lmode = "additive", lin, ldelta;
    double lL = 0, lcr = 0, lsigma = 0, leps = 0, lK = 2.0, lT = 1.0, ltrace = 1.0, liota = 0.5;
    int lq = 2;
    bool lkv = false;
    auto* lcheck = led->add_subcommand("check", "evaluate every catalogued constraint");
    lcheck->add_option("--in", lin, "ledger key=value file (flags override)");
    lcheck->add_option("--m", lm, "dissipation exponent (rational)");
    lcheck->add_option("--a", la, "a as digits or k^(p/q)");
    lcheck->add_option("--b", lb, "b (integer)");
    lcheck->add_option("--beta", lbeta, "beta (rational)");
    lcheck->add_option("--L", lL);
    lcheck->add_option("--cr", lcr, "c_R");
    lcheck->add_option("--mode", lmode)->check(CLI::IsMember({"additive", "multiplicative"}));
    lcheck->add_option("--sigma", lsigma);
    lcheck->add_option("--delta", ldelta, "Hoelder margin (rational)");
    lcheck->add_option("--qmax", lq);
    lcheck->add_option("--eps", leps, "smallness threshold");
    lcheck->add_option("--K", lK);
    lcheck->add_option("--T", lT);
    lcheck->add_option("--trace", ltrace, "Tr GG*");
    lcheck->add_option("--iota", liota);
    lcheck->add_flag("--kv", lkv, "print key=value output");
    lcheck->callback([&] {
        action = [&] {
            const std::string kvfile = lin.empty() ? std::string() : read_file(lin);
            ParameterLedger p;
            try {
                if (!lin.empty()) p = parse_ledger_kv(kvfile);
                if (lin.empty() || lcheck->count("--m")) p.m = parse_rational(lm);
                if (lcheck->count("--a")) parse_a(p, la);
                if (lcheck->count("--b")) p.b = parse_decimal_digits(lb);
                if (lcheck->count("--beta")) p.beta = parse_rational(lbeta);
                if (lcheck->count("--L")) p.L = lL;
                if (lcheck->count("--cr")) p.c_R = lcr;
                if (lcheck->count("--mode")) p.mode = parse_mode(lmode);
                if (lcheck->count("--sigma")) p.sigma = lsigma;
                if (lcheck->count("--delta")) p.delta_holder = parse_rational(ldelta);
                if (lcheck->count("--qmax")) p.q_max = lq;
                if (lcheck->count("--eps")) p.eps = leps;
                if (lcheck->count("--K")) p.targets.K = lK;
                if (lcheck->count("--T")) p.targets.T = lT;
                if (lcheck->count("--trace")) p.targets.trace_GG = ltrace;
                if (lcheck->count("--iota")) p.targets.iota = liota;
            } catch (const LedgerError&) {
                throw;
            } catch (const std::exception& e) {
                // big-number parsers throw plain runtime errors on malformed flags
                throw std::invalid_argument(e.what());
            }
            if (lin.empty() && !lcheck->count("--a")) throw std::invalid_argument("ledger check needs --a or --in");
            ConstraintReport cr = check_feasibility(p);
            Report r = ledger_report("ledger check", p, cr);
            return emit_ledger(r, p, cr, "", lkv, out);
        };
    });
    auto* lsearch = led->add_subcommand("search", "find parameters passing every constraint");
    lsearch->add_option("--m", lm, "dissipation exponent (rational)");
    lsearch->add_option("--mode", lmode)->check(CLI::IsMember({"additive", "multiplicative"}));
    lsearch->add_option("--K", lK);
    lsearch->add_option("--T", lT);
    lsearch->add_option("--qmax", lq);
    lsearch->add_option("--eps", leps);
    lsearch->add_flag("--kv", lkv, "print key=value output");
    lsearch->callback([&] {
        action = [&] {
            SearchOptions so;
            so.targets.K = lK;
            so.targets.T = lT;
            so.q_max = lq;
            if (lsearch->count("--eps")) so.eps = leps;
            SearchResult sr = search(parse_rational(lm), parse_mode(lmode), so);
            std::ostringstream extra;
            extra << "search.found=" << (sr.found ? 1 : 0) << "\nsearch.b_alpha_floor=" << sr.b_alpha_floor.str()
                  << "\nsearch.log_eta=" << to_string(sr.log_eta, 20) << "\n";
            for (int q = 0; q <= sr.ledger.q_max && sr.found; ++q) extra << stage_kv(derive(sr.ledger, q));
            Report r = ledger_report("ledger search", sr.ledger, sr.report);
            r.data["search"] = kv_object(extra.str());
            r.check("parameters found", sr.found ? 1.0 : 0.0, "==", 1.0);
            return emit_ledger(r, sr.ledger, sr.report, extra.str(), lkv, out);
        };
    });

    // stage
    auto* stg = app.add_subcommand("stage", "convex-integration stages")->require_subcommand(1);
    std::string scfg, smode, sin;
    int sq = -1, sn = -1;
    double st = -1.0;
    long sseed = -1;
    bool stoy = false;
    auto* srun = stg->add_subcommand("run", "build a stage, check identities, write the time stencil");
    srun->add_option("--config", scfg, "stage config file");
    srun->add_flag("--toy", stoy, "toy scales (the default)");
    srun->add_option("--mode", smode)->check(CLI::IsMember({"additive", "multiplicative"}));
    srun->add_option("--q", sq, "stage index (0 = base pair)");
    srun->add_option("--n", sn, "grid size");
    srun->add_option("--t", st, "evaluation time");
    srun->add_option("--seed", sseed, "noise seed (enables the noise path)");
    srun->callback([&] {
        action = [&] {
            ConfigMap cm;
            if (!scfg.empty()) {
                std::string text;
                try {
                    text = read_file(scfg);
                } catch (const IoError& e) {
                    throw ConfigError(e.what());
                }
                cm = ConfigMap::parse(text);
            }
            if (stoy && cm.has("scales.kind") && cm.str("scales.kind", "toy") != "toy") throw ConfigError("--toy conflicts with scales.kind");
            if (!smode.empty()) cm.set("stage.mode", smode);
            if (sq >= 0) cm.set("stage.q", std::to_string(sq));
            if (sn > 0) cm.set("grid.n", std::to_string(sn));
            if (srun->count("--t")) cm.set("stage.t", fmt(st));
            if (sseed >= 0) {
                cm.set("noise.enabled", "1");
                cm.set("noise.seed", std::to_string(sseed));
            }
            StageRunConfig c = stage_run_config(cm);
            cm.reject_unused();
            return stage_run(c, out);
        };
    });
    auto* sres = stg->add_subcommand("residual", "equation residual of a written stencil");
    sres->add_option("--in", sin, "directory written by stage run")->required();
    sres->callback([&] { action = [&] { return stage_residual(sin, out); }; });

    // noise
    auto* noi = app.add_subcommand("noise", "noise paths")->require_subcommand(1);
    NoiseConfig nc;
    nc.n = 16;
    std::string nmode = "additive";
    int nsamples = 8;
    double nL = 0.0;
    bool nsnap = false;
    auto* nsim = noi->add_subcommand("simulate", "sample paths, per-sample summaries and aggregate");
    nsim->add_option("--mode", nmode)->check(CLI::IsMember({"additive", "multiplicative"}));
    nsim->add_option("--m", nc.m);
    nsim->add_option("--s0", nc.s0);
    nsim->add_option("--sigma", nc.sigma);
    nsim->add_option("--dt", nc.dt)->check(CLI::PositiveNumber);
    nsim->add_option("--T", nc.T)->check(CLI::PositiveNumber);
    nsim->add_option("--seed", nc.seed);
    nsim->add_option("--samples", nsamples);
    nsim->add_option("--n", nc.n, "spectral truncation");
    nsim->add_option("--L", nL, "stopping-time level and cap (default T)");
    nsim->add_flag("--snapshots", nsnap, "write z(T) per sample (additive)");
    nsim->callback([&] {
        action = [&] {
            nc.mode = parse_mode(nmode);
            if (!nsim->count("--L")) nL = nc.T;
            return noise_simulate(nc, nsamples, nL, nsnap, out);
        };
    });

    // report
    std::string rdir;
    auto* rep = app.add_subcommand("report", "aggregate report.json files under a directory");
    rep->add_option("--dir", rdir, "directory of run outputs")->required();
    rep->callback([&] { action = [&] { return aggregate(rdir, out); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }
    try {
        return action ? action() : kUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::domain_error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const ResolutionError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const PlacementError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInternal;
    }
}
