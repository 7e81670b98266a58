#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hopfdde/continuation.hpp"
#include "hopfdde/diagram.hpp"
#include "hopfdde/integrate.hpp"
#include "hopfdde/io_util.hpp"
#include "hopfdde/parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hopfdde;

namespace {

/// Flat JSON config with dotted keys (model.r, sim.dt, ...).
struct Config {
    json data = json::object();

    static Config load(const std::string& path) {
        std::ifstream in(path);
        if (!in)
            throw ConfigError("cannot open config file: " + path);
        Config c;
        try {
            in >> c.data;
        } catch (const json::exception& e) {
            throw ConfigError(std::string("config parse error: ") + e.what());
        }
        if (!c.data.is_object())
            throw ConfigError("config root must be a JSON object");
        return c;
    }

    bool has(const std::string& key) const { return data.contains(key); }

    double num(const std::string& key) const {
        if (!has(key))
            throw ConfigError("missing required config field: " + key);
        const json& v = data.at(key);
        if (!v.is_number())
            throw ConfigError("config field must be a number: " + key);
        return v.get<double>();
    }
    double num_or(const std::string& key, double dflt) const {
        return has(key) ? num(key) : dflt;
    }
    int int_or(const std::string& key, int dflt) const {
        if (!has(key))
            return dflt;
        const json& v = data.at(key);
        if (!v.is_number_integer())
            throw ConfigError("config field must be an integer: " + key);
        return v.get<int>();
    }
    std::string str_or(const std::string& key, const std::string& dflt) const {
        if (!has(key))
            return dflt;
        const json& v = data.at(key);
        if (!v.is_string())
            throw ConfigError("config field must be a string: " + key);
        return v.get<std::string>();
    }
    bool flag_or(const std::string& key, bool dflt) const {
        if (!has(key))
            return dflt;
        const json& v = data.at(key);
        if (!v.is_boolean())
            throw ConfigError("config field must be a boolean: " + key);
        return v.get<bool>();
    }

    void set_kv(const std::string& spec) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("--set expects key=value, got: " + spec);
        const std::string key = spec.substr(0, eq);
        const std::string val = spec.substr(eq + 1);
        json parsed;
        try {
            parsed = json::parse(val);
            if (parsed.is_object() || parsed.is_array())
                parsed = val;
        } catch (const json::exception&) {
            parsed = val; // not a JSON scalar: keep as string
        }
        data[key] = parsed;
    }
};

ModelParams params_from(const Config& cfg) {
    return validate_params(cfg.num("model.r"), cfg.num("model.K"),
                           cfg.num("model.m"), cfg.num("model.a"),
                           cfg.num("model.c"), cfg.num("model.d"));
}

json num_or_null(const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
}

void write_json_file(const fs::path& path, const json& j) {
    write_text_file(path.string(), j.dump(2) + "\n");
}

const char* end_name(BranchEnd e) {
    switch (e) {
    case BranchEnd::Hopf:
        return "hopf";
    case BranchEnd::Lost:
        return "lost";
    case BranchEnd::DomainBoundary:
        return "domain_boundary";
    }
    return "?";
}

const char* eq_name(EqKind k) {
    switch (k) {
    case EqKind::Origin:
        return "origin";
    case EqKind::PreyOnly:
        return "prey_only";
    case EqKind::Interior:
        return "interior";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// thresholds

int cmd_thresholds(const Config& cfg, const fs::path& out) {
    const ModelParams p = params_from(cfg);
    const double tau = cfg.num_or("model.tau", 0.0);
    const Thresholds th = thresholds(p, tau);
    std::optional<double> tstar;
    bool tstar_defined = true;
    try {
        tstar = tau_star(p);
    } catch (const ConditionNotMet&) {
        tstar_defined = false;
    }

    json j{{"tau", tau},
           {"K_c", th.K_c},
           {"K_0", th.K_0},
           {"K_1", num_or_null(th.K_1)},
           {"K_2", th.K_2},
           {"tau_max", num_or_null(th.tau_max)},
           {"tau_bar", num_or_null(th.tau_bar)},
           {"tau_breve", num_or_null(th.tau_breve)},
           {"tau_star", num_or_null(tstar)}};
    write_json_file(out / "thresholds.json", j);

    auto line = [](const char* name, const std::optional<double>& v) {
        std::printf("%-10s %s\n", name, v ? fmt12(*v).c_str() : "undefined");
    };
    std::printf("thresholds at tau = %s\n", fmt12(tau).c_str());
    line("K_c", th.K_c);
    line("K_0", th.K_0);
    line("K_1", th.K_1);
    line("K_2", th.K_2);
    line("tau_max", th.tau_max);
    line("tau_bar", th.tau_bar);
    line("tau_breve", th.tau_breve);
    line("tau_star", tstar);
    (void)tstar_defined;
    return 0;
}

// ---------------------------------------------------------------------------
// hopf

int cmd_hopf(const Config& cfg, const fs::path& out) {
    const ModelParams p = params_from(cfg);
    const int grid = cfg.int_or("spectral.grid", 4096);
    const HopfCatalog cat = hopf_points(p, grid);
    const auto pts = cat.all();

    CsvWriter csv((out / "hopf_points.csv").string(),
                  {"n", "i", "tau", "w", "period", "delta", "gamma1"});
    for (const HopfPoint& h : pts)
        csv.row({std::to_string(h.n), std::to_string(h.i), fmt12(h.tau),
                 fmt12(h.w), fmt12(h.period), std::to_string(h.delta),
                 std::to_string(h.gamma1)});

    json j{{"chi", cat.chi},
           {"M", cat.M},
           {"N_bound", cat.N_bound},
           {"tau_bar", cat.tau_bar},
           {"zeta", num_or_null(cat.zeta)},
           {"count", pts.size()}};
    write_json_file(out / "hopf_catalog.json", j);

    std::string chis;
    for (std::size_t n = 0; n < cat.chi.size(); ++n)
        chis += (n ? " " : "") + std::to_string(cat.chi[n]);
    std::printf("hopf points: %zu on tau in (0, %s), chi = [%s]\n", pts.size(),
                fmt12(cat.tau_bar).c_str(), chis.c_str());
    for (const HopfPoint& h : pts)
        std::printf("  n=%d i=%d tau=%-16s w=%-16s delta=%+d\n", h.n, h.i,
                    fmt12(h.tau).c_str(), fmt12(h.w).c_str(), h.delta);
    return 0;
}

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const Config& cfg, const fs::path& out) {
    const ModelParams p = params_from(cfg);
    const double tau = cfg.num("model.tau");
    const double t_end = cfg.num_or("sim.t_end", 1000.0);
    IntegrateOptions opt;
    opt.dt = cfg.num_or("sim.dt", 0.0);

    const auto eq = interior_equilibrium(p, tau);
    const double x0 = cfg.num_or("sim.x0", eq ? 1.01 * eq->x : 0.9 * p.K);
    const double y0 = cfg.num_or("sim.y0", eq ? 1.01 * eq->y : 0.2 * p.c * p.K);
    const History hist = History::constant({x0, y0});
    const Trajectory traj = integrate(p, tau, hist, t_end, opt);

    {
        const std::size_t nodes = traj.v.size();
        const std::size_t stride = std::max<std::size_t>(1, (nodes + 19999) / 20000);
        CsvWriter csv((out / "trajectory.csv").string(), {"t", "x", "y"});
        for (std::size_t i = 0; i < nodes; i += stride)
            csv.row_values(
                {traj.t0 + traj.dt * static_cast<double>(i), traj.v[i].x, traj.v[i].y});
    }

    const AttractorInfo ai = detect_attractor(p, tau, traj);
    const RegionLabel reg = classify_region(p, tau, p.K);

    json j{{"tau", tau},       {"x0", x0},
           {"y0", y0},         {"t_end", t_end},
           {"region", region_name(reg)}};
    std::string summary = std::string("region ") + region_name(reg) + ": ";
    if (ai.kind == AttractorKind::Equilibrium && ai.equilibrium) {
        j["kind"] = "equilibrium";
        j["equilibrium"] = {{"kind", eq_name(ai.equilibrium->kind)},
                            {"x", ai.equilibrium->x},
                            {"y", ai.equilibrium->y}};
        summary += std::string("converged to ") + eq_name(ai.equilibrium->kind) +
                   " equilibrium (x=" + fmt12(ai.equilibrium->x) +
                   ", y=" + fmt12(ai.equilibrium->y) + ")";
    } else if (ai.kind == AttractorKind::Orbit && eq) {
        j["kind"] = "orbit";
        const Orbit orb = extract_orbit(p, tau, traj, eq->x);
        const std::size_t N = orb.samples.size();
        CsvWriter csv((out / "orbit.csv").string(), {"t", "x", "y"});
        for (std::size_t i = 0; i < N; ++i)
            csv.row_values({orb.period * static_cast<double>(i) /
                                static_cast<double>(N - 1),
                            orb.samples[i].x, orb.samples[i].y});
        j["orbit"] = {{"period", orb.period}, {"xmin", orb.xmin},
                      {"xmax", orb.xmax},     {"ymin", orb.ymin},
                      {"ymax", orb.ymax},     {"closure", orb.closure}};
        summary += "periodic orbit (period " + fmt12(orb.period) + ", amp_x " +
                   fmt12(orb.amp_x()) + ")";
    } else {
        j["kind"] = "unresolved";
        j["amp"] = ai.amp;
        summary += "unresolved tail (amp " + fmt12(ai.amp) + ")";
    }

    if (cfg.flag_or("sim.lyapunov", false) && tau > 0.0) {
        const double lt_end = cfg.num_or("sim.lyapunov_t_end", 40.0);
        const Trajectory st = integrate_scaled(p, tau, hist, lt_end, {});
        const int nv = 33;
        std::vector<double> ts(nv), vs(nv);
        double vmax = 0.0;
        for (int i = 0; i < nv; ++i) {
            ts[i] = 1.0 + (lt_end - 1.0 - 1e-9) * i / (nv - 1.0);
            vs[i] = lyapunov_value(p, tau, st, ts[i]);
            vmax = std::max(vmax, std::abs(vs[i]));
        }
        bool mono = true;
        for (int i = 1; i < nv; ++i)
            if (vs[i] > vs[i - 1] + 1e-7 * (1.0 + vmax))
                mono = false;
        json lv;
        lv["t"] = ts;
        lv["V"] = vs;
        lv["nonincreasing"] = mono;
        j["lyapunov"] = lv;
    }

    j["summary"] = summary;
    write_json_file(out / "simulate.json", j);
    std::printf("%s\n", summary.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// branch

void write_branch_csv(const fs::path& path, const Branch& b) {
    CsvWriter csv(path.string(), {"tau", "period", "amp_x", "amp_y", "xmin",
                                  "xmax", "ymin", "ymax"});
    for (const BranchPoint& q : b.points)
        csv.row_values({q.param, q.orbit.period, q.orbit.amp_x(),
                        q.orbit.amp_y(), q.orbit.xmin, q.orbit.xmax,
                        q.orbit.ymin, q.orbit.ymax});
}

json branch_entry(const Branch& b, const std::string& file) {
    json a;
    if (b.start.kind == AnchorKind::Hopf)
        a = {{"kind", "hopf"},
             {"n", b.start.hopf.n},
             {"i", b.start.hopf.i},
             {"tau", b.start.hopf.tau}};
    else
        a = {{"kind", "ode_cycle"}, {"tau", 0.0}};
    json e{{"file", file},
           {"anchor", a},
           {"end", end_name(b.end)},
           {"end_param", b.end_param},
           {"end_period", b.end_period},
           {"fold_back", b.fold_back},
           {"points", b.points.size()},
           {"note", b.note}};
    if (b.end_hopf)
        e["end_hopf"] = {{"n", b.end_hopf->n},
                         {"i", b.end_hopf->i},
                         {"tau", b.end_hopf->tau}};
    else
        e["end_hopf"] = nullptr;
    return e;
}

TraceMethod parse_method(const std::string& s) {
    if (s == "collocation")
        return TraceMethod::CollocationNewton;
    if (s == "simulation")
        return TraceMethod::SimulationContinuation;
    if (s == "shooting")
        return TraceMethod::ShootingNewton;
    throw ConfigError("branch.method must be collocation|simulation|shooting, got: " + s);
}

int cmd_branch(const Config& cfg, const fs::path& out) {
    const ModelParams p = params_from(cfg);
    StepPolicy pol;
    pol.method = parse_method(cfg.str_or("branch.method", "collocation"));
    pol.ds0 = cfg.num_or("branch.ds0", pol.ds0);
    pol.ds_max = cfg.num_or("branch.ds_max", pol.ds_max);
    pol.mesh = cfg.int_or("branch.mesh", pol.mesh);
    pol.mesh_max = cfg.int_or("branch.mesh_max", pol.mesh_max);
    pol.amp_end_rel = cfg.num_or("branch.amp_end_rel", pol.amp_end_rel);
    pol.max_points = cfg.int_or("branch.max_points", pol.max_points);
    pol.dtau0 = cfg.num_or("branch.dtau0", pol.dtau0);
    pol.sim_dt = cfg.num_or("branch.sim_dt", cfg.num_or("sim.dt", 0.0));
    pol.sim_periods = cfg.num_or("branch.sim_periods", pol.sim_periods);
    pol.sample_stride = cfg.int_or("branch.sample_stride", pol.sample_stride);

    json report;
    report["branches"] = json::array();
    std::vector<Branch> branches;
    std::vector<std::string> files;

    const std::string anchor = cfg.str_or("branch.anchor", "hopf");
    if (anchor == "cycle") {
        branches.push_back(trace_branch(p, p.K, Anchor::ode_cycle(), pol));
        files.push_back("branch_cycle.csv");
    } else if (anchor == "hopf") {
        const int n = cfg.int_or("branch.n", 0);
        const std::string which = cfg.str_or("branch.which", "pair");
        if (which != "minus" && which != "plus" && which != "pair")
            throw ConfigError("branch.which must be minus|plus|pair, got: " + which);
        const HopfCatalog cat = hopf_points(p, cfg.int_or("spectral.grid", 4096));
        if (static_cast<int>(cat.branches.size()) <= n || cat.branches[n].empty())
            throw OutOfDomain("no catalog Hopf points on angle branch n=" +
                              std::to_string(n));
        const auto& row = cat.branches[n];
        if (which != "plus") {
            branches.push_back(trace_branch(p, p.K, Anchor::at_hopf(row.front()), pol));
            files.push_back("branch_n" + std::to_string(n) + "_minus.csv");
        }
        if (which != "minus") {
            if (row.size() < 2)
                throw OutOfDomain("angle branch n=" + std::to_string(n) +
                                  " has no second critical delay");
            branches.push_back(trace_branch(p, p.K, Anchor::at_hopf(row.back()), pol));
            files.push_back("branch_n" + std::to_string(n) + "_plus.csv");
        }
    } else {
        throw ConfigError("branch.anchor must be hopf|cycle, got: " + anchor);
    }

    for (std::size_t i = 0; i < branches.size(); ++i) {
        write_branch_csv(out / files[i], branches[i]);
        report["branches"].push_back(branch_entry(branches[i], files[i]));
        const Branch& b = branches[i];
        const double at = b.start.kind == AnchorKind::Hopf ? b.start.hopf.tau : 0.0;
        std::printf("branch from tau=%s: %zu points, end %s at tau=%s (period %s)%s\n",
                    fmt12(at).c_str(), b.points.size(), end_name(b.end),
                    fmt12(b.end_param).c_str(), fmt12(b.end_period).c_str(),
                    b.fold_back ? " [fold-back]" : "");
    }

    if (branches.size() >= 2) {
        const ComponentReport cr = assemble_components(p, branches);
        json pairs = json::array();
        for (const PairVerdict& v : cr.pairs) {
            pairs.push_back(
                {{"n", v.n},
                 {"tau_minus", v.tau_minus},
                 {"tau_plus", v.tau_plus},
                 {"verdict", v.verdict == PairVerdict::Verdict::Coincident
                                 ? "coincident"
                                 : "inconclusive"},
                 {"max_overlap_gap", v.max_overlap_gap},
                 {"endpoints_match", v.endpoints_match},
                 {"note", v.note}});
            std::printf("component n=%d: %s (overlap gap %s, endpoints %s)\n", v.n,
                        v.verdict == PairVerdict::Verdict::Coincident
                            ? "coincident"
                            : "inconclusive",
                        fmt12(v.max_overlap_gap).c_str(),
                        v.endpoints_match ? "match" : "mismatch");
        }
        report["pairs"] = pairs;
        report["nested"] = cr.nested;
        report["notes"] = cr.notes;
        std::printf("nested: %s\n", cr.nested ? "yes" : "no");
    }

    if (anchor == "hopf") {
        const int n = cfg.int_or("branch.n", 0);
        if (n >= 1 && !branches.empty()) {
            try {
                const ScaledPeriodVerdict v = scaled_period_check(p, branches.front(), n);
                report["scaled_period"] = {{"n", n},
                                           {"pass", v.pass},
                                           {"min_ratio", v.min_ratio},
                                           {"max_ratio", v.max_ratio},
                                           {"checked", v.checked}};
                std::printf("scaled periods T/tau in (%s, %s) over %zu orbits: %s\n",
                            fmt12(v.min_ratio).c_str(), fmt12(v.max_ratio).c_str(),
                            v.checked, v.pass ? "in (1/(n+1), 1/n)" : "OUT OF RANGE");
            } catch (const HypothesisNotMet&) {
                report["scaled_period"] = nullptr;
            }
        }
    }

    write_json_file(out / "branch_report.json", report);
    return 0;
}

// ---------------------------------------------------------------------------
// diagram

int cmd_diagram(const Config& cfg, const fs::path& out) {
    const ModelParams p = params_from(cfg);
    const Thresholds th = thresholds(p, 0.0);
    const double K_hi = cfg.num_or("diagram.K_hi", 8.0 * th.K_0);
    const int tau_pts = cfg.int_or("diagram.tau_pts", 400);
    const int n_max = cfg.int_or("diagram.n_max", 6);
    const int max_steps = cfg.int_or("diagram.max_steps", 4000);

    json curves = json::array();

    // transcritical curve up to where K_1 reaches K_hi
    {
        const double tau_cap =
            std::log(p.c * p.m / (p.d * (1.0 + p.a / K_hi))) / p.d;
        std::vector<double> grid(tau_pts);
        for (int i = 0; i < tau_pts; ++i)
            grid[i] = tau_cap * i / (tau_pts - 1.0);
        const DiagramCurve lc = transcritical_curve(p, grid);
        CsvWriter csv((out / "curve_transcritical.csv").string(), {"tau", "K", "kind"});
        for (const auto& q : lc.points)
            csv.row({fmt12(q[0]), fmt12(q[1]), "transcritical"});
        curves.push_back({{"kind", "transcritical"},
                          {"n", nullptr},
                          {"points", lc.points.size()},
                          {"topology", "line"},
                          {"file", "curve_transcritical.csv"}});
        std::printf("L_c: %zu points\n", lc.points.size());
    }

    // Hopf curves for n = 0..n_max, each traced independently
    std::vector<std::optional<DiagramCurve>> hc(n_max + 1);
    std::vector<std::string> herr(n_max + 1);
    parallel_for(n_max + 1, [&](std::size_t n) {
        try {
            std::optional<std::array<double, 2>> seed;
            if (n == 0)
                seed = {{0.0, th.K_0}};
            else
                seed = hopf_curve_seed(p, static_cast<int>(n), K_hi);
            if (!seed) {
                herr[n] = "no seed found: curve absent for these parameters";
                return;
            }
            hc[n] = hopf_curve(p, static_cast<int>(n), *seed, max_steps);
        } catch (const Error& e) {
            herr[n] = e.what();
        }
    });
    for (int n = 0; n <= n_max; ++n) {
        if (!hc[n]) {
            curves.push_back({{"kind", "hopf"},
                              {"n", n},
                              {"points", 0},
                              {"topology", "absent"},
                              {"file", nullptr},
                              {"note", herr[n]}});
            std::printf("L_%d: absent (%s)\n", n, herr[n].c_str());
            continue;
        }
        const DiagramCurve& c = *hc[n];
        const std::string file = "curve_hopf_n" + std::to_string(n) + ".csv";
        const std::string kind = "hopf" + std::to_string(n);
        CsvWriter csv((out / file).string(), {"tau", "K", "kind"});
        for (const auto& q : c.points)
            csv.row({fmt12(q[0]), fmt12(q[1]), kind});
        const char* topo = c.topology == CurveTopology::Line    ? "line"
                           : c.topology == CurveTopology::Loop ? "loop"
                                                               : "unknown";
        curves.push_back({{"kind", "hopf"},
                          {"n", n},
                          {"points", c.points.size()},
                          {"topology", topo},
                          {"file", file}});
        std::printf("L_%d: %zu points (%s)\n", n, c.points.size(), topo);
    }

    // region grid
    const int rt = cfg.int_or("diagram.region_tau_pts", 60);
    const int rk = cfg.int_or("diagram.region_K_pts", 60);
    {
        const Thresholds thh = thresholds(with_carrying_capacity(p, K_hi), 0.0);
        const double tau_hi =
            cfg.num_or("diagram.tau_hi", thh.tau_max ? 1.1 * *thh.tau_max : 1.0 / p.d);
        const double K_lo = cfg.num_or("diagram.K_lo", 0.5 * th.K_c);
        std::vector<RegionLabel> labels(static_cast<std::size_t>(rt) * rk);
        parallel_for(labels.size(), [&](std::size_t idx) {
            const int i = static_cast<int>(idx) / rk;
            const int jk = static_cast<int>(idx) % rk;
            const double tau = tau_hi * i / (rt - 1.0);
            const double K = K_lo + (K_hi - K_lo) * jk / (rk - 1.0);
            labels[idx] = classify_region(p, tau, K);
        });
        CsvWriter csv((out / "regions.csv").string(), {"tau", "K", "label"});
        for (int i = 0; i < rt; ++i)
            for (int jk = 0; jk < rk; ++jk) {
                const double tau = tau_hi * i / (rt - 1.0);
                const double K = K_lo + (K_hi - K_lo) * jk / (rk - 1.0);
                csv.row({fmt12(tau), fmt12(K),
                         region_name(labels[static_cast<std::size_t>(i) * rk + jk])});
            }
        std::printf("regions: %d samples on [0, %s] x [%s, %s]\n", rt * rk,
                    fmt12(tau_hi).c_str(), fmt12(K_lo).c_str(), fmt12(K_hi).c_str());
    }

    json j;
    j["thresholds"] = {{"K_c", th.K_c}, {"K_0", th.K_0}, {"K_2", th.K_2}};
    std::optional<double> tstar;
    std::string tstar_note;
    try {
        tstar = tau_star(p);
    } catch (const Error& e) {
        tstar_note = e.what();
    }
    j["tau_star"] = num_or_null(tstar);
    if (!tstar_note.empty())
        j["tau_star_note"] = tstar_note;
    if (tstar)
        std::printf("tau_star = %s\n", fmt12(*tstar).c_str());

    const double slice_tau = cfg.num_or("diagram.slice_tau", cfg.num_or("model.tau", -1.0));
    if (slice_tau >= 0.0) {
        const std::vector<double> kh = hopf_in_K(p, slice_tau, K_hi);
        j["hopf_in_K"] = {{"tau", slice_tau}, {"K", kh}};
        std::printf("hopf thresholds in K at tau=%s: %zu\n", fmt12(slice_tau).c_str(),
                    kh.size());
    } else {
        j["hopf_in_K"] = nullptr;
    }
    j["curves"] = curves;
    j["region_grid"] = {{"file", "regions.csv"}, {"tau_pts", rt}, {"K_pts", rk}};
    write_json_file(out / "diagram.json", j);
    return 0;
}

// ---------------------------------------------------------------------------
// verify

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

int cmd_verify(const Config& cfg, const fs::path& out, unsigned long long seed) {
    const ModelParams p = params_from(cfg);
    std::vector<CheckResult> results;
    auto run = [&](const std::string& name, auto&& body) {
        CheckResult r;
        r.name = name;
        try {
            r.detail = body(r.pass);
        } catch (const std::exception& e) {
            r.pass = false;
            r.detail = std::string("exception: ") + e.what();
        }
        std::printf("[%s] %s%s%s\n", r.pass ? "ok" : "FAIL", r.name.c_str(),
                    r.detail.empty() ? "" : " - ", r.detail.c_str());
        results.push_back(std::move(r));
    };

    std::uint64_t state = seed ? seed : 0x9e3779b97f4a7c15ULL;
    auto rng = [&]() {
        // xorshift* keeps the stream identical across platforms
        state ^= state >> 12;
        state ^= state << 25;
        state ^= state >> 27;
        return state * 0x2545F4914F6CDD1DULL;
    };
    auto unif = [&]() { return std::ldexp(static_cast<double>(rng() >> 11), -53); };

    const Thresholds th0 = thresholds(p, 0.0);

    run("threshold-order", [&](bool& pass) {
        const bool order = th0.K_c < th0.K_2 && th0.K_2 < th0.K_0;
        const bool k1 = th0.K_1 && std::abs(*th0.K_1 - th0.K_c) <=
                                       1e-12 * std::max(1.0, th0.K_c);
        bool tb_lt = true;
        if (th0.tau_bar && th0.tau_max)
            tb_lt = *th0.tau_bar < *th0.tau_max;
        pass = order && k1 && tb_lt;
        return "K_c=" + fmt12(th0.K_c) + " K_2=" + fmt12(th0.K_2) +
               " K_0=" + fmt12(th0.K_0);
    });

    run("stationarity", [&](bool& pass) {
        double worst = 0.0;
        std::vector<double> taus{0.0};
        if (th0.tau_max)
            taus.push_back(0.3 * *th0.tau_max);
        for (double tau : taus)
            for (const Equilibrium& e : equilibria(p, tau)) {
                const Vec2 f = system_rhs(p, tau, {e.x, e.y}, {e.x, e.y});
                worst = std::max({worst, std::abs(f.x), std::abs(f.y)});
            }
        pass = worst < 1e-10;
        return "max |rhs| at equilibria = " + fmt12(worst);
    });

    run("hopf-on-axis", [&](bool& pass) {
        if (p.K <= th0.K_2) {
            pass = true;
            return std::string("skipped: K <= K_2, no crossing domain");
        }
        const HopfCatalog cat = hopf_points(p, 2048);
        const auto pts = cat.all();
        double worst = 0.0;
        std::size_t m = std::min<std::size_t>(pts.size(), 8);
        for (std::size_t i = 0; i < m; ++i) {
            const auto lam = char_root_refine(p, pts[i].tau, {0.0, pts[i].w});
            worst = std::max(worst, std::abs(lam.real()));
        }
        pass = worst < 1e-8;
        return "checked " + std::to_string(m) +
               " points, max |Re lambda| = " + fmt12(worst);
    });

    run("crossing-direction", [&](bool& pass) {
        if (p.K <= th0.K_2) {
            pass = true;
            return std::string("skipped: K <= K_2");
        }
        const HopfCatalog cat = hopf_points(p, 2048);
        pass = true;
        for (const auto& br : cat.branches)
            for (std::size_t i = 0; i < br.size(); ++i) {
                if (br[i].gamma1 != -br[i].delta)
                    pass = false;
                if (i && br[i].tau <= br[i - 1].tau)
                    pass = false;
            }
        return std::string("gamma1 = -delta and per-branch tau ordering");
    });

    run("region-consistency", [&](bool& pass) {
        if (p.K <= th0.K_2 * 1.05) {
            pass = true;
            return std::string("skipped: K too close to K_2");
        }
        int checked = 0, agreed = 0;
        const Thresholds thp = thresholds(p, 0.0);
        const double tmx = thp.tau_max ? *thp.tau_max : 0.0;
        for (int i = 1; i <= 5 && tmx > 0.0; ++i) {
            const double tau = tmx * i / 6.0;
            const RegionLabel lab = classify_region(p, tau, p.K);
            if (lab == RegionLabel::Vc)
                continue;
            int cnt;
            try {
                cnt = unstable_root_count(p, tau);
            } catch (const Error&) {
                continue;
            }
            ++checked;
            if ((cnt > 0) == (lab == RegionLabel::Va))
                ++agreed;
        }
        pass = checked == agreed;
        return std::to_string(agreed) + "/" + std::to_string(checked) +
               " sampled delays agree with the contour count";
    });

    run("positivity-random", [&](bool& pass) {
        pass = true;
        const double tmax_like = th0.tau_max ? *th0.tau_max : 1.0 / p.d;
        int ran = 0;
        for (int k = 0; k < 8; ++k) {
            const double tau = tmax_like * (0.05 + 1.15 * unif());
            const double x0 = p.K * std::pow(10.0, -2.0 + 2.3 * unif());
            const double y0 = p.c * p.K * std::pow(10.0, -2.0 + 2.3 * unif());
            const double t_end = std::min(std::max(20.0 * tau, 10.0 / p.d), 600.0);
            if (t_end * 200.0 / tau > 5e6)
                continue; // step budget guard for extreme parameter scales
            const Trajectory tr =
                integrate(p, tau, History::constant({x0, y0}), t_end);
            for (const Vec2& v : tr.v)
                if (!(v.x > 0.0) || v.y < 0.0)
                    pass = false;
            ++ran;
        }
        return std::to_string(ran) + " randomized constant histories";
    });

    run("scaled-consistency", [&](bool& pass) {
        const double tau = th0.tau_max ? 0.7 * *th0.tau_max : 0.5 / p.d;
        if (tau <= 0.0) {
            pass = true;
            return std::string("skipped: no positive delay available");
        }
        const auto eq = interior_equilibrium(p, tau);
        const Vec2 h0{eq ? 1.01 * eq->x : 0.9 * p.K,
                      eq ? 1.01 * eq->y : 0.1 * p.c * p.K};
        const Trajectory a = integrate(p, tau, History::constant(h0), 5.0 * tau);
        const Trajectory b = integrate_scaled(p, tau, History::constant(h0), 5.0);
        double worst = 0.0;
        for (int i = 1; i <= 10; ++i) {
            const double ts = 5.0 * i / 10.0;
            const Vec2 va = a.eval(ts * tau), vb = b.eval(ts);
            const double sc = std::max({1e-12, std::abs(va.x), std::abs(va.y)});
            worst = std::max(worst, std::max(std::abs(va.x - vb.x),
                                             std::abs(va.y - vb.y)) /
                                        sc);
        }
        pass = worst < 1e-6;
        return "max relative mismatch = " + fmt12(worst);
    });

    run("lyapunov-monotone", [&](bool& pass) {
        if (!th0.tau_max) {
            pass = true;
            return std::string("skipped: tau_max undefined");
        }
        const double tau = 1.05 * *th0.tau_max;
        const Trajectory st = integrate_scaled(
            p, tau, History::constant({0.8 * p.K, 0.05 * p.c * p.K}), 25.0, {});
        double prev = 0.0, vmax = 0.0;
        pass = true;
        for (int i = 0; i <= 16; ++i) {
            const double t = 1.0 + (24.0 - 1e-9) * i / 16.0;
            const double v = lyapunov_value(p, tau, st, t);
            vmax = std::max(vmax, std::abs(v));
            if (i && v > prev + 1e-7 * (1.0 + vmax))
                pass = false;
            prev = v;
        }
        return "V sampled at 17 scaled times, max |V| = " + fmt12(vmax);
    });

    run("convergence-order", [&](bool& pass) {
        const double tau = th0.tau_max ? std::min(0.8 * *th0.tau_max, 5.0 / p.d)
                                       : 1.0 / p.d;
        const auto eq = interior_equilibrium(p, tau);
        const Vec2 h0{eq ? 1.05 * eq->x : 0.8 * p.K,
                      eq ? 1.05 * eq->y : 0.1 * p.c * p.K};
        const double t_end = 4.0 * tau;
        // base step capped by the stiffness-aware default so the coarse run
        // stays inside the RK4 stability region for fast-prey parameter sets
        const double h1 = std::min(tau / 40.0, default_dt(p, tau, false));
        IntegrateOptions o1, o2, o4;
        o1.dt = h1;
        o2.dt = h1 / 2.0;
        o4.dt = h1 / 4.0;
        const Vec2 v1 = integrate(p, tau, History::constant(h0), t_end, o1).eval(t_end);
        const Vec2 v2 = integrate(p, tau, History::constant(h0), t_end, o2).eval(t_end);
        const Vec2 v4 = integrate(p, tau, History::constant(h0), t_end, o4).eval(t_end);
        const double e1 = std::hypot(v1.x - v4.x, v1.y - v4.y);
        const double e2 = std::hypot(v2.x - v4.x, v2.y - v4.y);
        // error(dt) ~ C dt^p against the dt/4 reference: e1/e2 = 2^p + 1
        const double order = std::log2(std::max(e1 / e2 - 1.0, 1e-6));
        pass = order > 3.4 || e1 < 1e-13;
        return "observed order ~ " + fmt12(order);
    });

    run("seed-residuals", [&](bool& pass) {
        double r0 = std::abs(ell_n(p, 0.0, th0.K_0, 0));
        double rs = 0.0;
        std::string extra;
        try {
            const double ts = tau_star(p);
            rs = std::abs(ell_n(p, ts, th0.K_0, 0));
            extra = ", |ell_0(tau*)| = " + fmt12(rs);
        } catch (const ConditionNotMet&) {
            extra = ", tau* hypothesis not met";
        }
        pass = r0 < 1e-9 && rs < 1e-9;
        return "|ell_0(0, K_0)| = " + fmt12(r0) + extra;
    });

    int failed = 0;
    json checks = json::array();
    for (const CheckResult& r : results) {
        checks.push_back({{"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
        if (!r.pass)
            ++failed;
    }
    json j{{"seed", seed},
           {"checks", checks},
           {"passed", results.size() - failed},
           {"failed", failed}};
    write_json_file(out / "verify.json", j);
    std::printf("verify: %zu/%zu passed\n", results.size() - failed, results.size());
    return failed == 0 ? 0 : 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"bifurcation analysis of a delayed predator-prey system "
                 "(Holling type II response, delayed predator conversion)"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    unsigned long long seed = 42;
    double dt = 0.0;
    int grid = 0;
    std::vector<std::string> sets;
    std::string cmd;

    for (const char* name :
         {"thresholds", "hopf", "simulate", "branch", "diagram", "verify"}) {
        CLI::App* sc = app.add_subcommand(name, "");
        sc->add_option("--config", config_path, "path to the JSON config")->required();
        sc->add_option("--out", out_dir, "output directory (default: out.dir or ./out)");
        sc->add_option("--seed", seed, "seed for randomized property checks");
        sc->add_option("--dt", dt, "integrator step override");
        sc->add_option("--grid", grid, "grid-size override (spectral scan, diagram)");
        sc->add_option("--set", sets, "config override as key=value (repeatable)");
        sc->callback([&cmd, name] { cmd = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int r = app.exit(e);
        return r == 0 ? 0 : 1;
    }

#define HOPFDDE_MAP(T, code)                                                   \
    catch (const T& e) {                                                       \
        std::fprintf(stderr, "error (%s): %s\n", #T, e.what());                \
        return code;                                                           \
    }

    try {
        Config cfg = Config::load(config_path);
        for (const std::string& s : sets)
            cfg.set_kv(s);
        if (dt > 0.0)
            cfg.data["sim.dt"] = dt;
        if (grid > 0) {
            cfg.data["spectral.grid"] = grid;
            cfg.data["diagram.tau_pts"] = grid;
        }
        cfg.data["run.seed"] = seed;
        const fs::path out =
            out_dir.empty() ? fs::path(cfg.str_or("out.dir", "out")) : fs::path(out_dir);
        fs::create_directories(out);
        cfg.data["out.dir"] = out.string();
        write_json_file(out / "run_config.json", cfg.data);

        if (cmd == "thresholds")
            return cmd_thresholds(cfg, out);
        if (cmd == "hopf")
            return cmd_hopf(cfg, out);
        if (cmd == "simulate")
            return cmd_simulate(cfg, out);
        if (cmd == "branch")
            return cmd_branch(cfg, out);
        if (cmd == "diagram")
            return cmd_diagram(cfg, out);
        if (cmd == "verify")
            return cmd_verify(cfg, out, seed);
        std::fprintf(stderr, "error: unknown command\n");
        return 1;
    }
    HOPFDDE_MAP(ConfigError, 1)
    HOPFDDE_MAP(NonPositiveParameter, 1)
    HOPFDDE_MAP(ConditionC0Violated, 1)
    HOPFDDE_MAP(NoHexicDomain, 1)
    HOPFDDE_MAP(OutOfDomain, 1)
    HOPFDDE_MAP(StepSizeInvalid, 1)
    HOPFDDE_MAP(ConditionNotMet, 1)
    HOPFDDE_MAP(HypothesisNotMet, 1)
    HOPFDDE_MAP(AnchorDegenerate, 1)
    HOPFDDE_MAP(SeedNotOnCurve, 1)
    HOPFDDE_MAP(Error, 2)
    catch (const json::exception& e) {
        std::fprintf(stderr, "error (json): %s\n", e.what());
        return 1;
    }
    catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
#undef HOPFDDE_MAP
}
