#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "qsmulti/io.hpp"
#include "qsmulti/qsmulti.hpp"

namespace fs = std::filesystem;
using namespace qsmulti;
using io::json;

namespace {

struct ContinuationSpec {
    double pi1_min = 0.5;
    double pi1_max = 10.0;
    double step = 0.025;
};

struct Analysis {
    double g0_star = 0.0;
    double S_star = 1.0;
    std::optional<double> v0;
};

struct RunConfig {
    Scenario scenario = scenario_preset("case1");
    IntegrationOptions integration;
    SweepSpec sweep;
    ContinuationSpec continuation;
    Analysis analysis;
    std::vector<std::pair<std::string, std::string>> overrides;
};

struct Invocation {
    std::string config_path;
    std::string scenario;
    std::vector<std::string> sets;
    std::string out_dir = "out";
    unsigned threads = 0;
    int verbosity = 0;
};

double parse_number(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw ValidationError(key, "not a number: '" + text + "'");
    }
    if (used != text.size()) throw ValidationError(key, "not a number: '" + text + "'");
    return v;
}

void set_continuation(ContinuationSpec& c, const std::string& k, double v) {
    if (k == "pi1_min") c.pi1_min = v;
    else if (k == "pi1_max") c.pi1_max = v;
    else if (k == "step") c.step = v;
    else throw ValidationError("continuation." + k, "unknown continuation key");
}

void set_analysis(Analysis& a, const std::string& k, double v) {
    if (k == "g0_star") a.g0_star = v;
    else if (k == "S_star") a.S_star = v;
    else if (k == "v0") a.v0 = v;
    else throw ValidationError("analysis." + k, "unknown analysis key");
}

bool is_analysis_key(const std::string& k) { return k == "g0_star" || k == "S_star" || k == "v0"; }

void apply_config(RunConfig& rc, const json& j) {
    if (!j.is_object()) throw ValidationError("config", "top level must be an object");
    for (const auto& [k, v] : j.items()) {
        if (k == "scenario") continue;
        if (k == "params") rc.scenario.params = io::params_from_json(v, rc.scenario.params);
        else if (k == "initial") rc.scenario.initial = io::state_from_json(v, rc.scenario.initial);
        else if (k == "integration") rc.integration = io::options_from_json(v, rc.integration);
        else if (k == "sweep") rc.sweep = io::sweep_from_json(v, rc.sweep);
        else if (k == "continuation") {
            if (!v.is_object()) throw ValidationError("continuation", "must be an object");
            for (const auto& [ck, cv] : v.items()) set_continuation(rc.continuation, ck, io::number_field(cv, ck));
        } else if (k == "analysis") {
            if (!v.is_object()) throw ValidationError("analysis", "must be an object");
            for (const auto& [ak, av] : v.items()) set_analysis(rc.analysis, ak, io::number_field(av, ak));
        } else {
            throw ValidationError(k, "unknown config key");
        }
    }
}

void apply_set(RunConfig& rc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("--set", "expected key=value, got '" + assignment + "'");
    std::string key = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    std::string section;
    if (const auto dot = key.find('.'); dot != std::string::npos) {
        section = key.substr(0, dot);
        key = key.substr(dot + 1);
    }
    if (section.empty()) {
        if (ModelParams::has_field(key) || state_index(key)) section = ModelParams::has_field(key) ? "params" : "initial";
        else if (is_analysis_key(key)) section = "analysis";
        else throw ValidationError(key, "unknown parameter, state component or analysis key");
    }
    if (section == "params") {
        if (!ModelParams::has_field(key)) throw ValidationError(key, "unknown parameter");
        rc.scenario.set(key, parse_number(key, value));
    } else if (section == "initial") {
        if (!state_index(key)) throw ValidationError(key, "unknown state component");
        rc.scenario.set(key, parse_number(key, value));
    } else if (section == "integration") {
        io::set_option(rc.integration, key, json(parse_number(key, value)));
    } else if (section == "sweep") {
        const auto dot = key.find('.');
        const std::string axis = key.substr(0, dot), field = dot == std::string::npos ? "" : key.substr(dot + 1);
        if ((axis != "x" && axis != "y") || field.empty()) throw ValidationError("sweep." + key, "expected sweep.x.<field> or sweep.y.<field>");
        json j = io::to_json(rc.sweep);
        if (field == "param" || field == "scale") j[axis][field] = value;
        else j[axis][field] = field == "count" ? json(static_cast<int>(parse_number(key, value))) : json(parse_number(key, value));
        rc.sweep = io::sweep_from_json(j, rc.sweep);
    } else if (section == "continuation") {
        set_continuation(rc.continuation, key, parse_number(key, value));
    } else if (section == "analysis") {
        set_analysis(rc.analysis, key, parse_number(key, value));
    } else {
        throw ValidationError(section, "unknown --set section");
    }
    rc.overrides.emplace_back(section + "." + key, value);
}

RunConfig load(const Invocation& inv) {
    json file = json::object();
    if (!inv.config_path.empty()) {
        try {
            file = json::parse(io::read_file(inv.config_path));
        } catch (const json::parse_error& e) {
            throw ValidationError("config", std::string("invalid JSON: ") + e.what());
        }
    }
    std::string name = "case1";
    if (file.contains("scenario")) {
        if (!file["scenario"].is_string()) throw ValidationError("scenario", "must be a string");
        name = file["scenario"].get<std::string>();
    }
    if (!inv.scenario.empty()) name = inv.scenario;
    RunConfig rc;
    rc.scenario = scenario_preset(name);
    apply_config(rc, file);
    for (const auto& s : inv.sets) apply_set(rc, s);
    rc.scenario.validate();
    rc.integration.validate();
    return rc;
}

json effective_config(const RunConfig& rc) {
    json analysis{{"g0_star", rc.analysis.g0_star}, {"S_star", rc.analysis.S_star}};
    if (rc.analysis.v0) analysis["v0"] = *rc.analysis.v0;
    return json{{"scenario", rc.scenario.name},
                {"params", io::to_json(rc.scenario.params)},
                {"initial", io::to_json(rc.scenario.initial)},
                {"integration", io::to_json(rc.integration)},
                {"sweep", io::to_json(rc.sweep)},
                {"continuation",
                 {{"pi1_min", rc.continuation.pi1_min}, {"pi1_max", rc.continuation.pi1_max}, {"step", rc.continuation.step}}},
                {"analysis", analysis}};
}

class Output {
public:
    Output(const Invocation& inv, const RunConfig& rc, std::string subcommand)
        : dir_(inv.out_dir), rc_(rc), sub_(std::move(subcommand)), verbose_(inv.verbosity > 0) {}

    void write(const std::string& name, const std::string& content) {
        io::write_atomic(dir_ / name, content);
        files_.push_back(name);
        if (verbose_) std::cerr << "wrote " << (dir_ / name).string() << "\n";
    }

    void finish(json result) {
        const json cfg = effective_config(rc_);
        write("config.json", cfg.dump(2) + "\n");
        json overrides = json::object();
        for (const auto& [k, v] : rc_.overrides) overrides[k] = v;
        json versions = json::object();
        for (const char* m : {"model_core", "integrator", "equilibria", "stability", "reproduction", "sweep", "cli"})
            versions[m] = std::string(kVersion);
        files_.push_back("manifest.json");
        json manifest{{"tool", "qsmulti"},
                      {"version", std::string(kVersion)},
                      {"subcommand", sub_},
                      {"config_hash", io::hex64(io::fnv1a64(cfg.dump()))},
                      {"params", io::to_json(rc_.scenario.params)},
                      {"overrides", overrides},
                      {"module_versions", versions},
                      {"notes", rc_.scenario.notes},
                      {"config", cfg},
                      {"outputs", files_},
                      {"result", std::move(result)}};
        io::write_atomic(dir_ / "manifest.json", manifest.dump(2) + "\n");
    }

private:
    fs::path dir_;
    const RunConfig& rc_;
    std::string sub_;
    bool verbose_;
    std::vector<std::string> files_;
};

json state_json(const StateVector& x) { return io::to_json(FullState::from_array(x)); }

/// Closest catalogued equilibrium to a state (DFE compared at the state's own genome frequency).
json nearest_equilibrium(const ModelParams& p, const StateVector& x) {
    std::vector<EquilibriumPoint> candidates;
    try {
        const double g0 = std::clamp(x[idx::g0], 0.0, 1.0);
        const double S = std::clamp(x[idx::S], 0.0, 1.0);
        if (p.chi > 0.0) candidates.push_back(dfe_point(p, g0, {S, 0.0, 1.0 - S}));
    } catch (const std::exception&) {
    }
    try {
        NmeFreedoms f;
        f.D = x[idx::D];
        candidates.push_back(nme_point(p, f));
    } catch (const std::exception&) {
    }
    try {
        CseFreedoms f;
        f.D = x[idx::D];
        for (auto& e : cse_solve(p, {}, f)) candidates.push_back(std::move(e));
    } catch (const std::exception&) {
    }
    if (candidates.empty()) return nullptr;
    const EquilibriumPoint* best = &candidates.front();
    for (const auto& e : candidates)
        if (distance(x, e) < distance(x, *best)) best = &e;
    return json{{"class", to_string(best->cls)}, {"branch", best->branch}, {"distance", distance(x, *best)},
                {"point", io::to_json(*best)}};
}

int cmd_simulate(const Invocation& inv) {
    const auto rc = load(inv);
    Output out(inv, rc, "simulate");
    const auto run = run_scenario(rc.scenario, rc.integration);
    const auto& tr = run.trajectory;
    out.write("trajectory.csv", io::trajectory_csv(tr, rc.scenario.params));
    out.write("events.json", io::events_json(tr).dump(2) + "\n");
    json result{{"endpoint", to_string(run.endpoint)},
                {"final_time", tr.final_time()},
                {"final_state", state_json(tr.final_state())},
                {"stop_reason", to_string(tr.stop_reason)},
                {"settle_time", tr.settle_time ? json(*tr.settle_time) : json(nullptr)},
                {"max_macro_drift", tr.max_macro_drift},
                {"max_micro_drift", tr.max_micro_drift},
                {"clamp_mass", tr.clamp_mass},
                {"clamp_events", tr.count(EventKind::Clamp)},
                {"nearest_equilibrium", nearest_equilibrium(rc.scenario.params, tr.final_state())}};
    out.finish(result);
    std::cout << "endpoint " << to_string(run.endpoint) << " at t = " << tr.final_time() << "\n";
    return 0;
}

json annotate_stability(const ModelParams& p, const EquilibriumPoint& e) {
    json j = io::to_json(e);
    const auto s = spectrum_at(p, e);
    j["spectrum"] = io::to_json(s);
    const auto T = quasi_period(s);
    j["quasi_period"] = T ? json(*T) : json(nullptr);
    return j;
}

int cmd_equilibria(const Invocation& inv) {
    const auto rc = load(inv);
    const auto& p = rc.scenario.params;
    Output out(inv, rc, "equilibria");
    const auto cat = equilibrium_catalog(p, rc.analysis.g0_star);
    json j = io::to_json(cat);
    j["dfe_representative"] = annotate_stability(p, cat.dfe_representative);
    if (cat.nme) j["nme"] = annotate_stability(p, *cat.nme);
    json cse = json::array();
    for (const auto& e : cat.cse) cse.push_back(annotate_stability(p, e));
    j["cse"] = cse;
    out.write("equilibria.json", j.dump(2) + "\n");
    std::size_t nmut = 0;
    for (const auto& c : cat.nmut) nmut += c.feasible ? 1 : 0;
    json result{{"nme", cat.nme.has_value()}, {"nmut_feasible_cases", nmut}, {"cse_count", cat.cse.size()}};
    out.finish(result);
    std::cout << "DFE segment: " << cat.dfe_segment << "\nNME: " << (cat.nme ? "1" : "0") << "\nNmutE cases: " << nmut
              << "\nCSE: " << cat.cse.size() << "\n";
    return 0;
}

int cmd_stability(const Invocation& inv) {
    const auto rc = load(inv);
    const auto& p = rc.scenario.params;
    Output out(inv, rc, "stability");
    const auto cat = equilibrium_catalog(p, rc.analysis.g0_star);

    std::string csv = io::spectrum_csv_header(kStateDim, "point");
    json points = json::array();
    auto add = [&](const std::string& label, const EquilibriumPoint& e) {
        const auto s = spectrum_at(p, e);
        csv += io::spectrum_csv_row(label, s);
        const auto T = quasi_period(s);
        points.push_back(json{{"label", label},
                              {"class", to_string(e.cls)},
                              {"state", io::to_json(e.state())},
                              {"spectrum", io::to_json(s)},
                              {"stable", s.n_unstable == 0},
                              {"quasi_period", T ? json(*T) : json(nullptr)}});
        std::cout << label << ": unstable " << s.n_unstable << ", center " << s.n_center << ", stable " << s.n_stable << "\n";
    };
    DfeFreedoms dfree{rc.analysis.S_star, 0.0, 1.0 - rc.analysis.S_star};
    if (p.chi == 0.0) dfree = {rc.analysis.S_star, 1.0 - rc.analysis.S_star, 0.0};
    add("DFE", dfe_point(p, rc.analysis.g0_star, dfree));
    if (cat.nme) add("NME", *cat.nme);
    for (std::size_t k = 0; k < cat.cse.size(); ++k) add("CSE" + std::to_string(k + 1), cat.cse[k]);

    json dfe_growth{{"S_star", rc.analysis.S_star},
                    {"g0_star", rc.analysis.g0_star},
                    {"psi", dfe_psi(rc.analysis.S_star, rc.analysis.g0_star, p)}};
    const auto bS = dfe_boundary_S(rc.analysis.g0_star, p);
    dfe_growth["boundary_S"] = bS ? json(*bS) : json(nullptr);

    out.write("spectrum.csv", csv);
    out.write("stability.json", json{{"points", points}, {"dfe_growth", dfe_growth}}.dump(2) + "\n");
    out.finish(json{{"points", points.size()}});
    return 0;
}

int cmd_r0(const Invocation& inv) {
    const auto rc = load(inv);
    const auto& p = rc.scenario.params;
    Output out(inv, rc, "r0");
    const double v0 = rc.analysis.v0 ? *rc.analysis.v0 : p.xi0 * rc.analysis.g0_star / p.gamma0;
    const double R0 = r0(p, v0);
    json result{{"R0", R0}, {"v0", v0}};
    if (!rc.analysis.v0) result["g0_star"] = rc.analysis.g0_star;
    if (p.pi1 + p.delta1 > 0.0) {
        const double v1 = p.xi1 * (1.0 - rc.analysis.g0_star) / p.gamma1;
        const auto ngm = two_strain_ngm(p, {0.0, 0.0}, v0, v1);
        result["two_strain_ngm"] = json{{"K", {{ngm.k00, ngm.k01}, {ngm.k10, ngm.k11}}}, {"spectral_radius", ngm.spectral_radius}};
    }
    out.write("r0.json", result.dump(2) + "\n");
    out.finish(result);
    char buf[64];
    std::snprintf(buf, sizeof buf, "R0 = %.10f\n", R0);
    std::cout << buf;
    return 0;
}

int cmd_sweep(const Invocation& inv) {
    const auto rc = load(inv);
    Output out(inv, rc, "sweep");
    const unsigned threads = inv.threads > 0 ? inv.threads : std::max(1u, std::thread::hardware_concurrency());
    const auto grid = sweep(rc.scenario, rc.sweep, rc.integration, threads);
    out.write("sweep.csv", io::sweep_csv(grid));
    const json side = io::sweep_sidecar(grid, rc.scenario);
    out.write("sweep.json", side.dump(2) + "\n");
    out.finish(json{{"cells", grid.cells.size()}, {"class_counts", side["class_counts"]}});
    std::cout << side["class_counts"].dump() << "\n";
    return 0;
}

int cmd_continue_cse(const Invocation& inv) {
    const auto rc = load(inv);
    Output out(inv, rc, "continue-cse");
    const auto& c = rc.continuation;
    const auto cont = cse_continuation(rc.scenario.params, c.pi1_min, c.pi1_max, c.step);
    out.write("cse_families.csv", io::cse_families_csv(cont));
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json fams = json::array();
    for (const auto& f : cont.families)
        fams.push_back(json{{"tag", f.tag}, {"born_at", opt(f.born_at)}, {"ended_at", opt(f.ended_at)}, {"points", f.points.size()}});
    json result{{"birth_grid", opt(cont.birth_grid)},
                {"birth_refined", opt(cont.birth_refined)},
                {"collision_grid", opt(cont.collision_grid)},
                {"collision_refined", opt(cont.collision_refined)},
                {"families", fams}};
    if (cont.collision_point) result["collision_point"] = io::to_json(cont.collision_point->state());
    out.write("continuation.json", result.dump(2) + "\n");
    out.finish(result);
    std::cout << "birth " << result["birth_grid"].dump() << " (refined " << result["birth_refined"].dump() << "), collision "
              << result["collision_grid"].dump() << " (refined " << result["collision_refined"].dump() << ")\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multiscale quasispecies / two-strain SIRS toolkit"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    Invocation inv;
    auto common = [&inv](CLI::App* sub) {
        sub->add_option("-c,--config", inv.config_path, "JSON config file");
        sub->add_option("-s,--scenario", inv.scenario, "case1 | case2 | custom (overrides the config)");
        sub->add_option("--set", inv.sets, "key=value override (params, initial, analysis, or section.key)")->take_all();
        sub->add_option("-o,--out", inv.out_dir, "output directory");
        sub->add_option("--threads", inv.threads, "worker threads for sweeps (0 = hardware)");
        sub->add_flag("-v,--verbose", inv.verbosity, "progress on stderr");
    };

    struct Cmd {
        const char* name;
        const char* help;
        int (*fn)(const Invocation&);
    };
    const Cmd cmds[] = {
        {"simulate", "integrate a scenario and classify its endpoint", cmd_simulate},
        {"equilibria", "equilibrium catalog with certificates", cmd_equilibria},
        {"stability", "Jacobian spectra of the catalogued equilibria", cmd_stability},
        {"r0", "basic reproduction number at a disease-free point", cmd_r0},
        {"sweep", "endpoint classification over a two-parameter grid", cmd_sweep},
        {"continue-cse", "trace co-circulation families in pi1", cmd_continue_cse},
    };
    std::vector<std::pair<CLI::App*, int (*)(const Invocation&)>> subs;
    for (const auto& c : cmds) {
        auto* sub = app.add_subcommand(c.name, c.help);
        common(sub);
        subs.emplace_back(sub, c.fn);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        for (auto [sub, fn] : subs)
            if (sub->parsed()) return fn(inv);
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const DomainError& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return 1;
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.condition() << " (margin " << e.margin() << ")\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
