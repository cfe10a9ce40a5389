#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "json.hpp"

#include "qsmulti/equilibria.hpp"
#include "qsmulti/integrator.hpp"
#include "qsmulti/linalg.hpp"
#include "qsmulti/reproduction.hpp"
#include "qsmulti/sweep.hpp"
#include "qsmulti/types.hpp"

namespace qsmulti::io {

using json = nlohmann::ordered_json;

/// 17 significant digits, so values round-trip exactly.
inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", v);
    return buf;
}

inline std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Writes via a temporary file in the same directory and renames it into place.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("config", "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------- params / state / options

inline json to_json(const ModelParams& p) {
    json j = json::object();
    for (const auto& f : ModelParams::fields) j[std::string(f.name)] = p.*f.member;
    return j;
}

inline double number_field(const json& v, const std::string& key) {
    if (!v.is_number()) throw ValidationError(key, "must be a number");
    return v.get<double>();
}

/// Overlays the keys of a flat object onto `base`; unknown keys are rejected.
inline ModelParams params_from_json(const json& j, ModelParams base = {}) {
    if (!j.is_object()) throw ValidationError("params", "must be an object");
    for (const auto& [k, v] : j.items()) {
        if (!ModelParams::has_field(k)) throw ValidationError(k, "unknown parameter");
        base.set(k, number_field(v, k));
    }
    return base;
}

inline json to_json(const FullState& s) {
    json j = json::object();
    const auto x = s.to_array();
    for (std::size_t i = 0; i < kStateDim; ++i) j[std::string(kStateNames[i])] = x[i];
    return j;
}

inline FullState state_from_json(const json& j, FullState base = principal_initial_state()) {
    if (!j.is_object()) throw ValidationError("initial", "must be an object");
    auto x = base.to_array();
    for (const auto& [k, v] : j.items()) {
        const auto i = state_index(k);
        if (!i) throw ValidationError(k, "unknown state component");
        x[*i] = number_field(v, k);
    }
    return FullState::from_array(x);
}

inline json to_json(const IntegrationOptions& o) {
    return json{{"rtol", o.rtol},
                {"atol", o.atol},
                {"t_max", o.t_max},
                {"clamp_threshold", o.clamp_threshold},
                {"max_steps", o.max_steps},
                {"settle_norm", o.settle_norm},
                {"settle_duration", o.settle_duration},
                {"stop_on_settle", o.stop_on_settle},
                {"record_every", o.record_every}};
}

inline void set_option(IntegrationOptions& o, const std::string& k, const json& v) {
    if (k == "rtol") o.rtol = number_field(v, k);
    else if (k == "atol") o.atol = number_field(v, k);
    else if (k == "t_max") o.t_max = number_field(v, k);
    else if (k == "clamp_threshold") o.clamp_threshold = number_field(v, k);
    else if (k == "max_steps") o.max_steps = static_cast<long>(number_field(v, k));
    else if (k == "settle_norm") o.settle_norm = number_field(v, k);
    else if (k == "settle_duration") o.settle_duration = number_field(v, k);
    else if (k == "record_every") o.record_every = static_cast<long>(number_field(v, k));
    else if (k == "stop_on_settle") {
        if (v.is_boolean()) o.stop_on_settle = v.get<bool>();
        else o.stop_on_settle = number_field(v, k) != 0.0;
    } else throw ValidationError(k, "unknown integration option");
}

inline IntegrationOptions options_from_json(const json& j, IntegrationOptions base = {}) {
    if (!j.is_object()) throw ValidationError("integration", "must be an object");
    for (const auto& [k, v] : j.items()) set_option(base, k, v);
    return base;
}

inline json to_json(const AxisSpec& a) {
    return json{{"param", a.param}, {"min", a.min}, {"max", a.max}, {"count", a.count},
                {"scale", a.log_scale ? "log" : "linear"}};
}

/// Reads an axis; keys that are absent keep their value from base.
inline AxisSpec axis_from_json(const json& j, const std::string& where, AxisSpec a = {}) {
    if (!j.is_object()) throw ValidationError(where, "must be an object");
    for (const auto& [k, v] : j.items()) {
        if (k == "param") {
            if (!v.is_string()) throw ValidationError(where + ".param", "must be a string");
            a.param = v.get<std::string>();
        } else if (k == "min") a.min = number_field(v, where + ".min");
        else if (k == "max") a.max = number_field(v, where + ".max");
        else if (k == "count") a.count = static_cast<int>(number_field(v, where + ".count"));
        else if (k == "scale") {
            if (v != "linear" && v != "log") throw ValidationError(where + ".scale", "must be 'linear' or 'log'");
            a.log_scale = v == "log";
        } else throw ValidationError(where + "." + k, "unknown axis key");
    }
    a.validate();
    return a;
}

inline json to_json(const SweepSpec& s) { return json{{"x", to_json(s.x)}, {"y", to_json(s.y)}}; }

inline SweepSpec sweep_from_json(const json& j, SweepSpec base = {}) {
    if (!j.is_object()) throw ValidationError("sweep", "must be an object");
    for (const auto& [k, v] : j.items()) {
        if (k == "x") base.x = axis_from_json(v, "sweep.x", base.x);
        else if (k == "y") base.y = axis_from_json(v, "sweep.y", base.y);
        else throw ValidationError("sweep." + k, "unknown sweep key");
    }
    return base;
}

// ---------------------------------------------------------------- trajectory

inline std::string trajectory_csv(const Trajectory& traj, const ModelParams& p) {
    std::string out = "t,S,I0,I1,R,D,g0,g1,v0,v1,beta00,beta01,beta11,nu0,mu_crit,Rt0,Rt1,Gt\n";
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        const auto& x = traj.states[k];
        const auto& c = traj.diagnostics[k].coupling;
        const auto r = rt_report(FullState::from_array(x), p);
        out += fmt(traj.times[k]);
        for (double v : x) out += "," + fmt(v);
        out += "," + fmt(c.beta00) + "," + fmt(c.beta01) + "," + fmt(c.beta11) + "," + fmt(c.nu0);
        out += "," + fmt(c.mu_crit) + "," + fmt(r.Rt0) + "," + fmt(r.Rt1) + "," + fmt(r.Gt) + "\n";
    }
    return out;
}

inline json events_json(const Trajectory& traj) {
    json ev = json::array();
    for (const auto& e : traj.events) {
        json j{{"t", e.t}, {"kind", to_string(e.kind)}};
        if (e.kind == EventKind::Clamp) {
            j["component"] = std::string(kStateNames[static_cast<std::size_t>(e.component)]);
            j["value"] = e.value;
        }
        ev.push_back(std::move(j));
    }
    return json{{"events", ev},
                {"stop_reason", to_string(traj.stop_reason)},
                {"accepted_steps", traj.accepted_steps},
                {"rejected_steps", traj.rejected_steps},
                {"max_macro_drift", traj.max_macro_drift},
                {"max_micro_drift", traj.max_micro_drift},
                {"clamp_mass", traj.clamp_mass},
                {"final_derivative_norm", traj.final_derivative_norm},
                {"settle_time", traj.settle_time ? json(*traj.settle_time) : json(nullptr)}};
}

// ---------------------------------------------------------------- equilibria

inline json to_json(const MacroState& m) {
    return json{{"S", m.S}, {"I0", m.I0}, {"I1", m.I1}, {"R", m.R}, {"D", m.D}};
}

inline json to_json(const MicroState& m) { return json{{"g0", m.g0}, {"g1", m.g1}, {"v0", m.v0}, {"v1", m.v1}}; }

inline json to_json(const CouplingSnapshot& c) {
    return json{{"nu0", c.nu0},       {"nu1", c.nu1},         {"f0_eff", c.f0_eff},
                {"f1_eff", c.f1_eff}, {"beta00", c.beta00},   {"beta01", c.beta01},
                {"beta11", c.beta11}, {"mu_crit", c.mu_crit ? json(*c.mu_crit) : json(nullptr)}};
}

inline json to_json(const Condition& c) { return json{{"name", c.name}, {"satisfied", c.satisfied}, {"margin", c.margin}}; }

inline json to_json(const EquilibriumPoint& e) {
    json cert = json::array();
    for (const auto& c : e.certificate) cert.push_back(to_json(c));
    json fp = json::object();
    for (const auto& [k, v] : e.free_params) fp[k] = v;
    return json{{"class", to_string(e.cls)}, {"branch", e.branch},        {"macro", to_json(e.macro)},
                {"micro", to_json(e.micro)}, {"snapshot", to_json(e.snapshot)}, {"free_params", fp},
                {"residual", e.residual},    {"certificate", cert}};
}

inline json to_json(const Spectrum& s) {
    json ev = json::array();
    for (const auto& l : s.eigenvalues) ev.push_back(json::array({l.real(), l.imag()}));
    return json{{"eigenvalues", ev},
                {"zero_tol", s.zero_tol},
                {"n_unstable", s.n_unstable},
                {"n_center", s.n_center},
                {"n_stable", s.n_stable}};
}

inline json to_json(const EquilibriumCatalog& c) {
    json nmut = json::array();
    for (const auto& n : c.nmut) {
        json cond = json::array();
        for (const auto& x : n.conditions) cond.push_back(to_json(x));
        json j{{"label", n.label}, {"micro", to_string(n.micro)}, {"feasible", n.feasible}, {"conditions", cond}};
        if (n.point) j["point"] = to_json(*n.point);
        if (n.representative) j["representative"] = true;
        nmut.push_back(std::move(j));
    }
    json cse = json::array();
    for (const auto& e : c.cse) cse.push_back(to_json(e));
    json out{{"dfe_segment", c.dfe_segment}, {"dfe_representative", to_json(c.dfe_representative)}};
    out["nme"] = c.nme ? to_json(*c.nme) : json(nullptr);
    if (c.nme_infeasible) out["nme_infeasible"] = *c.nme_infeasible;
    out["nmut"] = nmut;
    out["cse"] = cse;
    return out;
}

/// One row per spectrum: label, re_1..re_n, im_1..im_n.
inline std::string spectrum_csv_header(std::size_t n, const std::string& label = "param") {
    std::string h = label;
    for (std::size_t i = 1; i <= n; ++i) h += ",re_" + std::to_string(i);
    for (std::size_t i = 1; i <= n; ++i) h += ",im_" + std::to_string(i);
    return h + "\n";
}

inline std::string spectrum_csv_row(const std::string& label, const Spectrum& s) {
    std::string r = label;
    for (const auto& l : s.eigenvalues) r += "," + fmt(l.real());
    for (const auto& l : s.eigenvalues) r += "," + fmt(l.imag());
    return r + "\n";
}

inline std::string cse_families_csv(const CseContinuation& c) {
    std::string out = "pi1,family,rho,S,I0,I1,R,D,g0,g1,v0,v1\n";
    for (const auto& fam : c.families)
        for (std::size_t k = 0; k < fam.points.size(); ++k) {
            const auto& e = fam.points[k];
            out += fmt(fam.pi1[k]) + "," + fam.tag + "," + fmt(e.free_params.at("rho"));
            for (double v : e.state().to_array()) out += "," + fmt(v);
            out += "\n";
        }
    return out;
}

// ---------------------------------------------------------------- sweep

inline std::string sweep_csv(const SweepGrid& g) {
    std::string out = g.spec.x.param + "," + g.spec.y.param + ",class";
    for (auto n : kStateNames) out += "," + std::string(n);
    out += ",settle_time,t_end,reason\n";
    for (const auto& c : g.cells) {
        out += fmt(c.x) + "," + fmt(c.y) + "," + to_string(c.cls);
        for (double v : c.final_state) out += "," + fmt(v);
        std::string reason = c.reason;
        std::replace(reason.begin(), reason.end(), ',', ';');
        std::replace(reason.begin(), reason.end(), '\n', ' ');
        out += "," + fmt(c.settle_time) + "," + fmt(c.t_end) + "," + reason + "\n";
    }
    return out;
}

inline json sweep_sidecar(const SweepGrid& g, const Scenario& sc) {
    json counts = json::object();
    for (auto cls : {EndpointClass::DFE, EndpointClass::NME, EndpointClass::NmutE, EndpointClass::CSE,
                     EndpointClass::Unresolved}) {
        counts[to_string(cls)] =
            std::count_if(g.cells.begin(), g.cells.end(), [cls](const SweepCell& c) { return c.cls == cls; });
    }
    json clamps = json::array();
    for (const auto& c : g.cells) clamps.push_back(c.clamp_events);
    return json{{"tool_version", std::string(kVersion)},
                {"scenario", sc.name},
                {"params", to_json(sc.params)},
                {"initial", to_json(sc.initial)},
                {"notes", sc.notes},
                {"grid", to_json(g.spec)},
                {"class_counts", counts},
                {"clamp_events_per_cell", clamps}};
}

} // namespace qsmulti::io
