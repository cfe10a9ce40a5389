#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "qsmulti/integrator.hpp"
#include "qsmulti/reproduction.hpp"
#include "qsmulti/types.hpp"

namespace qsmulti {

inline constexpr double kPrincipalSeed = 1e-4;

/// (1 - 1e-4, 1e-4, 0, 0, 0) x (1, 0, 0, 0): a master-strain seed in a susceptible population.
inline FullState principal_initial_state() {
    return {{1.0 - kPrincipalSeed, kPrincipalSeed, 0.0, 0.0, 0.0}, {1.0, 0.0, 0.0, 0.0}};
}

struct Scenario {
    std::string name = "custom";
    ModelParams params;
    FullState initial = principal_initial_state();
    std::map<std::string, double> overrides;
    std::vector<std::string> notes;

    /// Sets a parameter or an initial-state component by name.
    void set(const std::string& key, double value) {
        if (ModelParams::has_field(key)) {
            params.set(key, value);
        } else if (auto i = state_index(key)) {
            auto x = initial.to_array();
            x[*i] = value;
            initial = FullState::from_array(x);
        } else {
            throw ValidationError(key, "unknown parameter or state component");
        }
        overrides[key] = value;
    }

    void validate() const {
        params.validate();
        initial.validate();
    }
};

/// Vaccine-like case: mutant strain with a strong cross-transmission term.
inline ModelParams case1_params() {
    ModelParams p;
    p.chi = 2.0;
    p.pi0 = 0.5;
    p.f0 = 1.0;
    p.xi0 = 2.0;
    p.gamma0 = 0.8;
    p.a0 = 4.0;
    p.b0 = 0.1;
    p.xi1 = 1.0;
    p.gamma1 = 0.5;
    p.b1 = 0.1;
    p.delta0 = p.delta1 = 0.0;
    p.epsilon = 0.01;
    p.a1 = 6.0;
    p.f1 = 0.2;
    p.mu = 0.675;
    p.pi1 = 1.0;
    return p;
}

/// Burnout case: the mutant strain is lethal (delta1 > 0).
inline ModelParams case2_params() {
    ModelParams p;
    p.chi = 2.0;
    p.delta0 = 0.0;
    p.delta1 = 1.0;
    p.pi0 = p.pi1 = 0.2;
    p.a0 = 2.0;
    p.a1 = 3.0;
    p.b0 = p.b1 = 0.5;
    p.f0 = 1.0;
    p.f1 = 0.1;
    p.gamma0 = p.gamma1 = 0.5;
    p.xi0 = p.xi1 = 3.0;
    p.epsilon = 0.01;
    p.mu = 0.44;
    return p;
}

inline Scenario scenario_preset(std::string_view name) {
    Scenario s;
    if (name == "case1" || name == "case1_vaccine_like") {
        s.name = "case1_vaccine_like";
        s.params = case1_params();
        s.notes.push_back("pi1 is not fixed by the case-1 set; preset default pi1 = 1");
    } else if (name == "case2" || name == "case2_burnout") {
        s.name = "case2_burnout";
        s.params = case2_params();
        s.notes.push_back("gamma0 listed as both 0.5 and 0.8 for case 2; gamma0 = gamma1 = 0.5 adopted");
        s.notes.push_back("mu is not fixed by the case-2 set; preset default mu = 0.44");
    } else if (name == "custom") {
        s.name = "custom";
    } else {
        throw ValidationError("scenario", "unknown scenario '" + std::string(name) + "'");
    }
    return s;
}

struct ScenarioRun {
    Trajectory trajectory;
    std::vector<ReproductionReport> reproduction;
    EndpointClass endpoint = EndpointClass::Unresolved;
};

/// Integrates a scenario and evaluates reproduction diagnostics at every sample.
inline ScenarioRun run_scenario(const Scenario& sc, const IntegrationOptions& opts) {
    sc.validate();
    ScenarioRun run;
    try {
        run.trajectory = integrate(sc.params, sc.initial, opts);
    } catch (const StiffnessError& e) {
        throw StiffnessError("scenario " + sc.name + ": " + e.what(), e.time(), e.last_state());
    } catch (const NumericError& e) {
        throw NumericError("scenario " + sc.name + ": " + e.what());
    }
    run.reproduction.reserve(run.trajectory.states.size());
    for (const auto& x : run.trajectory.states) run.reproduction.push_back(rt_report(FullState::from_array(x), sc.params));
    run.endpoint = detect_endpoint(run.trajectory, sc.params);
    return run;
}

// ---------------------------------------------------------------- grids

struct AxisSpec {
    std::string param;
    double min = 0.0, max = 1.0;
    int count = 1;
    bool log_scale = false;

    void validate() const {
        if (!ModelParams::has_field(param)) throw ValidationError("sweep.axis.param", "unknown parameter '" + param + "'");
        if (count < 1) throw ValidationError("sweep.axis.count", "must be >= 1");
        if (!std::isfinite(min) || !std::isfinite(max) || max < min)
            throw ValidationError("sweep.axis.range", "need finite min <= max");
        if (log_scale && !(min > 0.0)) throw ValidationError("sweep.axis.min", "log scale needs min > 0");
    }

    std::vector<double> values() const {
        validate();
        std::vector<double> v(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i) {
            const double u = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
            v[static_cast<std::size_t>(i)] =
                log_scale ? std::exp(std::log(min) + u * (std::log(max) - std::log(min))) : min + u * (max - min);
        }
        return v;
    }
};

struct SweepSpec {
    AxisSpec x{"pi1", 0.5, 10.0, 50, false};
    AxisSpec y{"mu", 0.02, 0.98, 50, false};
};

struct SweepCell {
    double x = 0.0, y = 0.0;
    EndpointClass cls = EndpointClass::Unresolved;
    StateVector final_state{};
    std::optional<double> settle_time;
    double t_end = 0.0;
    std::size_t clamp_events = 0;
    std::string reason;
};

struct SweepGrid {
    SweepSpec spec;
    std::vector<double> xs, ys;
    /// Row-major with y as the outer index.
    std::vector<SweepCell> cells;

    const SweepCell& at(std::size_t ix, std::size_t iy) const { return cells[iy * xs.size() + ix]; }
};

inline SweepCell run_cell(const Scenario& sc, const SweepSpec& spec, double x, double y, const IntegrationOptions& opts) {
    SweepCell c;
    c.x = x;
    c.y = y;
    try {
        ModelParams p = sc.params;
        p.set(spec.x.param, x);
        p.set(spec.y.param, y);
        p.validate();
        IntegrationOptions o = opts;
        o.record_every = 0;
        const auto traj = integrate(p, sc.initial, o);
        c.final_state = traj.final_state();
        c.settle_time = traj.settle_time;
        c.t_end = traj.final_time();
        c.clamp_events = traj.count(EventKind::Clamp);
        c.cls = detect_endpoint(traj, p);
        if (traj.stop_reason == EventKind::Budget) c.reason = "step budget exhausted";
    } catch (const std::exception& e) {
        c.cls = EndpointClass::Unresolved;
        c.reason = e.what();
    }
    return c;
}

/// Classifies the endpoint of every cell. Cells are independent; results are
/// stored by index so the output does not depend on the thread count.
inline SweepGrid sweep(const Scenario& sc, const SweepSpec& spec, const IntegrationOptions& opts, unsigned threads = 1) {
    sc.validate();
    opts.validate();
    SweepGrid g;
    g.spec = spec;
    g.xs = spec.x.values();
    g.ys = spec.y.values();
    const std::size_t n = g.xs.size() * g.ys.size();
    g.cells.resize(n);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < n; k = next++) {
            const std::size_t ix = k % g.xs.size(), iy = k / g.xs.size();
            g.cells[k] = run_cell(sc, spec, g.xs[ix], g.ys[iy], opts);
        }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return g;
}

} // namespace qsmulti
