#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "qsmulti/coupling.hpp"
#include "qsmulti/model.hpp"
#include "qsmulti/types.hpp"

namespace qsmulti {

struct IntegrationOptions {
    double rtol = 1e-9;
    double atol = 1e-12;
    double t_max = 5000.0;
    double clamp_threshold = 1e-14;
    long max_steps = 20'000'000;
    double settle_norm = 1e-10;
    double settle_duration = 50.0;
    /// Stop as soon as the settle condition has held for settle_duration.
    bool stop_on_settle = true;
    /// Keep every n-th accepted step (the first and last states are always kept); 0 keeps only those two.
    long record_every = 1;

    void validate() const {
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(name, "must be > 0");
        };
        positive(rtol, "rtol");
        positive(atol, "atol");
        positive(t_max, "t_max");
        positive(clamp_threshold, "clamp_threshold");
        if (max_steps <= 0) throw ValidationError("max_steps", "must be > 0");
        positive(settle_norm, "settle_norm");
        positive(settle_duration, "settle_duration");
        if (record_every < 0) throw ValidationError("record_every", "must be >= 0");
    }
};

enum class EventKind { Clamp, Settled, Budget, Horizon };

inline const char* to_string(EventKind k) {
    switch (k) {
    case EventKind::Clamp: return "Clamp";
    case EventKind::Settled: return "Settled";
    case EventKind::Budget: return "Budget";
    case EventKind::Horizon: return "Horizon";
    }
    return "?";
}

struct Event {
    double t = 0.0;
    EventKind kind = EventKind::Clamp;
    /// State index for Clamp events.
    int component = -1;
    /// Value that was replaced by zero (Clamp only).
    double value = 0.0;
};

struct SampleDiagnostics {
    double macro_drift = 0.0; ///< S+I0+I1+R+D - 1
    double micro_drift = 0.0; ///< g0+g1 - 1
    CouplingSnapshot coupling;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<StateVector> states;
    std::vector<SampleDiagnostics> diagnostics;
    std::vector<Event> events;

    EventKind stop_reason = EventKind::Horizon;
    double settle_norm = 1e-10;
    /// Derivative norm at the last state.
    double final_derivative_norm = std::numeric_limits<double>::infinity();
    /// Start of the window over which the settle condition held, if it was reached.
    std::optional<double> settle_time;
    /// Maxima over every accepted step, recorded or not.
    double max_macro_drift = 0.0;
    double max_micro_drift = 0.0;
    double clamp_mass = 0.0;
    long accepted_steps = 0;
    long rejected_steps = 0;

    bool empty() const noexcept { return times.empty(); }
    const StateVector& final_state() const { return states.back(); }
    double final_time() const { return times.back(); }
    bool settled() const noexcept { return stop_reason == EventKind::Settled; }

    std::size_t count(EventKind k) const {
        return static_cast<std::size_t>(std::count_if(events.begin(), events.end(), [k](const Event& e) { return e.kind == k; }));
    }
};

/// Step-size underflow. Carries the last accepted state.
class StiffnessError : public NumericError {
public:
    StiffnessError(const std::string& what, double t, StateVector last)
        : NumericError(what), t_(t), last_(last) {}
    double time() const noexcept { return t_; }
    const StateVector& last_state() const noexcept { return last_; }

private:
    double t_;
    StateVector last_;
};

namespace detail {

// Dormand-Prince 5(4) tableau.
struct DoPri {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                            a76 = 11.0 / 84;
    // Difference between 5th and embedded 4th order weights.
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
};

inline SampleDiagnostics diagnose(const StateVector& x, const ModelParams& p) {
    SampleDiagnostics d;
    d.macro_drift = x[idx::S] + x[idx::I0] + x[idx::I1] + x[idx::R] + x[idx::D] - 1.0;
    d.micro_drift = x[idx::g0] + x[idx::g1] - 1.0;
    d.coupling = coupling_snapshot(p, FullState::from_array(x));
    return d;
}

/// Upper bound on the spectral radius of the linearisation with prevalence
/// held fixed: exact for the fast layer (genome 2x2 block, virion decay),
/// row-sum bound for the slow layer.
inline double stiffness_bound(const StateVector& x, const ModelParams& p) {
    const auto nu = prevalence_unchecked(std::max(x[idx::I0], 0.0), std::max(x[idx::I1], 0.0));
    const double f0e = p.f0 * nu.nu0, f1e = p.f1 * nu.nu1;
    const double g0 = x[idx::g0], g1 = x[idx::g1];
    const double phi = f0e * g0 + f1e * g1;
    const double j00 = f0e * (1.0 - p.mu) - phi - g0 * f0e, j01 = -g0 * f1e;
    const double j10 = f0e * p.mu - g1 * f0e, j11 = f1e - phi - g1 * f1e;
    const double tr = j00 + j11, det = j00 * j11 - j01 * j10;
    const double disc = tr * tr - 4.0 * det;
    const double genome = disc >= 0.0 ? 0.5 * (std::abs(tr) + std::sqrt(disc)) : std::sqrt(std::max(det, 0.0));
    const double fast = std::max({genome, p.gamma0, p.gamma1}) / p.epsilon;
    const double slow = 2.0 * (p.a0 + 2.0 * p.a1) + p.pi0 + p.pi1 + p.delta0 + p.delta1 + 2.0 * p.chi;
    return std::max({fast, slow, 1e-300});
}

inline bool all_finite(const StateVector& x) {
    return std::all_of(x.begin(), x.end(), [](double c) { return std::isfinite(c); });
}

} // namespace detail

/// Adaptive Dormand-Prince 5(4) integration with PI step control, extinction
/// clamping after accepted steps and settle (endpoint) detection.
inline Trajectory integrate(const ModelParams& p, const FullState& s0, const IntegrationOptions& opts = {}) {
    using detail::DoPri;
    p.validate();
    s0.validate();
    opts.validate();

    constexpr std::size_t n = kStateDim;
    Trajectory traj;
    traj.settle_norm = opts.settle_norm;

    StateVector y = s0.to_array();
    double t = 0.0;

    auto record = [&](double tt, const StateVector& state) {
        traj.times.push_back(tt);
        traj.states.push_back(state);
        traj.diagnostics.push_back(detail::diagnose(state, p));
    };
    auto track_drift = [&](const StateVector& state) {
        const auto d = detail::diagnose(state, p);
        traj.max_macro_drift = std::max(traj.max_macro_drift, std::abs(d.macro_drift));
        traj.max_micro_drift = std::max(traj.max_micro_drift, std::abs(d.micro_drift));
    };

    record(t, y);
    track_drift(y);

    StateVector k1 = rhs_full(y, p);
    auto weight = [&](std::size_t i, const StateVector& a, const StateVector& b) {
        return opts.atol + opts.rtol * std::max(std::abs(a[i]), std::abs(b[i]));
    };

    // Initial step guess (Hairer-Norsett-Wanner).
    double h;
    {
        double d0 = 0.0, d1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double sc = opts.atol + opts.rtol * std::abs(y[i]);
            d0 += (y[i] / sc) * (y[i] / sc);
            d1 += (k1[i] / sc) * (k1[i] / sc);
        }
        d0 = std::sqrt(d0 / n);
        d1 = std::sqrt(d1 / n);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min(h0, opts.t_max);
        StateVector y1;
        for (std::size_t i = 0; i < n; ++i) y1[i] = y[i] + h0 * k1[i];
        const StateVector f1 = detail::rhs_raw(y1, p);
        double d2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double sc = opts.atol + opts.rtol * std::abs(y[i]);
            d2 += ((f1[i] - k1[i]) / sc) * ((f1[i] - k1[i]) / sc);
        }
        d2 = std::sqrt(d2 / n) / h0;
        const double dm = std::max(d1, d2);
        const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
        h = std::min(100.0 * h0, h1);
    }

    constexpr double beta = 0.04;
    constexpr double expo1 = 0.2 - beta * 0.75;
    constexpr double safe = 0.9;
    constexpr double fac_min = 0.2; // largest shrink is 1/fac_max
    constexpr double fac_max = 10.0;
    double err_old = 1e-4;
    bool last_rejected = false;

    double settle_start = -1.0;
    long step_counter = 0;
    StateVector k2, k3, k4, k5, k6, k7, ytmp, ynew;
    // Steps are kept inside the real stability interval of the pair; without
    // this the fast layer hovers at the stability edge and its derivative
    // never settles.
    constexpr double stability_cap = 2.5;

    while (t < opts.t_max) {
        if (traj.accepted_steps + traj.rejected_steps >= opts.max_steps) {
            traj.stop_reason = EventKind::Budget;
            traj.events.push_back({t, EventKind::Budget, -1, 0.0});
            break;
        }
        if (t + h > opts.t_max) h = opts.t_max - t;
        if (h < 1e-14 * std::max(1.0, std::abs(t)))
            throw StiffnessError("integrate: step size underflow at t = " + std::to_string(t), t, y);

        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * DoPri::a21 * k1[i];
        k2 = detail::rhs_raw(ytmp, p);
        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * (DoPri::a31 * k1[i] + DoPri::a32 * k2[i]);
        k3 = detail::rhs_raw(ytmp, p);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (DoPri::a41 * k1[i] + DoPri::a42 * k2[i] + DoPri::a43 * k3[i]);
        k4 = detail::rhs_raw(ytmp, p);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (DoPri::a51 * k1[i] + DoPri::a52 * k2[i] + DoPri::a53 * k3[i] + DoPri::a54 * k4[i]);
        k5 = detail::rhs_raw(ytmp, p);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (DoPri::a61 * k1[i] + DoPri::a62 * k2[i] + DoPri::a63 * k3[i] + DoPri::a64 * k4[i] +
                                  DoPri::a65 * k5[i]);
        k6 = detail::rhs_raw(ytmp, p);
        for (std::size_t i = 0; i < n; ++i)
            ynew[i] = y[i] + h * (DoPri::a71 * k1[i] + DoPri::a73 * k3[i] + DoPri::a74 * k4[i] + DoPri::a75 * k5[i] +
                                  DoPri::a76 * k6[i]);
        k7 = detail::rhs_raw(ynew, p);

        double err = 0.0;
        bool finite = detail::all_finite(ynew) && detail::all_finite(k7);
        if (finite) {
            for (std::size_t i = 0; i < n; ++i) {
                const double e = h * (DoPri::e1 * k1[i] + DoPri::e3 * k3[i] + DoPri::e4 * k4[i] + DoPri::e5 * k5[i] +
                                      DoPri::e6 * k6[i] + DoPri::e7 * k7[i]);
                const double r = e / weight(i, y, ynew);
                err += r * r;
            }
            err = std::sqrt(err / n);
        }
        if (!finite || !std::isfinite(err)) {
            // A non-finite trial is treated as a failed step; only a non-finite
            // accepted state is fatal.
            if (!detail::all_finite(y)) throw NumericError("integrate: non-finite state");
            h *= 0.25;
            ++traj.rejected_steps;
            last_rejected = true;
            continue;
        }

        if (err <= 1.0) {
            const double fac11 = std::pow(std::max(err, 1e-16), expo1);
            double fac = fac11 / std::pow(err_old, beta) / safe;
            fac = std::clamp(fac, 1.0 / fac_max, 1.0 / fac_min);
            double h_next = h / fac;
            if (last_rejected) h_next = std::min(h_next, h);
            err_old = std::max(err, 1e-4);

            t += h;
            y = ynew;
            k1 = k7;
            ++traj.accepted_steps;
            last_rejected = false;

            bool clamped = false;
            for (std::size_t i = 0; i < n; ++i) {
                if (y[i] != 0.0 && y[i] < opts.clamp_threshold) {
                    traj.events.push_back({t, EventKind::Clamp, static_cast<int>(i), y[i]});
                    traj.clamp_mass += std::abs(y[i]);
                    y[i] = 0.0;
                    clamped = true;
                }
            }
            if (!detail::all_finite(y)) throw NumericError("integrate: non-finite state");
            if (clamped) k1 = detail::rhs_raw(y, p);
            h_next = std::min(h_next, stability_cap / detail::stiffness_bound(y, p));

            track_drift(y);
            ++step_counter;
            const bool at_end = t >= opts.t_max;
            if ((opts.record_every > 0 && step_counter % opts.record_every == 0) || at_end) record(t, y);

            const double dnorm = norm2(k1);
            traj.final_derivative_norm = dnorm;
            if (dnorm < opts.settle_norm) {
                if (settle_start < 0.0) settle_start = t;
                if (t - settle_start >= opts.settle_duration) {
                    if (!traj.settle_time) {
                        traj.settle_time = settle_start;
                        traj.events.push_back({t, EventKind::Settled, -1, 0.0});
                    }
                    if (opts.stop_on_settle) {
                        traj.stop_reason = EventKind::Settled;
                        if (traj.times.back() != t) record(t, y);
                        break;
                    }
                }
            } else {
                settle_start = -1.0;
            }
            h = h_next;
        } else {
            const double fac11 = std::pow(err, expo1);
            h /= std::min(1.0 / fac_min, fac11 / safe);
            ++traj.rejected_steps;
            last_rejected = true;
        }
    }

    if (traj.stop_reason == EventKind::Horizon && t >= opts.t_max) {
        if (traj.settle_time) traj.stop_reason = EventKind::Settled;
        traj.events.push_back({t, EventKind::Horizon, -1, 0.0});
    }
    if (traj.times.back() != t) record(t, y);
    traj.final_derivative_norm = norm2(detail::rhs_raw(y, p));
    return traj;
}

enum class EndpointClass { DFE, NME, NmutE, CSE, Unresolved };

inline const char* to_string(EndpointClass c) {
    switch (c) {
    case EndpointClass::DFE: return "DFE";
    case EndpointClass::NME: return "NME";
    case EndpointClass::NmutE: return "NmutE";
    case EndpointClass::CSE: return "CSE";
    case EndpointClass::Unresolved: return "Unresolved";
    }
    return "?";
}

inline constexpr double kEndpointThreshold = 1e-8;

/// Classify the omega-limit from the infected-compartment signature of the final state.
inline EndpointClass detect_endpoint(const Trajectory& traj, const ModelParams& p, double eta = kEndpointThreshold) {
    if (traj.empty()) throw ValidationError("trajectory", "empty trajectory");
    (void)p;
    const auto& x = traj.final_state();
    const bool has0 = x[idx::I0] > eta;
    const bool has1 = x[idx::I1] > eta;
    if (!has0 && !has1) return EndpointClass::DFE;
    if (!has0 && has1) return EndpointClass::NME;
    if (has0 && !has1) return EndpointClass::NmutE;
    if (traj.final_derivative_norm < traj.settle_norm) return EndpointClass::CSE;
    return EndpointClass::Unresolved;
}

} // namespace qsmulti
