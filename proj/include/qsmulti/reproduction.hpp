#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include "qsmulti/coupling.hpp"
#include "qsmulti/integrator.hpp"
#include "qsmulti/types.hpp"

namespace qsmulti {

/// Basic reproduction number at the disease-free state with master load v0.
/// Cross and mutant transmission vanish there because the prevalence is (0,0).
inline double r0(const ModelParams& p, double v0_init) {
    if (!(p.pi0 + p.delta0 > 0.0)) throw DomainError("r0: pi0 + delta0 must be > 0");
    if (!(v0_init >= 0.0)) throw DomainError("r0: v0 must be >= 0");
    return detail::saturating(p.a0, p.b0, v0_init) / (p.pi0 + p.delta0);
}

/// R0 at the disease-free point with genome frequency g0* (virions at their quasi-steady value).
inline double r0_dfe(const ModelParams& p, double g0_star) {
    if (!(g0_star >= 0.0 && g0_star <= 1.0)) throw DomainError("r0_dfe: g0_star must lie in [0,1]");
    return r0(p, p.xi0 * g0_star / p.gamma0);
}

/// Next-generation matrix K = F V^-1 for infected classes (I0, I1) at a
/// fully susceptible population with prevalence nu and loads (v0, v1).
struct NextGeneration {
    double k00 = 0.0, k01 = 0.0, k10 = 0.0, k11 = 0.0;
    /// Spectral radius max{beta00/(pi0+delta0), beta11/(pi1+delta1)}; K is lower triangular.
    double spectral_radius = 0.0;
};

inline NextGeneration two_strain_ngm(const ModelParams& p, Prevalence nu, double v0, double v1) {
    const double o0 = p.pi0 + p.delta0, o1 = p.pi1 + p.delta1;
    if (!(o0 > 0.0) || !(o1 > 0.0)) throw DomainError("two_strain_ngm: pi_i + delta_i must be > 0");
    const auto b = transmission_rates(p, nu, v0, v1);
    NextGeneration k;
    k.k00 = b.beta00 / o0;
    k.k10 = b.beta01 / o0;
    k.k11 = b.beta11 / o1;
    k.spectral_radius = std::max(k.k00, k.k11);
    return k;
}

struct ReproductionReport {
    double R0 = 0.0;
    std::optional<double> Rt0, Rt1;
    std::optional<double> Rt1_standalone;
    double Gt = 0.0;
    double O0 = 0.0, O1 = 0.0;
    /// Direct evaluation of new infections minus outflow, d(I0+I1)/dt.
    double Gt_direct = 0.0;
};

inline ReproductionReport rt_report(const FullState& s, const ModelParams& p) {
    const auto& m = s.macro;
    const auto nu = detail::prevalence_unchecked(std::max(m.I0, 0.0), std::max(m.I1, 0.0));
    const double v0 = std::max(s.micro.v0, 0.0), v1 = std::max(s.micro.v1, 0.0);
    const auto b = transmission_rates(p, nu, v0, v1);
    const double o0 = p.pi0 + p.delta0, o1 = p.pi1 + p.delta1;

    ReproductionReport r;
    r.R0 = o0 > 0.0 ? b.beta00 / o0 : std::numeric_limits<double>::infinity();
    r.O0 = o0 * m.I0;
    r.O1 = o1 * m.I1;
    if (m.I0 > 0.0 && o0 > 0.0) r.Rt0 = b.beta00 * m.S / o0;
    if (o1 > 0.0) {
        r.Rt1_standalone = b.beta11 * m.S / o1;
        if (m.I1 > 0.0) r.Rt1 = (b.beta01 * m.I0 / m.I1 + b.beta11) * m.S / o1;
    }
    r.Gt = (r.Rt0 ? r.O0 * (*r.Rt0 - 1.0) : 0.0) + (r.Rt1 ? r.O1 * (*r.Rt1 - 1.0) : 0.0);
    // With I1 = 0, Rt1 is undefined but cross-infection still seeds strain 1.
    if (!r.Rt1) r.Gt += b.beta01 * m.I0 * m.S;
    r.Gt_direct = (b.beta00 * m.I0 + b.beta01 * m.I0 + b.beta11 * m.I1) * m.S - r.O0 - r.O1;
    return r;
}

/// Testable part of the next-generation assumptions: in the disease-free
/// subsystem R decays to 0 (when chi > 0) and D stays constant.
struct DiseaseFreeCheck {
    bool r_decays = false;
    bool d_constant = false;
    double R_end = 0.0;
    double D_drift = 0.0;
};

inline DiseaseFreeCheck disease_free_subsystem_check(const ModelParams& p, double S, double R, double D,
                                                     double t_end = 50.0) {
    IntegrationOptions o;
    o.t_max = t_end;
    o.stop_on_settle = false;
    o.record_every = 0;
    FullState s0{{S, 0.0, 0.0, R, D}, {1.0, 0.0, p.xi0 / p.gamma0, 0.0}};
    const auto traj = integrate(p, s0, o);
    const auto& x = traj.final_state();
    DiseaseFreeCheck c;
    c.R_end = x[idx::R];
    c.D_drift = std::abs(x[idx::D] - D);
    c.r_decays = p.chi > 0.0 ? c.R_end <= R * std::exp(-p.chi * t_end) + 1e-9 : c.R_end == R;
    c.d_constant = c.D_drift <= 1e-12;
    return c;
}

} // namespace qsmulti
