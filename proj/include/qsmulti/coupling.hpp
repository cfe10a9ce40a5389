#pragma once

#include <algorithm>
#include <optional>

#include "qsmulti/types.hpp"

namespace qsmulti {

struct Prevalence {
    double nu0 = 0.0;
    double nu1 = 0.0;
};

struct TransmissionRates {
    double beta00 = 0.0;
    double beta01 = 0.0;
    double beta11 = 0.0;
};

struct EffectiveFitness {
    double f0_eff = 0.0;
    double f1_eff = 0.0;
};

namespace detail {

// No sign checks; used by the right-hand side, which may be probed slightly
// outside the simplex.
inline Prevalence prevalence_unchecked(double I0, double I1) noexcept {
    const double total = I0 + I1;
    if (I0 == 0.0 && I1 == 0.0) return {0.0, 0.0};
    if (total == 0.0) return {0.0, 0.0};
    return {I0 / total, I1 / total};
}

inline double saturating(double a, double b, double load) noexcept {
    if (load == 0.0) return 0.0;
    return a * load / (b + load);
}

} // namespace detail

/// Relative prevalence of each infected class; exactly (0,0) when nobody is infected.
inline Prevalence prevalence(double I0, double I1) {
    if (!(I0 >= 0.0)) throw DomainError("prevalence: I0 must be >= 0");
    if (!(I1 >= 0.0)) throw DomainError("prevalence: I1 must be >= 0");
    return detail::prevalence_unchecked(I0, I1);
}

/// Saturating transmission rates. beta01 and beta11 see the mutant load split
/// between host classes in proportion to nu0 and nu1.
inline TransmissionRates transmission_rates(const ModelParams& p, Prevalence nu, double v0, double v1) {
    if (!(v0 >= 0.0) || !(v1 >= 0.0)) throw DomainError("transmission_rates: virion loads must be >= 0");
    if (!(nu.nu0 >= 0.0 && nu.nu0 <= 1.0) || !(nu.nu1 >= 0.0 && nu.nu1 <= 1.0))
        throw DomainError("transmission_rates: prevalence must lie in [0,1]");
    return {detail::saturating(p.a0, p.b0, v0), detail::saturating(p.a1, p.b1, nu.nu0 * v1),
            detail::saturating(p.a1, p.b1, nu.nu1 * v1)};
}

/// Overload for an infected population, where nu1 = 1 - nu0.
inline TransmissionRates transmission_rates(const ModelParams& p, double nu0, double v0, double v1) {
    return transmission_rates(p, Prevalence{nu0, 1.0 - nu0}, v0, v1);
}

inline EffectiveFitness effective_fitness(const ModelParams& p, Prevalence nu) {
    if (!(nu.nu0 >= 0.0 && nu.nu0 <= 1.0) || !(nu.nu1 >= 0.0 && nu.nu1 <= 1.0))
        throw DomainError("effective_fitness: prevalence must lie in [0,1]");
    return {p.f0 * nu.nu0, p.f1 * nu.nu1};
}

inline EffectiveFitness effective_fitness(const ModelParams& p, double nu0) {
    return effective_fitness(p, Prevalence{nu0, 1.0 - nu0});
}

/// Context-dependent error threshold 1 - (f1/f0)(1/nu0 - 1).
/// Returns nullopt for nu0 = 0; the value may be negative.
inline std::optional<double> critical_mutation(const ModelParams& p, double nu0) {
    if (!(nu0 >= 0.0 && nu0 <= 1.0)) throw DomainError("critical_mutation: nu0 must lie in [0,1]");
    if (nu0 == 0.0) return std::nullopt;
    return 1.0 - (p.f1 / p.f0) * (1.0 / nu0 - 1.0);
}

inline CouplingSnapshot coupling_snapshot(const ModelParams& p, const FullState& s) {
    const auto nu = detail::prevalence_unchecked(std::max(s.macro.I0, 0.0), std::max(s.macro.I1, 0.0));
    const auto beta = transmission_rates(p, nu, std::max(s.micro.v0, 0.0), std::max(s.micro.v1, 0.0));
    const auto fit = effective_fitness(p, nu);
    CouplingSnapshot snap;
    snap.nu0 = nu.nu0;
    snap.nu1 = nu.nu1;
    snap.f0_eff = fit.f0_eff;
    snap.f1_eff = fit.f1_eff;
    snap.beta00 = beta.beta00;
    snap.beta01 = beta.beta01;
    snap.beta11 = beta.beta11;
    if (nu.nu0 > 0.0) snap.mu_crit = critical_mutation(p, nu.nu0);
    return snap;
}

} // namespace qsmulti
