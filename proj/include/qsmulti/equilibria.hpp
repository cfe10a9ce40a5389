#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qsmulti/coupling.hpp"
#include "qsmulti/model.hpp"
#include "qsmulti/types.hpp"

namespace qsmulti {

enum class EquilibriumClass { DFE, NME, NmutE, CSE };

inline const char* to_string(EquilibriumClass c) {
    switch (c) {
    case EquilibriumClass::DFE: return "DFE";
    case EquilibriumClass::NME: return "NME";
    case EquilibriumClass::NmutE: return "NmutE";
    case EquilibriumClass::CSE: return "CSE";
    }
    return "?";
}

struct Condition {
    std::string name;
    bool satisfied = false;
    /// Signed slack; negative when violated.
    double margin = 0.0;
};

inline constexpr double kCertificateResidual = 1e-9;

struct EquilibriumPoint {
    EquilibriumClass cls = EquilibriumClass::DFE;
    /// Branch label within the class (e.g. "i1", "ii3", "generic").
    std::string branch;
    MacroState macro;
    MicroState micro;
    CouplingSnapshot snapshot;
    std::map<std::string, double> free_params;
    std::vector<Condition> certificate;
    double residual = 0.0;

    FullState state() const { return {macro, micro}; }
    bool certified() const {
        return std::all_of(certificate.begin(), certificate.end(), [](const Condition& c) { return c.satisfied; });
    }
};

namespace detail {

inline Condition require(std::string name, double margin, bool strict = false) {
    return {std::move(name), strict ? margin > 0.0 : margin >= 0.0, margin};
}

inline Condition require_zero(std::string name, double value, double tol = 0.0) {
    return {std::move(name), std::abs(value) <= tol, -std::abs(value)};
}

inline MicroState qs_micro(const ModelParams& p, double g0) {
    return {g0, 1.0 - g0, p.xi0 * g0 / p.gamma0, p.xi1 * (1.0 - g0) / p.gamma1};
}

/// Fills snapshot, residual and the universal rhs certificate.
inline EquilibriumPoint finalize(EquilibriumPoint e, const ModelParams& p) {
    const auto x = e.state().to_array();
    e.snapshot = coupling_snapshot(p, e.state());
    e.residual = norm2(rhs_raw(x, p));
    e.certificate.push_back(require("rhs_norm < 1e-9", kCertificateResidual - e.residual, true));
    return e;
}

[[noreturn]] inline void infeasible(const Condition& c) { throw InfeasibleError(c.name, c.margin); }

inline void check_all(const std::vector<Condition>& conds) {
    for (const auto& c : conds)
        if (!c.satisfied) infeasible(c);
}

inline double require_freedom(const std::optional<double>& v, const char* name) {
    if (!v) throw ValidationError(name, "free coordinate required by this equilibrium branch");
    if (!std::isfinite(*v) || *v < 0.0) throw ValidationError(name, "must be finite and >= 0");
    return *v;
}

} // namespace detail

/// Quasi-steady micro state for a macro state with both strains present.
inline MicroState micro_equilibrium(const ModelParams& p, double nu0) {
    if (!(nu0 > 0.0 && nu0 < 1.0)) throw DomainError("micro_equilibrium: nu0 must lie in (0,1)");
    const double mu_c = *critical_mutation(p, nu0);
    if (p.mu < mu_c) return detail::qs_micro(p, 1.0 - p.mu / mu_c);
    return detail::qs_micro(p, 0.0);
}

/// Quasi-steady micro state for the current infected composition; the
/// single-strain ends use their own attracting genome equilibria and the
/// disease-free case keeps the supplied genome frequency.
inline MicroState quasi_steady_micro(const ModelParams& p, double I0, double I1, double g0_if_disease_free) {
    const auto nu = prevalence(I0, I1);
    if (nu.nu0 == 0.0 && nu.nu1 == 0.0) return detail::qs_micro(p, g0_if_disease_free);
    if (nu.nu0 == 1.0) return detail::qs_micro(p, 1.0 - p.mu);
    if (nu.nu0 == 0.0) return detail::qs_micro(p, 0.0);
    return micro_equilibrium(p, nu.nu0);
}

// ---------------------------------------------------------------- DFE

struct DfeFreedoms {
    double S = 1.0;
    double R = 0.0;
    double D = 0.0;
};

inline EquilibriumPoint dfe_point(const ModelParams& p, double g0_star, const DfeFreedoms& f = {}) {
    p.validate();
    if (!(g0_star >= 0.0 && g0_star <= 1.0)) throw DomainError("dfe_point: g0_star must lie in [0,1]");
    std::vector<Condition> conds{
        detail::require("S >= 0", f.S),
        detail::require("R >= 0", f.R),
        detail::require("D >= 0", f.D),
        detail::require_zero("S + R + D = 1", f.S + f.R + f.D - 1.0, kSimplexTol),
    };
    if (p.chi > 0.0) conds.push_back(detail::require_zero("R = 0 when chi > 0", f.R));
    detail::check_all(conds);

    EquilibriumPoint e;
    e.cls = EquilibriumClass::DFE;
    e.branch = p.chi > 0.0 ? "i" : "ii";
    e.macro = {f.S, 0.0, 0.0, f.R, f.D};
    e.micro = detail::qs_micro(p, g0_star);
    e.free_params = {{"g0_star", g0_star}, {"S", f.S}, {"D", f.D}};
    if (p.chi == 0.0) e.free_params["R"] = f.R;
    e.certificate = std::move(conds);
    return detail::finalize(std::move(e), p);
}

// ---------------------------------------------------------------- NME

enum class NmeMicro { MutantOnly, MasterOnly };

struct NmeFreedoms {
    NmeMicro micro = NmeMicro::MutantOnly;
    /// Deceased fraction (generic branch).
    double D = 0.0;
    /// Free coordinates of the degenerate branches.
    std::optional<double> S, I1, R;
};

/// beta11 at the mutant-only micro state with all infections in class 1.
inline double nme_beta11(const ModelParams& p) {
    return detail::saturating(p.a1, p.b1, p.xi1 / p.gamma1);
}

inline EquilibriumPoint nme_point(const ModelParams& p, const NmeFreedoms& f = {}) {
    p.validate();
    EquilibriumPoint e;
    e.cls = EquilibriumClass::NME;
    e.micro = f.micro == NmeMicro::MutantOnly ? detail::qs_micro(p, 0.0) : detail::qs_micro(p, 1.0);
    const double beta11 = detail::saturating(p.a1, p.b1, e.micro.v1);
    e.free_params["micro_master_only"] = f.micro == NmeMicro::MasterOnly ? 1.0 : 0.0;

    std::vector<Condition> conds{detail::require_zero("delta1 = 0", p.delta1)};
    detail::check_all(conds);

    if (p.chi > 0.0 && beta11 > 0.0) {
        e.branch = "i1";
        conds.push_back(detail::require("pi1 < beta11", beta11 - p.pi1, true));
        conds.push_back(detail::require("D >= 0", f.D));
        detail::check_all(conds);
        const double S = p.pi1 / beta11;
        const double I1 = (1.0 - f.D - S) / (1.0 + p.pi1 / p.chi);
        conds.push_back(detail::require("I1 > 0", I1, true));
        detail::check_all(conds);
        e.macro = {S, 0.0, I1, p.pi1 / p.chi * I1, f.D};
        e.free_params["D"] = f.D;
    } else {
        conds.push_back(detail::require_zero("pi1 = 0", p.pi1));
        detail::check_all(conds);
        const double I1 = detail::require_freedom(f.I1, "I1");
        conds.push_back(detail::require("I1 > 0", I1, true));
        e.free_params["I1"] = I1;
        double S = 0.0, R = 0.0;
        if (p.chi > 0.0) {
            e.branch = "i2";
            S = detail::require_freedom(f.S, "S");
            e.free_params["S"] = S;
        } else if (beta11 > 0.0) {
            e.branch = "ii1";
            R = detail::require_freedom(f.R, "R");
            e.free_params["R"] = R;
        } else {
            e.branch = "ii2";
            S = detail::require_freedom(f.S, "S");
            R = detail::require_freedom(f.R, "R");
            e.free_params["S"] = S;
            e.free_params["R"] = R;
        }
        const double D = 1.0 - S - I1 - R;
        conds.push_back(detail::require("D >= 0", D + kSimplexTol));
        detail::check_all(conds);
        e.macro = {S, 0.0, I1, R, std::max(D, 0.0)};
    }
    e.certificate = std::move(conds);
    return detail::finalize(std::move(e), p);
}

// ---------------------------------------------------------------- NmutE

enum class NmutMicro { Mutant, Mu };

inline const char* to_string(NmutMicro m) { return m == NmutMicro::Mutant ? "QS1" : "QSmu"; }

struct NmutFreedoms {
    std::optional<double> S, I0, R;
};

struct NmutCase {
    std::string label; ///< i1..i4, ii1..ii4
    NmutMicro micro = NmutMicro::Mu;
    bool feasible = false;
    std::vector<Condition> conditions;
    std::optional<EquilibriumPoint> point;
    /// True when a free coordinate was not supplied and the midpoint of its admissible range was used.
    bool representative = false;
};

/// Enumerates the single-master-strain equilibrium branches for both admissible
/// micro states. Infeasibility is reported per case, never thrown.
inline std::vector<NmutCase> nmut_cases(const ModelParams& p, const NmutFreedoms& f = {}) {
    p.validate();
    std::vector<NmutCase> out;
    const double mid_tol = kSimplexTol;
    for (auto m : {NmutMicro::Mutant, NmutMicro::Mu}) {
        const MicroState micro = m == NmutMicro::Mutant ? detail::qs_micro(p, 0.0) : detail::qs_micro(p, 1.0 - p.mu);
        const double b00 = detail::saturating(p.a0, p.b0, micro.v0);
        const double b01 = detail::saturating(p.a1, p.b1, micro.v1);
        for (int chi_case = 0; chi_case < 2; ++chi_case) {
            for (int k = 1; k <= 4; ++k) {
                NmutCase c;
                c.micro = m;
                c.label = std::string(chi_case == 0 ? "i" : "ii") + std::to_string(k);
                const bool want00 = (k == 2 || k == 3), want01 = (k == 1 || k == 3);
                auto& conds = c.conditions;
                conds.push_back(detail::require_zero("delta0 = 0", p.delta0));
                if (chi_case == 0) conds.push_back(detail::require("chi > 0", p.chi, true));
                else conds.push_back(detail::require_zero("chi = 0", p.chi));
                if (m == NmutMicro::Mu) conds.push_back(detail::require("mu < 1", 1.0 - p.mu, true));
                conds.push_back(want00 ? detail::require("beta00 > 0", b00, true) : detail::require_zero("beta00 = 0", b00));
                conds.push_back(want01 ? detail::require("beta01 > 0", b01, true) : detail::require_zero("beta01 = 0", b01));
                if (!(chi_case == 0 && k == 2)) conds.push_back(detail::require_zero("pi0 = 0", p.pi0));

                const bool admissible = std::all_of(conds.begin(), conds.end(), [](const Condition& x) { return x.satisfied; });
                if (!admissible) {
                    out.push_back(std::move(c));
                    continue;
                }

                auto pick = [&](const std::optional<double>& v, double lo, double hi, const char* name) {
                    if (v) return detail::require_freedom(v, name);
                    c.representative = true;
                    return 0.5 * (lo + hi);
                };
                EquilibriumPoint e;
                e.cls = EquilibriumClass::NmutE;
                e.branch = c.label;
                e.micro = micro;
                double S = 0.0, I0 = 0.0, R = 0.0;
                if (chi_case == 0 && k == 2) {
                    S = p.pi0 / b00;
                    const double bound = (1.0 - S) / (1.0 + p.pi0 / p.chi);
                    conds.push_back(detail::require("I0 upper bound > 0", bound, true));
                    if (conds.back().satisfied) {
                        I0 = pick(f.I0, 0.0, bound, "I0");
                        conds.push_back(detail::require("I0 <= (1 - pi0/beta00)/(1 + pi0/chi)", bound - I0 + mid_tol));
                    }
                    R = p.pi0 / p.chi * I0;
                } else if (chi_case == 0 && k != 4) {
                    I0 = pick(f.I0, 0.0, 1.0, "I0");
                } else if (chi_case == 0) {
                    I0 = pick(f.I0, 0.0, 1.0, "I0");
                    S = pick(f.S, 0.0, 1.0 - I0, "S");
                } else if (k != 4) {
                    I0 = pick(f.I0, 0.0, 1.0, "I0");
                    R = pick(f.R, 0.0, 1.0 - I0, "R");
                } else {
                    I0 = pick(f.I0, 0.0, 1.0, "I0");
                    S = pick(f.S, 0.0, 1.0 - I0, "S");
                    R = pick(f.R, 0.0, 1.0 - I0 - S, "R");
                }
                conds.push_back(detail::require("I0 > 0", I0, true));
                const double D = 1.0 - S - I0 - R;
                conds.push_back(detail::require("D >= 0", D + mid_tol));
                if (std::all_of(conds.begin(), conds.end(), [](const Condition& x) { return x.satisfied; })) {
                    e.macro = {S, I0, 0.0, R, std::max(D, 0.0)};
                    e.free_params = {{"I0", I0}};
                    if (chi_case == 0 && k == 4) e.free_params["S"] = S;
                    if (chi_case == 1) e.free_params["R"] = R;
                    if (chi_case == 1 && k == 4) e.free_params["S"] = S;
                    e.certificate = conds;
                    e = detail::finalize(std::move(e), p);
                    c.feasible = e.certified();
                    c.conditions = e.certificate;
                    c.point = std::move(e);
                }
                out.push_back(std::move(c));
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------- CSE

struct CseOptions {
    double rho_min = 1e-6;
    double rho_max = 1e6;
    int probes = 2000;
    void validate() const {
        if (!(rho_min > 0.0) || !(rho_max > rho_min)) throw ValidationError("rho_min", "need 0 < rho_min < rho_max");
        if (probes < 2) throw ValidationError("probes", "must be >= 2");
    }
};

struct CseFreedoms {
    /// Deceased fraction carried by the generic branch.
    double D = 0.0;
    /// Free coordinates of the degenerate branches.
    std::optional<double> S, I0, I1, R;
};

namespace detail {

/// Quantities of the co-circulation problem that depend on (I0, I1) only through rho = I1/I0.
struct RhoState {
    double rho = 0.0, nu0 = 0.0, mu_c = 0.0;
    MicroState micro;
    TransmissionRates beta;
    double den = 0.0; ///< beta00*pi1 - beta11*pi0
    double h = 0.0;   ///< rho*den - beta01*pi0, zero exactly at co-circulation roots
};

inline RhoState rho_state(const ModelParams& p, double rho) {
    RhoState r;
    r.rho = rho;
    r.nu0 = 1.0 / (1.0 + rho);
    r.mu_c = 1.0 - (p.f1 / p.f0) * rho;
    r.micro = p.mu < r.mu_c ? qs_micro(p, 1.0 - p.mu / r.mu_c) : qs_micro(p, 0.0);
    r.beta = {saturating(p.a0, p.b0, r.micro.v0), saturating(p.a1, p.b1, r.nu0 * r.micro.v1),
              saturating(p.a1, p.b1, (1.0 - r.nu0) * r.micro.v1)};
    r.den = r.beta.beta00 * p.pi1 - r.beta.beta11 * p.pi0;
    r.h = rho * r.den - r.beta.beta01 * p.pi0;
    return r;
}

inline std::vector<double> cse_rho_roots(const ModelParams& p, const CseOptions& o) {
    const double rho_crit = (1.0 - p.mu) * p.f0 / p.f1;
    const double hi = std::min(o.rho_max, rho_crit * (1.0 - 1e-12));
    std::vector<double> roots;
    if (!(hi > o.rho_min)) return roots;
    const double llo = std::log(o.rho_min), lhi = std::log(hi);
    double prev_rho = o.rho_min, prev_h = rho_state(p, prev_rho).h;
    if (prev_h == 0.0) roots.push_back(prev_rho);
    for (int k = 1; k < o.probes; ++k) {
        const double rho = std::exp(llo + (lhi - llo) * k / (o.probes - 1));
        const double h = rho_state(p, rho).h;
        if (h == 0.0) {
            roots.push_back(rho);
        } else if (prev_h != 0.0 && (h > 0.0) != (prev_h > 0.0)) {
            double a = prev_rho, b = rho, ha = prev_h;
            for (int it = 0; it < 200 && b - a > 4.0 * std::numeric_limits<double>::epsilon() * b; ++it) {
                const double m = 0.5 * (a + b);
                const double hm = rho_state(p, m).h;
                if (hm == 0.0) {
                    a = b = m;
                    break;
                }
                if ((hm > 0.0) == (ha > 0.0)) {
                    a = m;
                    ha = hm;
                } else {
                    b = m;
                }
            }
            roots.push_back(0.5 * (a + b));
        }
        prev_rho = rho;
        prev_h = h;
    }
    return roots;
}

inline std::vector<EquilibriumPoint> cse_degenerate(const ModelParams& p, const CseFreedoms& f, bool beta00_zero) {
    std::vector<Condition> conds;
    const double I0 = require_freedom(f.I0, "I0");
    const double I1 = require_freedom(f.I1, "I1");
    conds.push_back(require("I0 > 0", I0, true));
    conds.push_back(require("I1 > 0", I1, true));
    if (!(I0 > 0.0 && I1 > 0.0)) return {};
    const double nu0 = I0 / (I0 + I1);
    const MicroState micro = micro_equilibrium(p, nu0);
    const auto beta = transmission_rates(p, nu0, micro.v0, micro.v1);
    const bool b1_zero = beta.beta01 == 0.0 && beta.beta11 == 0.0;

    EquilibriumPoint e;
    e.cls = EquilibriumClass::CSE;
    e.micro = micro;
    e.free_params = {{"I0", I0}, {"I1", I1}};
    double S = 0.0, R = 0.0;
    if (p.chi > 0.0) {
        conds.push_back(require_zero("pi0 = 0", p.pi0));
        if (!b1_zero) {
            e.branch = "i1a";
            S = p.pi1 * I1 / (beta.beta01 * I0 + beta.beta11 * I1);
            R = p.pi1 / p.chi * I1;
        } else {
            e.branch = "i1b";
            conds.push_back(require_zero("pi1 = 0", p.pi1));
            conds.push_back(require_zero("beta01 = 0", beta.beta01));
            conds.push_back(require_zero("beta11 = 0", beta.beta11));
            S = require_freedom(f.S, "S");
            e.free_params["S"] = S;
        }
    } else {
        conds.push_back(require_zero("pi0 = 0", p.pi0));
        conds.push_back(require_zero("pi1 = 0", p.pi1));
        R = require_freedom(f.R, "R");
        e.free_params["R"] = R;
        if (!beta00_zero) {
            e.branch = "ii2";
        } else if (!b1_zero) {
            e.branch = "ii1a";
        } else {
            e.branch = "ii1b";
            S = require_freedom(f.S, "S");
            e.free_params["S"] = S;
        }
    }
    conds.push_back(require("beta00 = 0 consistent", beta00_zero ? -beta.beta00 : beta.beta00, !beta00_zero));
    const double D = 1.0 - S - I0 - I1 - R;
    conds.push_back(require("D >= 0", D + kSimplexTol));
    if (!std::all_of(conds.begin(), conds.end(), [](const Condition& c) { return c.satisfied; })) return {};
    e.macro = {S, I0, I1, R, std::max(D, 0.0)};
    e.certificate = std::move(conds);
    e.certificate.push_back({"beta01 raw", true, beta.beta01});
    e.certificate.push_back({"beta11 raw", true, beta.beta11});
    e = finalize(std::move(e), p);
    if (!e.certified()) return {};
    return {std::move(e)};
}

} // namespace detail

/// All co-circulation equilibria. The generic branch (chi > 0, beta00 > 0) is
/// reduced to a scalar equation in rho = I1/I0 and solved by a sign-change scan
/// and bisection; degenerate branches need their free coordinates supplied.
inline std::vector<EquilibriumPoint> cse_solve(const ModelParams& p, const CseOptions& o = {},
                                               const CseFreedoms& f = {}) {
    p.validate();
    o.validate();
    if (p.delta0 != 0.0 || p.delta1 != 0.0) return {};

    const bool beta00_identically_zero = p.a0 == 0.0 || p.xi0 == 0.0;
    if (p.chi == 0.0 || beta00_identically_zero) return detail::cse_degenerate(p, f, beta00_identically_zero);

    std::vector<EquilibriumPoint> out;
    for (double rho : detail::cse_rho_roots(p, o)) {
        const auto rs = detail::rho_state(p, rho);
        std::vector<Condition> conds{
            detail::require_zero("delta0 = delta1 = 0", p.delta0 + p.delta1),
            detail::require("chi > 0", p.chi, true),
            detail::require("beta00 > 0", rs.beta.beta00, true),
            detail::require("beta00*pi1 - beta11*pi0 > 0", rs.den, true),
            detail::require("mu < mu_crit", rs.mu_c - p.mu, true),
        };
        if (!std::all_of(conds.begin(), conds.end(), [](const Condition& c) { return c.satisfied; })) continue;
        const double S = p.pi0 / rs.beta.beta00;
        const double I0 = (1.0 - f.D - S) / (1.0 + rho + (p.pi0 + p.pi1 * rho) / p.chi);
        conds.push_back(detail::require("S <= 1", 1.0 - S));
        conds.push_back(detail::require("I0 > 0", I0, true));
        if (!(conds[5].satisfied && conds[6].satisfied)) continue;
        const double I1 = rho * I0;
        const double R = (p.pi0 * I0 + p.pi1 * I1) / p.chi;
        const double r_residual = rho - rs.beta.beta01 * p.pi0 / rs.den;
        conds.push_back(detail::require("|rho residual| < 1e-12", 1e-12 - std::abs(r_residual)));

        EquilibriumPoint e;
        e.cls = EquilibriumClass::CSE;
        e.branch = "i2";
        e.macro = {S, I0, I1, R, f.D};
        e.micro = rs.micro;
        e.free_params = {{"D", f.D}, {"rho", rho}};
        e.certificate = std::move(conds);
        out.push_back(detail::finalize(std::move(e), p));
    }
    return out;
}

// ---------------------------------------------------------------- continuation

struct CseFamily {
    std::string tag;
    std::vector<double> pi1;
    std::vector<EquilibriumPoint> points;
    std::optional<double> born_at, ended_at;
};

struct CseContinuation {
    std::vector<double> grid;
    std::vector<std::size_t> root_counts;
    std::vector<CseFamily> families;
    /// First grid value with roots and its bisection refinement.
    std::optional<double> birth_grid, birth_refined;
    /// First grid value after which the second family is gone, and its refinement.
    std::optional<double> collision_grid, collision_refined;
    /// Second-family point just before the collision threshold.
    std::optional<EquilibriumPoint> collision_point;
};

/// Traces CSE families in pi1 over the open interval (pi1_lo, pi1_hi).
inline CseContinuation cse_continuation(ModelParams p, double pi1_lo, double pi1_hi, double step,
                                        const CseOptions& o = {}) {
    if (!(step > 0.0) || !(pi1_hi > pi1_lo)) throw ValidationError("step", "need step > 0 and pi1_hi > pi1_lo");
    CseContinuation out;
    auto solve_at = [&](double pi1) {
        ModelParams q = p;
        q.pi1 = pi1;
        return cse_solve(q, o);
    };

    std::vector<std::size_t> active; // indices into out.families
    const double jump_tol = 10.0 * step;
    for (long k = 1;; ++k) {
        const double pi1 = pi1_lo + static_cast<double>(k) * step;
        if (pi1 >= pi1_hi - 1e-12 * step) break;
        auto roots = solve_at(pi1);
        std::sort(roots.begin(), roots.end(),
                  [](const auto& a, const auto& b) { return a.free_params.at("rho") < b.free_params.at("rho"); });
        out.grid.push_back(pi1);
        out.root_counts.push_back(roots.size());
        if (!roots.empty() && !out.birth_grid) out.birth_grid = pi1;

        std::vector<bool> used(roots.size(), false);
        std::vector<std::size_t> still_active;
        for (std::size_t fi : active) {
            auto& fam = out.families[fi];
            const auto& last = fam.points.back().macro;
            double best = std::numeric_limits<double>::infinity();
            std::size_t bi = roots.size();
            for (std::size_t r = 0; r < roots.size(); ++r) {
                if (used[r]) continue;
                const double d = std::hypot(roots[r].macro.I0 - last.I0, roots[r].macro.I1 - last.I1);
                if (d < best) {
                    best = d;
                    bi = r;
                }
            }
            if (bi < roots.size() && best <= jump_tol) {
                used[bi] = true;
                fam.pi1.push_back(pi1);
                fam.points.push_back(roots[bi]);
                still_active.push_back(fi);
            } else {
                fam.ended_at = pi1;
            }
        }
        for (std::size_t r = 0; r < roots.size(); ++r) {
            if (used[r]) continue;
            CseFamily fam;
            fam.tag = "CSE" + std::to_string(out.families.size() + 1);
            fam.born_at = pi1;
            fam.pi1.push_back(pi1);
            fam.points.push_back(roots[r]);
            out.families.push_back(std::move(fam));
            still_active.push_back(out.families.size() - 1);
        }
        active = std::move(still_active);
    }

    auto bisect = [&](double a, double b, auto pred_at_b) {
        // pred(a) is false, pred(b) is true.
        for (int it = 0; it < 60 && b - a > 1e-12; ++it) {
            const double m = 0.5 * (a + b);
            if (pred_at_b(m)) b = m;
            else a = m;
        }
        return std::pair{a, b};
    };

    if (out.birth_grid) {
        const double lo = *out.birth_grid - step;
        if (lo > pi1_lo)
            out.birth_refined = bisect(lo, *out.birth_grid, [&](double x) { return !solve_at(x).empty(); }).second;
        else out.birth_refined = out.birth_grid;
    }
    if (out.families.size() >= 2 && out.families[1].ended_at) {
        const auto& fam2 = out.families[1];
        out.collision_grid = fam2.ended_at;
        auto [a, b] = bisect(fam2.pi1.back(), *fam2.ended_at, [&](double x) { return solve_at(x).size() < 2; });
        out.collision_refined = b;
        auto roots = solve_at(a);
        if (roots.size() >= 2) {
            std::sort(roots.begin(), roots.end(),
                      [](const auto& x, const auto& y) { return x.free_params.at("rho") < y.free_params.at("rho"); });
            out.collision_point = roots[1];
        }
    }
    return out;
}

// ---------------------------------------------------------------- reduced model

struct LimitEquilibria {
    MicroState micro;
    double beta00 = 0.0, beta01 = 0.0;
    ReducedState dfe;
    std::optional<ReducedState> cse;
};

/// Equilibria of the reduced model (pi1 -> infinity) with micro state QS(mu).
/// The CSE exists iff beta00 > pi0.
inline LimitEquilibria limit_equilibria(const ModelParams& p, double mu) {
    if (!(mu > 0.0 && mu < 1.0)) throw DomainError("limit_equilibria: mu must lie in (0,1)");
    LimitEquilibria out;
    out.micro = detail::qs_micro(p, 1.0 - mu);
    out.beta00 = detail::saturating(p.a0, p.b0, out.micro.v0);
    out.beta01 = detail::saturating(p.a1, p.b1, out.micro.v1);
    out.dfe = {1.0, 0.0, 0.0};
    if (out.beta00 > p.pi0) {
        const double S = p.pi0 / out.beta00;
        const double I0 = (1.0 - S) * p.chi / (p.chi + (1.0 + out.beta01 / out.beta00) * p.pi0);
        out.cse = ReducedState{S, I0, 1.0 - S - I0};
    }
    return out;
}

inline ReducedState limit_cse(const ModelParams& p, double mu) {
    const auto eq = limit_equilibria(p, mu);
    if (eq.beta00 == 0.0) throw InfeasibleError("beta00 > 0 (requires pi0 = 0 otherwise)", -p.pi0);
    if (!eq.cse) throw InfeasibleError("beta00 > pi0", eq.beta00 - p.pi0);
    return *eq.cse;
}

// ---------------------------------------------------------------- catalog

struct EquilibriumCatalog {
    /// Disease-free points form a segment in g0*; this is its descriptor.
    std::string dfe_segment;
    EquilibriumPoint dfe_representative;
    std::optional<EquilibriumPoint> nme;
    std::optional<std::string> nme_infeasible;
    std::vector<NmutCase> nmut;
    std::vector<EquilibriumPoint> cse;
};

/// Generic-branch catalog; degenerate branches that need free coordinates are
/// reported as infeasible or omitted.
inline EquilibriumCatalog equilibrium_catalog(const ModelParams& p, double g0_star = 0.0) {
    EquilibriumCatalog c;
    c.dfe_segment = p.chi > 0.0 ? "I0=I1=R=0, S+D=1, g0* in [0,1]" : "I0=I1=0, S+R+D=1, g0* in [0,1]";
    c.dfe_representative = dfe_point(p, g0_star);
    try {
        c.nme = nme_point(p);
    } catch (const InfeasibleError& e) {
        c.nme_infeasible = e.condition();
    } catch (const ValidationError& e) {
        c.nme_infeasible = "degenerate branch needs free coordinate " + e.field();
    }
    c.nmut = nmut_cases(p);
    try {
        c.cse = cse_solve(p);
    } catch (const ValidationError&) {
        c.cse.clear();
    }
    return c;
}

/// Distance (max norm over the 9 components) from a state to an equilibrium.
inline double distance(const StateVector& x, const EquilibriumPoint& e) {
    const auto y = e.state().to_array();
    double d = 0.0;
    for (std::size_t i = 0; i < kStateDim; ++i) d = std::max(d, std::abs(x[i] - y[i]));
    return d;
}

} // namespace qsmulti
