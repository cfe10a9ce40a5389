#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "qsmulti/coupling.hpp"
#include "qsmulti/types.hpp"

namespace qsmulti {

/// Components in [-kRoundoffFloor, 0) are read as exact zeros by the right-hand side.
inline constexpr double kRoundoffFloor = 1e-12;

namespace detail {

/// Coupled vector field on the raw state vector. When `frozen_nu` is set the
/// prevalence is held at that value instead of being recomputed from (I0, I1);
/// the Jacobian at disease-free points uses this.
inline StateVector rhs_raw(const StateVector& raw, const ModelParams& p,
                           const std::optional<Prevalence>& frozen_nu = std::nullopt) noexcept {
    StateVector x = raw;
    for (auto& c : x)
        if (c < 0.0 && c >= -kRoundoffFloor) c = 0.0;

    const double S = x[idx::S], I0 = x[idx::I0], I1 = x[idx::I1], R = x[idx::R];
    const double g0 = x[idx::g0], g1 = x[idx::g1], v0 = x[idx::v0], v1 = x[idx::v1];

    const Prevalence nu = frozen_nu ? *frozen_nu : prevalence_unchecked(I0, I1);
    const double beta00 = saturating(p.a0, p.b0, v0);
    const double beta01 = saturating(p.a1, p.b1, nu.nu0 * v1);
    const double beta11 = saturating(p.a1, p.b1, nu.nu1 * v1);
    const double f0e = p.f0 * nu.nu0;
    const double f1e = p.f1 * nu.nu1;
    const double phi = f0e * g0 + f1e * g1;

    StateVector dx{};
    const double infection0 = beta00 * I0 * S;
    const double infection1 = (beta01 * I0 + beta11 * I1) * S;
    dx[idx::S] = -(infection0 + infection1) + p.chi * R;
    dx[idx::I0] = infection0 - (p.pi0 + p.delta0) * I0;
    dx[idx::I1] = infection1 - (p.pi1 + p.delta1) * I1;
    dx[idx::R] = p.pi0 * I0 + p.pi1 * I1 - p.chi * R;
    dx[idx::D] = p.delta0 * I0 + p.delta1 * I1;

    const double inv_eps = 1.0 / p.epsilon;
    dx[idx::g0] = (f0e * (1.0 - p.mu) * g0 - phi * g0) * inv_eps;
    dx[idx::g1] = (f0e * p.mu * g0 + f1e * g1 - phi * g1) * inv_eps;
    dx[idx::v0] = (p.xi0 * g0 - p.gamma0 * v0) * inv_eps;
    dx[idx::v1] = (p.xi1 * g1 - p.gamma1 * v1) * inv_eps;
    return dx;
}

inline void require_finite(const StateVector& x, const char* what) {
    for (double c : x)
        if (!std::isfinite(c)) throw NumericError(std::string(what) + ": non-finite value");
}

} // namespace detail

/// Time derivative of the coupled 9-component system. Micro components carry the 1/epsilon factor.
inline StateVector rhs_full(const StateVector& x, const ModelParams& p) {
    detail::require_finite(x, "rhs_full state");
    auto dx = detail::rhs_raw(x, p);
    detail::require_finite(dx, "rhs_full derivative");
    return dx;
}

inline StateVector rhs_full(const FullState& s, const ModelParams& p) { return rhs_full(s.to_array(), p); }

inline double norm2(const StateVector& v) noexcept {
    double acc = 0.0;
    for (double c : v) acc += c * c;
    return std::sqrt(acc);
}

/// State of the reduced model obtained as pi1 grows without bound: I1 vanishes and D is dropped.
struct ReducedState {
    double S = 1.0, I0 = 0.0, R = 0.0;
};

inline ReducedState rhs_reduced_limit(const ReducedState& s, const ModelParams& p, double beta00, double beta01) {
    const double contact = s.I0 * s.S;
    return {-(beta00 + beta01) * contact + p.chi * s.R, (beta00 * s.S - p.pi0) * s.I0,
            beta01 * contact + p.pi0 * s.I0 - p.chi * s.R};
}

} // namespace qsmulti
