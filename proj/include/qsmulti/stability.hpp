#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <vector>

#include "qsmulti/equilibria.hpp"
#include "qsmulti/linalg.hpp"
#include "qsmulti/model.hpp"

namespace qsmulti {

inline constexpr double kDefaultFdStep = 1e-6;

/// Central-difference Jacobian of an arbitrary field on R^n.
template <class F>
Matrix jacobian_fd(F&& field, const std::vector<double>& x, double h = kDefaultFdStep) {
    if (!(h >= 1e-8 && h <= 1e-4)) throw ValidationError("h", "finite-difference step must lie in [1e-8, 1e-4]");
    const std::size_t n = x.size();
    Matrix J(n);
    std::vector<double> xp = x, xm = x;
    for (std::size_t j = 0; j < n; ++j) {
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        const std::vector<double> fp = field(xp), fm = field(xm);
        for (std::size_t i = 0; i < n; ++i) {
            J(i, j) = (fp[i] - fm[i]) / (2.0 * h);
            if (!std::isfinite(J(i, j))) throw NumericError("jacobian_fd: non-finite entry");
        }
        xp[j] = xm[j] = x[j];
    }
    return J;
}

/// Jacobian of the full system. At disease-free points (I0 = I1 = 0) the
/// prevalence is held at (0,0) during differencing: the prevalence map has no
/// derivative there and the held value is its defined one.
inline Matrix jacobian_fd(const ModelParams& p, const StateVector& x, double h = kDefaultFdStep) {
    std::optional<Prevalence> frozen;
    if (x[idx::I0] == 0.0 && x[idx::I1] == 0.0) frozen = Prevalence{0.0, 0.0};
    auto field = [&](const std::vector<double>& v) {
        StateVector s;
        std::copy(v.begin(), v.end(), s.begin());
        const auto d = detail::rhs_raw(s, p, frozen);
        return std::vector<double>(d.begin(), d.end());
    };
    return jacobian_fd(field, std::vector<double>(x.begin(), x.end()), h);
}

inline Matrix jacobian_fd(const ModelParams& p, const FullState& s, double h = kDefaultFdStep) {
    return jacobian_fd(p, s.to_array(), h);
}

inline Spectrum spectrum_at(const ModelParams& p, const EquilibriumPoint& e, double zero_tol = kZeroEigenTol) {
    return eigenvalues(jacobian_fd(p, e.state()), zero_tol);
}

// ---------------------------------------------------------------- closed forms (case-1 set)

/// Discriminant cubic of the NME oscillatory pair.
inline double nme_delta(double pi1) { return ((49.0 * pi1 - 84.0) * pi1 - 924.0) * pi1 + 338.0; }

/// Real roots of nme_delta, ascending, from the companion matrix.
inline std::vector<double> nme_delta_roots() {
    const Matrix companion{{84.0 / 49.0, 924.0 / 49.0, -338.0 / 49.0}, {1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}};
    std::vector<double> r;
    for (const auto& l : eigenvalues(companion).eigenvalues)
        if (std::abs(l.imag()) < 1e-12) r.push_back(l.real());
    std::sort(r.begin(), r.end());
    return r;
}

inline constexpr double kNmeFeasibilityBound = 40.0 / 7.0;

/// Spectrum at the NME point for the case-1 set in the 9-component state
/// space; fast eigenvalues carry the 1/epsilon factor.
inline Spectrum nme_spectrum_closed_form(double pi1, double epsilon = 0.01) {
    if (!(pi1 > 0.0 && pi1 < kNmeFeasibilityBound)) throw DomainError("nme_spectrum_closed_form: pi1 must lie in (0, 40/7)");
    if (!(epsilon > 0.0)) throw DomainError("nme_spectrum_closed_form: epsilon must be > 0");
    const double delta = nme_delta(pi1);
    const double denom = 7.0 * (pi1 + 2.0);
    const std::complex<double> root = std::sqrt(std::complex<double>(2.0 * delta, 0.0));
    std::vector<std::complex<double>> v{
        -0.8 / epsilon, -0.5 / epsilon, -0.2 / epsilon, -0.2 / epsilon, -0.5, 0.0, 0.0,
        -(54.0 - root) / denom, -(54.0 + root) / denom,
    };
    return make_spectrum(std::move(v));
}

/// Deciding eigenvalue of the case-1 DFE as a function of the genome frequency.
inline double lambda_dfe(double g0_star) { return (175.0 * g0_star - 1.0) / (50.0 * g0_star + 2.0); }

inline Spectrum dfe_spectrum_case1(double g0_star, double pi1, double epsilon = 0.01) {
    if (!(g0_star >= 0.0 && g0_star <= 1.0)) throw DomainError("dfe_spectrum_case1: g0_star must lie in [0,1]");
    return make_spectrum(std::vector<double>{0.0, 0.0, 0.0, 0.0, -2.0, -pi1, lambda_dfe(g0_star), -0.8 / epsilon,
                                             -0.5 / epsilon});
}

/// Growth rate of master infections at a DFE with susceptible fraction S and genome frequency g0.
inline double dfe_psi(double S_star, double g0_star, const ModelParams& p) {
    const double load = p.xi0 * g0_star;
    if (load == 0.0) return -p.pi0 - p.delta0;
    return p.a0 * load * S_star / (p.b0 * p.gamma0 + load) - p.pi0 - p.delta0;
}

/// S on the stability boundary for a given g0; undefined at g0 = 0, where psi < 0 for every S.
inline std::optional<double> dfe_boundary_S(double g0_star, const ModelParams& p) {
    if (!(g0_star > 0.0) || p.xi0 == 0.0 || p.a0 == 0.0) return std::nullopt;
    return (p.pi0 + p.delta0) / p.a0 * (1.0 + p.b0 * p.gamma0 / (p.xi0 * g0_star));
}

inline Spectrum dfe_spectrum_case2(double S_star, double g0_star, const ModelParams& p) {
    if (!(S_star >= 0.0 && S_star <= 1.0)) throw DomainError("dfe_spectrum_case2: S_star must lie in [0,1]");
    if (!(g0_star >= 0.0 && g0_star <= 1.0)) throw DomainError("dfe_spectrum_case2: g0_star must lie in [0,1]");
    return make_spectrum(std::vector<double>{0.0, 0.0, 0.0, 0.0, -p.chi, -p.gamma0 / p.epsilon, -p.gamma1 / p.epsilon,
                                             -(p.delta1 + p.pi1), dfe_psi(S_star, g0_star, p)});
}

/// Quasi-period 2*pi/|Im| of the complex pair with the largest real part.
inline std::optional<double> quasi_period(const Spectrum& s) {
    for (const auto& l : s.eigenvalues)
        if (std::abs(l.imag()) > s.zero_tol) return 2.0 * std::numbers::pi / std::abs(l.imag());
    return std::nullopt;
}

// ---------------------------------------------------------------- reduced model

/// Jacobian of the reduced model in the chart (S, I0), with R = 1 - S - I0.
inline Matrix reduced_jacobian(const ModelParams& p, double beta00, double beta01, const ReducedState& s) {
    const double b = beta00 + beta01;
    return Matrix{{-b * s.I0 - p.chi, -b * s.S - p.chi}, {beta00 * s.I0, beta00 * s.S - p.pi0}};
}

} // namespace qsmulti
