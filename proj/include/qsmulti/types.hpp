#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "qsmulti/errors.hpp"

namespace qsmulti {

inline constexpr std::string_view kVersion = "1.0.0";

/// Rate constants of both layers and the slow/fast ratio.
struct ModelParams {
    double f0 = 1.0;
    double f1 = 0.5;
    double mu = 0.1;
    double xi0 = 1.0;
    double xi1 = 1.0;
    double gamma0 = 1.0;
    double gamma1 = 1.0;
    double a0 = 1.0;
    double a1 = 1.0;
    double b0 = 1.0;
    double b1 = 1.0;
    double pi0 = 0.0;
    double pi1 = 0.0;
    double delta0 = 0.0;
    double delta1 = 0.0;
    double chi = 0.0;
    double epsilon = 0.01;

    struct Field {
        std::string_view name;
        double ModelParams::*member;
    };

    static constexpr std::array<Field, 17> fields{{
        {"f0", &ModelParams::f0},         {"f1", &ModelParams::f1},         {"mu", &ModelParams::mu},
        {"xi0", &ModelParams::xi0},       {"xi1", &ModelParams::xi1},       {"gamma0", &ModelParams::gamma0},
        {"gamma1", &ModelParams::gamma1}, {"a0", &ModelParams::a0},         {"a1", &ModelParams::a1},
        {"b0", &ModelParams::b0},         {"b1", &ModelParams::b1},         {"pi0", &ModelParams::pi0},
        {"pi1", &ModelParams::pi1},       {"delta0", &ModelParams::delta0}, {"delta1", &ModelParams::delta1},
        {"chi", &ModelParams::chi},       {"epsilon", &ModelParams::epsilon},
    }};

    static bool has_field(std::string_view name) noexcept {
        for (const auto& f : fields)
            if (f.name == name) return true;
        return false;
    }

    double get(std::string_view name) const {
        for (const auto& f : fields)
            if (f.name == name) return this->*f.member;
        throw ValidationError(std::string(name), "unknown parameter");
    }

    void set(std::string_view name, double value) {
        for (const auto& f : fields)
            if (f.name == name) {
                this->*f.member = value;
                return;
            }
        throw ValidationError(std::string(name), "unknown parameter");
    }

    /// Throws ValidationError naming the first violated field.
    void validate() const {
        for (const auto& f : fields)
            if (!std::isfinite(this->*f.member)) throw ValidationError(std::string(f.name), "must be finite");
        if (!(f1 > 0.0)) throw ValidationError("f1", "must be > 0");
        if (!(f0 > f1)) throw ValidationError("f0", "must be > f1");
        if (!(mu > 0.0 && mu <= 1.0)) throw ValidationError("mu", "must lie in (0,1]");
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0)) throw ValidationError(name, "must be > 0");
        };
        auto nonneg = [](double v, const char* name) {
            if (!(v >= 0.0)) throw ValidationError(name, "must be >= 0");
        };
        nonneg(xi0, "xi0");
        nonneg(xi1, "xi1");
        positive(gamma0, "gamma0");
        positive(gamma1, "gamma1");
        nonneg(a0, "a0");
        nonneg(a1, "a1");
        positive(b0, "b0");
        positive(b1, "b1");
        nonneg(pi0, "pi0");
        nonneg(pi1, "pi1");
        nonneg(delta0, "delta0");
        nonneg(delta1, "delta1");
        nonneg(chi, "chi");
        positive(epsilon, "epsilon");
    }

    bool operator==(const ModelParams&) const = default;
};

/// Canonical ordering S, I0, I1, R, D, g0, g1, v0, v1.
inline constexpr std::size_t kStateDim = 9;
using StateVector = std::array<double, kStateDim>;

namespace idx {
inline constexpr std::size_t S = 0, I0 = 1, I1 = 2, R = 3, D = 4, g0 = 5, g1 = 6, v0 = 7, v1 = 8;
}

inline constexpr std::array<std::string_view, kStateDim> kStateNames{"S", "I0", "I1", "R", "D", "g0", "g1", "v0", "v1"};

inline std::optional<std::size_t> state_index(std::string_view name) noexcept {
    for (std::size_t i = 0; i < kStateDim; ++i)
        if (kStateNames[i] == name) return i;
    return std::nullopt;
}

inline constexpr double kSimplexTol = 1e-9;

struct MacroState {
    double S = 1.0, I0 = 0.0, I1 = 0.0, R = 0.0, D = 0.0;

    double total() const noexcept { return S + I0 + I1 + R + D; }

    void validate(double tol = kSimplexTol) const {
        const std::array<std::pair<const char*, double>, 5> comps{{{"S", S}, {"I0", I0}, {"I1", I1}, {"R", R}, {"D", D}}};
        for (auto [name, v] : comps) {
            if (!std::isfinite(v)) throw ValidationError(name, "must be finite");
            if (v < -tol) throw ValidationError(name, "must be >= 0");
        }
        if (std::abs(total() - 1.0) > tol) throw ValidationError("macro", "S+I0+I1+R+D must equal 1");
    }

    bool operator==(const MacroState&) const = default;
};

struct MicroState {
    double g0 = 1.0, g1 = 0.0, v0 = 0.0, v1 = 0.0;

    void validate(double tol = kSimplexTol) const {
        const std::array<std::pair<const char*, double>, 4> comps{{{"g0", g0}, {"g1", g1}, {"v0", v0}, {"v1", v1}}};
        for (auto [name, v] : comps) {
            if (!std::isfinite(v)) throw ValidationError(name, "must be finite");
            if (v < -tol) throw ValidationError(name, "must be >= 0");
        }
        if (std::abs(g0 + g1 - 1.0) > tol) throw ValidationError("micro", "g0+g1 must equal 1");
    }

    bool operator==(const MicroState&) const = default;
};

inline MacroState make_macro(double S, double I0, double I1, double R, double D) {
    MacroState m{S, I0, I1, R, D};
    m.validate();
    return m;
}

inline MicroState make_micro(double g0, double g1, double v0, double v1) {
    MicroState m{g0, g1, v0, v1};
    m.validate();
    return m;
}

struct FullState {
    MacroState macro;
    MicroState micro;

    void validate(double tol = kSimplexTol) const {
        macro.validate(tol);
        micro.validate(tol);
    }

    StateVector to_array() const noexcept {
        return {macro.S, macro.I0, macro.I1, macro.R, macro.D, micro.g0, micro.g1, micro.v0, micro.v1};
    }

    static FullState from_array(const StateVector& x) noexcept {
        return {{x[0], x[1], x[2], x[3], x[4]}, {x[5], x[6], x[7], x[8]}};
    }

    bool operator==(const FullState&) const = default;
};

/// Coupling quantities evaluated at one state.
struct CouplingSnapshot {
    double nu0 = 0.0, nu1 = 0.0;
    double f0_eff = 0.0, f1_eff = 0.0;
    double beta00 = 0.0, beta01 = 0.0, beta11 = 0.0;
    std::optional<double> mu_crit;
};

} // namespace qsmulti
