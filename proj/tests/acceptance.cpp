#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "qsmulti/qsmulti.hpp"

using namespace qsmulti;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    const char* title;
    double budget_s;
    std::function<Outcome()> run;
};

std::string num(double v, int prec = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

ModelParams case1(double pi1) {
    auto p = case1_params();
    p.pi1 = pi1;
    return p;
}

/// Largest |a_k - b_k| after pairing each reference value with its nearest unused candidate.
double match_spectra(const std::vector<std::complex<double>>& ref, std::vector<std::complex<double>> got) {
    double worst = 0.0;
    for (const auto& r : ref) {
        auto it = std::min_element(got.begin(), got.end(),
                                   [&](const auto& a, const auto& b) { return std::abs(a - r) < std::abs(b - r); });
        if (it == got.end()) return std::numeric_limits<double>::infinity();
        worst = std::max(worst, std::abs(*it - r));
        got.erase(it);
    }
    return worst;
}

bool has_complex_pair(const Spectrum& s, double tol) {
    return std::any_of(s.eigenvalues.begin(), s.eigenvalues.end(), [&](const auto& l) { return std::abs(l.imag()) > tol; });
}

// ------------------------------------------------------------------ 1

Outcome c1() {
    bool feasible_lo = false, infeasible_hi = false;
    try {
        feasible_lo = nme_point(case1(5.70)).certified();
    } catch (const InfeasibleError&) {
    }
    try {
        nme_point(case1(5.72));
    } catch (const InfeasibleError&) {
        infeasible_hi = true;
    }
    // Sweep the bound from both sides.
    bool iff = true;
    for (double pi1 = 0.05; pi1 < 10.0; pi1 += 0.05) {
        bool ok = false;
        try {
            ok = nme_point(case1(pi1)).certified();
        } catch (const InfeasibleError&) {
        }
        iff = iff && (ok == (pi1 < kNmeFeasibilityBound));
    }
    return {feasible_lo && infeasible_hi && iff, std::string("pi1=5.70 ") + (feasible_lo ? "feasible" : "infeasible") +
                                                    ", pi1=5.72 " + (infeasible_hi ? "infeasible" : "feasible") +
                                                    ", iff over grid " + (iff ? "yes" : "no")};
}

// ------------------------------------------------------------------ 2

Outcome c2() {
    double worst = 0.0;
    for (double eps : {0.01, 1.0}) {
        for (double pi1 : {0.6, 1.0, 3.0, 5.0}) {
            auto p = case1(pi1);
            p.epsilon = eps;
            const auto fd = spectrum_at(p, nme_point(p));
            worst = std::max(worst, match_spectra(nme_spectrum_closed_form(pi1, eps).eigenvalues, fd.eigenvalues));
        }
    }
    // Complex/real transitions from FD spectra alone.
    std::vector<double> transitions;
    const double step = 0.002;
    bool prev = false;
    for (int k = 0;; ++k) {
        const double pi1 = 0.1 + k * step;
        if (pi1 >= kNmeFeasibilityBound) break;
        const auto p = case1(pi1);
        const bool cx = has_complex_pair(spectrum_at(p, nme_point(p)), 1e-5);
        if (k > 0 && cx != prev) transitions.push_back(pi1 - 0.5 * step);
        prev = cx;
    }
    const bool spectra_ok = worst < 1e-5;
    const bool trans_ok = transitions.size() == 2 && std::abs(transitions[0] - 0.357) <= 0.01 &&
                          std::abs(transitions[1] - 5.129) <= 0.01;
    std::string t;
    for (double x : transitions) t += num(x, 5) + " ";
    return {spectra_ok && trans_ok, "max |closed - FD| = " + num(worst, 3) + ", transitions at " + t};
}

// ------------------------------------------------------------------ 3

Outcome c3() {
    const auto cont = cse_continuation(case1(1.0), 0.5, 10.0, 0.025);
    const auto close = [](const std::optional<double>& v, double target) { return v && std::abs(*v - target) <= 0.05; };
    const bool birth = close(cont.birth_grid, 1.675) && close(cont.birth_refined, 1.675);
    const bool collision = close(cont.collision_grid, 8.875) && close(cont.collision_refined, 8.875);

    // CSE2 approaches (1,0,0,0) as the collision nears.
    bool approach = false;
    double last_dist = 0.0;
    if (cont.families.size() >= 2) {
        const auto& fam = cont.families[1];
        std::vector<double> d;
        for (const auto& e : fam.points)
            d.push_back(std::max({std::abs(e.macro.S - 1.0), e.macro.I0, e.macro.I1, e.macro.R}));
        last_dist = d.back();
        const std::size_t tail = std::min<std::size_t>(d.size(), 20);
        approach = std::is_sorted(d.end() - static_cast<long>(tail), d.end(), std::greater<>()) && last_dist < 0.01;
        if (cont.collision_point) {
            const auto& m = cont.collision_point->macro;
            approach = approach && std::max({std::abs(m.S - 1.0), m.I0, m.I1, m.R}) < 1e-6;
        }
    }
    auto s = [](const std::optional<double>& v) { return v ? num(*v, 6) : std::string("none"); };
    return {birth && collision && approach, "birth " + s(cont.birth_grid) + " (" + s(cont.birth_refined) + "), collision " +
                                                s(cont.collision_grid) + " (" + s(cont.collision_refined) +
                                                "), CSE2 last-grid distance to (1,0,0,0) " + num(last_dist, 3)};
}

// ------------------------------------------------------------------ 4

/// Roots of the co-circulation conditions located on an (I0, I1) grid, independent of the rho parametrisation.
std::vector<std::pair<double, double>> grid_oracle(const ModelParams& p, double h) {
    const int n = static_cast<int>(std::round(1.0 / h));
    std::vector<double> F1((n + 1) * (n + 1), NAN), F2((n + 1) * (n + 1), NAN);
    auto at = [n](int i, int j) { return static_cast<std::size_t>(i * (n + 1) + j); };
    for (int i = 1; i < n; ++i) {
        for (int j = 1; i + j < n; ++j) {
            const double I0 = i * h, I1 = j * h;
            const auto m = micro_equilibrium(p, I0 / (I0 + I1));
            const auto b = transmission_rates(p, prevalence(I0, I1), m.v0, m.v1);
            if (!(b.beta00 > 0.0)) continue;
            const double S = p.pi0 / b.beta00;
            const double R = (p.pi0 * I0 + p.pi1 * I1) / p.chi;
            F1[at(i, j)] = S + I0 + I1 + R - 1.0;
            F2[at(i, j)] = (b.beta01 * I0 + b.beta11 * I1) * S - p.pi1 * I1;
        }
    }
    // Each cell is split into two triangles; the linear interpolants of F1 and F2
    // on a triangle must vanish together at a point inside it.
    auto crosses = [&](std::pair<int, int> a, std::pair<int, int> b, std::pair<int, int> c) {
        const double f[3] = {F1[at(a.first, a.second)], F1[at(b.first, b.second)], F1[at(c.first, c.second)]};
        const double g[3] = {F2[at(a.first, a.second)], F2[at(b.first, b.second)], F2[at(c.first, c.second)]};
        for (int k = 0; k < 3; ++k)
            if (std::isnan(f[k]) || std::isnan(g[k]) || std::isinf(f[k]) || std::isinf(g[k])) return false;
        // Barycentric weights (1-u-v, u, v): solve f0 + u(f1-f0) + v(f2-f0) = 0 and the same for g.
        const double a11 = f[1] - f[0], a12 = f[2] - f[0], a21 = g[1] - g[0], a22 = g[2] - g[0];
        const double det = a11 * a22 - a12 * a21;
        if (det == 0.0) return false;
        const double u = (-f[0] * a22 + g[0] * a12) / det, v = (-a11 * g[0] + a21 * f[0]) / det;
        return u >= 0.0 && v >= 0.0 && u + v <= 1.0;
    };
    std::vector<std::pair<int, int>> cells;
    for (int i = 1; i + 1 < n; ++i)
        for (int j = 1; i + j + 2 < n; ++j) {
            if (crosses({i, j}, {i + 1, j}, {i, j + 1}) || crosses({i + 1, j + 1}, {i, j + 1}, {i + 1, j}))
                cells.emplace_back(i, j);
        }
    // Cluster adjacent flagged cells.
    std::vector<int> label(cells.size(), -1);
    int clusters = 0;
    for (std::size_t a = 0; a < cells.size(); ++a) {
        if (label[a] >= 0) continue;
        std::vector<std::size_t> stack{a};
        label[a] = clusters;
        while (!stack.empty()) {
            const auto c = stack.back();
            stack.pop_back();
            for (std::size_t b = 0; b < cells.size(); ++b)
                if (label[b] < 0 && std::abs(cells[b].first - cells[c].first) <= 1 &&
                    std::abs(cells[b].second - cells[c].second) <= 1) {
                    label[b] = clusters;
                    stack.push_back(b);
                }
        }
        ++clusters;
    }
    std::vector<std::pair<double, double>> roots(static_cast<std::size_t>(clusters), {0.0, 0.0});
    std::vector<int> counts(static_cast<std::size_t>(clusters), 0);
    for (std::size_t a = 0; a < cells.size(); ++a) {
        auto& r = roots[static_cast<std::size_t>(label[a])];
        r.first += (cells[a].first + 0.5) * h;
        r.second += (cells[a].second + 0.5) * h;
        ++counts[static_cast<std::size_t>(label[a])];
    }
    for (std::size_t k = 0; k < roots.size(); ++k) {
        roots[k].first /= counts[k];
        roots[k].second /= counts[k];
    }
    return roots;
}

Outcome c4() {
    bool ok = true;
    double worst_rt = 0.0, worst_res = 0.0, worst_oracle = 0.0;
    std::string counts;
    for (double pi1 : {3.0, 5.0, 7.0}) {
        const auto p = case1(pi1);
        const auto pts = cse_solve(p);
        const auto oracle = grid_oracle(p, 2e-3);
        counts += num(pi1, 2) + ":" + std::to_string(pts.size()) + "/" + std::to_string(oracle.size()) + " ";
        ok = ok && !pts.empty() && oracle.size() == pts.size();
        for (const auto& e : pts) {
            const auto rep = rt_report(e.state(), p);
            const double d = std::max(std::abs(rep.Rt0.value_or(0.0) - 1.0), std::abs(rep.Rt1.value_or(0.0) - 1.0));
            worst_rt = std::max(worst_rt, d);
            worst_res = std::max(worst_res, e.residual);
            double nearest = std::numeric_limits<double>::infinity();
            for (const auto& [I0, I1] : oracle)
                nearest = std::min(nearest, std::max(std::abs(I0 - e.macro.I0), std::abs(I1 - e.macro.I1)));
            worst_oracle = std::max(worst_oracle, nearest);
        }
    }
    ok = ok && worst_rt <= 1e-8 && worst_res < 1e-9 && worst_oracle <= 5e-3;
    return {ok, "roots/oracle " + counts + "| max |Rt-1| " + num(worst_rt, 3) + ", max rhs " + num(worst_res, 3) +
                    ", max oracle distance " + num(worst_oracle, 3)};
}

// ------------------------------------------------------------------ 5

Outcome c5() {
    const auto p = case1(1.0);
    double worst = 0.0;
    bool sign_ok = true;
    for (int k = 0; k <= 1000; ++k) {
        const double g = k / 1000.0;
        const double R0 = r0_dfe(p, g);
        worst = std::max(worst, std::abs(R0 - 20.0 * g / (0.1 + 2.5 * g)));
        if (std::abs(g - 1.0 / 175.0) > 1e-9) sign_ok = sign_ok && ((R0 > 1.0) == (lambda_dfe(g) > 0.0));
    }
    const double g_star = 1.0 / 175.0;
    const double r_at = r0_dfe(p, g_star), l_at = lambda_dfe(g_star);
    // The full-model Jacobian changes stability across the same point.
    auto unstable = [&](double g) { return spectrum_at(p, dfe_point(p, g)).n_unstable; };
    const bool fd_flip = unstable(g_star - 1e-3) == 0 && unstable(g_star + 1e-3) == 1;
    const bool ok = worst < 1e-12 && std::abs(r_at - 1.0) < 1e-10 && std::abs(l_at) < 1e-10 && sign_ok && fd_flip;
    return {ok, "|R0(1/175)-1| = " + num(std::abs(r_at - 1.0), 3) + ", lambda(1/175) = " + num(l_at, 3) +
                    ", formula error " + num(worst, 3) + ", FD stability flip " + (fd_flip ? "yes" : "no")};
}

// ------------------------------------------------------------------ 6

Outcome c6() {
    IntegrationOptions o;
    o.t_max = 2000.0;
    o.stop_on_settle = false;
    const auto tr = integrate(case1(1.0), principal_initial_state(), o);
    double macro = 0.0, micro = 0.0;
    for (const auto& x : tr.states) {
        macro = std::max(macro, std::abs(x[idx::S] + x[idx::I0] + x[idx::I1] + x[idx::R] + x[idx::D] - 1.0));
        micro = std::max(micro, std::abs(x[idx::g0] + x[idx::g1] - 1.0));
    }
    const bool every_step = tr.states.size() == static_cast<std::size_t>(tr.accepted_steps) + 1;
    const bool ok = every_step && tr.final_time() == 2000.0 && macro < 1e-7 && micro < 1e-7 &&
                    tr.max_macro_drift < 1e-7 && tr.max_micro_drift < 1e-7;
    return {ok, std::to_string(tr.accepted_steps) + " steps, max macro drift " + num(macro, 3) + ", max micro drift " +
                    num(micro, 3)};
}

// ------------------------------------------------------------------ 7

Outcome c7() {
    bool ok = true;
    std::string detail;
    for (double eps : {1e-2, 1e-3}) {
        auto p = case1(1.0);
        p.epsilon = eps;
        const auto tr = integrate(p, principal_initial_state(), {});
        double worst = 0.0, t_worst = 0.0;
        for (std::size_t k = 0; k < tr.states.size(); ++k) {
            if (tr.times[k] < 5.0 * eps) continue;
            const auto& x = tr.states[k];
            const auto q = quasi_steady_micro(p, x[idx::I0], x[idx::I1], x[idx::g0]);
            const double d = std::max({std::abs(x[idx::g0] - q.g0), std::abs(x[idx::g1] - q.g1),
                                       std::abs(x[idx::v0] - q.v0), std::abs(x[idx::v1] - q.v1)});
            if (d > worst) {
                worst = d;
                t_worst = tr.times[k];
            }
        }
        ok = ok && worst <= 10.0 * eps;
        detail += "eps=" + num(eps, 2) + ": sup " + num(worst, 3) + " at t=" + num(t_worst, 4) + " (limit " +
                  num(10.0 * eps, 2) + "); ";
    }
    return {ok, detail};
}

// ------------------------------------------------------------------ 8

Outcome c8() {
    bool dfe_ok = true;
    std::string detail;
    for (double mu : {0.1, 0.45, 0.8}) {
        auto p = case2_params();
        p.mu = mu;
        const auto tr = integrate(p, principal_initial_state(), {});
        const auto& x = tr.final_state();
        const bool ok = tr.settled() && x[idx::I0] < 1e-8 && x[idx::I1] < 1e-8 && detect_endpoint(tr, p) == EndpointClass::DFE;
        dfe_ok = dfe_ok && ok;
        detail += "mu=" + num(mu, 2) + (ok ? " DFE" : " not DFE") + "; ";
    }
    int signatures = 0, clamped = 0;
    double best_final_g0 = 0.0;
    for (int k = 0; k < 20; ++k) {
        auto p = case2_params();
        p.mu = 0.025 + 0.05 * k;
        IntegrationOptions o;
        o.record_every = 0;
        const auto tr = integrate(p, principal_initial_state(), o);
        const bool g0_clamped = std::any_of(tr.events.begin(), tr.events.end(), [](const Event& e) {
            return e.kind == EventKind::Clamp && e.component == static_cast<int>(idx::g0);
        });
        const double g0_end = tr.final_state()[idx::g0];
        if (g0_clamped) {
            ++clamped;
            best_final_g0 = std::max(best_final_g0, g0_end);
        }
        if (g0_clamped && tr.settled() && g0_end > 0.5) ++signatures;
    }
    detail += "signature in " + std::to_string(signatures) + "/20 (g0 clamped in " + std::to_string(clamped) +
              ", max settled g0 after clamp " + num(best_final_g0, 3) + ")";
    return {dfe_ok && signatures >= 1, detail};
}

// ------------------------------------------------------------------ 9

Outcome c9() {
    std::mt19937_64 rng(20240917);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    auto draw = [&](double lo, double hi) { return lo + (hi - lo) * U(rng); };
    int accepted = 0, tries = 0, bad_cse = 0;
    double worst_dfe = 0.0, worst_rhs = 0.0;
    while (accepted < 500 && tries < 100000) {
        ++tries;
        ModelParams p;
        p.f0 = draw(0.5, 2.0);
        p.f1 = draw(0.05, 1.0) * p.f0;
        p.xi0 = draw(0.1, 5.0);
        p.xi1 = draw(0.1, 5.0);
        p.gamma0 = draw(0.1, 2.0);
        p.gamma1 = draw(0.1, 2.0);
        p.a0 = draw(0.1, 10.0);
        p.a1 = draw(0.1, 10.0);
        p.b0 = draw(0.01, 2.0);
        p.b1 = draw(0.01, 2.0);
        p.pi0 = draw(0.05, 3.0);
        p.chi = draw(0.05, 5.0);
        const double mu = draw(0.01, 0.99);
        const auto eq = limit_equilibria(p, mu);
        if (!eq.cse) continue;
        ++accepted;
        const auto& c = *eq.cse;
        const auto J = reduced_jacobian(p, eq.beta00, eq.beta01, c);
        const double det = J(0, 0) * J(1, 1) - J(0, 1) * J(1, 0), tr = J(0, 0) + J(1, 1);
        if (!(det > 0.0 && tr < 0.0)) ++bad_cse;
        const auto d = rhs_reduced_limit(c, p, eq.beta00, eq.beta01);
        worst_rhs = std::max({worst_rhs, std::abs(d.S), std::abs(d.I0), std::abs(d.R)});
        const auto sd = eigenvalues(reduced_jacobian(p, eq.beta00, eq.beta01, eq.dfe));
        worst_dfe = std::max(worst_dfe, match_spectra({-p.chi, eq.beta00 - p.pi0}, sd.eigenvalues));
    }
    const bool ok = accepted == 500 && bad_cse == 0 && worst_dfe <= 1e-10 && worst_rhs < 1e-12;
    return {ok, std::to_string(accepted) + " draws, CSE det/trace violations " + std::to_string(bad_cse) +
                    ", DFE spectrum error " + num(worst_dfe, 3) + ", CSE rhs " + num(worst_rhs, 3)};
}

// ------------------------------------------------------------------ 10

Outcome c10() {
    const auto p = case2_params();
    const int n = 20;
    int agree = 0, boundary_ok = 0;
    for (int j = 0; j < n; ++j) {
        const double g0 = (j + 0.5) / n;
        std::vector<bool> unstable(n);
        for (int i = 0; i < n; ++i) {
            const double S = (i + 0.5) / n;
            const auto s = spectrum_at(p, dfe_point(p, g0, {S, 0.0, 1.0 - S}));
            unstable[static_cast<std::size_t>(i)] = s.n_unstable > 0;
            if ((dfe_psi(S, g0, p) > 0.0) == (s.n_unstable > 0)) ++agree;
        }
        // The FD sign flip in S must bracket the boundary curve for this g0.
        const double Sb = *dfe_boundary_S(g0, p);
        const auto first = std::find(unstable.begin(), unstable.end(), true);
        bool ok = std::is_sorted(unstable.begin(), unstable.end());
        if (first == unstable.end()) ok = ok && Sb >= (n - 0.5) / n;
        else {
            const double hi = (static_cast<double>(first - unstable.begin()) + 0.5) / n;
            ok = ok && Sb <= hi && Sb >= hi - 1.0 / n;
        }
        boundary_ok += ok ? 1 : 0;
    }
    return {agree == n * n && boundary_ok == n,
            "sign agreement " + std::to_string(agree) + "/400, boundary bracketed in " + std::to_string(boundary_ok) + "/20 columns"};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {1, "NME feasibility bound pi1 < 40/7", 1.0, c1},
        {2, "NME spectrum closed form vs FD, complex/real transitions", 5.0, c2},
        {3, "CSE birth/collision thresholds by continuation", 120.0, c3},
        {4, "CSE self-consistency Rt0 = Rt1 = 1 and grid oracle", 60.0, c4},
        {5, "R0 boundary g0* = 1/175", 1.0, c5},
        {6, "Conservation along the case-1 principal trajectory", 30.0, c6},
        {7, "Quasi-steady closure within 10 eps", 60.0, c7},
        {8, "Burnout case: DFE endpoints and pseudo-error-catastrophe signature", 180.0, c8},
        {9, "Limit-model CSE and DFE stability", 10.0, c9},
        {10, "Case-2 DFE stability hyperbola", 30.0, c10},
    };
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));

    int failed = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome r;
        try {
            r = c.run();
        } catch (const std::exception& e) {
            r = {false, std::string("exception: ") + e.what()};
        }
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (dt > c.budget_s) {
            r.pass = false;
            r.detail += " [over runtime budget " + num(c.budget_s, 4) + " s]";
        }
        failed += r.pass ? 0 : 1;
        std::printf("%s criterion %2d: %s | %s | %.3f s\n", r.pass ? "PASS" : "FAIL", c.id, c.title, r.detail.c_str(), dt);
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
