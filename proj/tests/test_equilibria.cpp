#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qsmulti/qsmulti.hpp"

using namespace qsmulti;

namespace {

ModelParams case1(double pi1) {
    auto p = case1_params();
    p.pi1 = pi1;
    return p;
}

void expect_certified(const EquilibriumPoint& e) {
    EXPECT_TRUE(e.certified());
    EXPECT_LT(e.residual, kCertificateResidual);
}

} // namespace

TEST(Micro, LemmaExamples) {
    auto p = case1_params();
    p.mu = 0.4;
    const auto m = micro_equilibrium(p, 0.5);
    EXPECT_NEAR(m.g0, 0.5, 1e-15);
    EXPECT_NEAR(m.g1, 0.5, 1e-15);
    EXPECT_NEAR(m.v0, 1.25, 1e-15);
    EXPECT_NEAR(m.v1, 1.0, 1e-15);

    p.mu = 0.9;
    const auto past = micro_equilibrium(p, 0.5);
    EXPECT_EQ(past.g0, 0.0);
    EXPECT_EQ(past.g1, 1.0);
    EXPECT_EQ(past.v0, 0.0);
    EXPECT_DOUBLE_EQ(past.v1, p.xi1 / p.gamma1);

    p.mu = 1e-9;
    EXPECT_NEAR(micro_equilibrium(p, 0.5).g0, 1.0, 1e-8);
    EXPECT_THROW(micro_equilibrium(p, 0.0), DomainError);
    EXPECT_THROW(micro_equilibrium(p, 1.0), DomainError);
}

TEST(Micro, IsAFixedPointOfTheFastLayer) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(0.01, 0.99);
    auto p = case1_params();
    for (int k = 0; k < 200; ++k) {
        p.mu = U(rng);
        const double I0 = 0.3 * U(rng), I1 = 0.3 * U(rng);
        const auto m = micro_equilibrium(p, I0 / (I0 + I1));
        const auto d = rhs_full(FullState{{1.0 - I0 - I1, I0, I1, 0.0, 0.0}, m}, p);
        for (std::size_t i = idx::g0; i < kStateDim; ++i) EXPECT_NEAR(d[i], 0.0, 1e-12);
    }
}

TEST(Dfe, FreedomsAndFeasibility) {
    auto p = case1(1.0);
    const auto e = dfe_point(p, 0.3);
    EXPECT_EQ(e.macro, (MacroState{1.0, 0.0, 0.0, 0.0, 0.0}));
    EXPECT_NEAR(e.micro.v0, p.xi0 * 0.3 / p.gamma0, 1e-15);
    EXPECT_NEAR(e.micro.v1, p.xi1 * 0.7 / p.gamma1, 1e-15);
    EXPECT_LT(e.residual, 1e-12);
    EXPECT_TRUE(e.certified());
    EXPECT_EQ(e.free_params.at("g0_star"), 0.3);

    EXPECT_THROW(dfe_point(p, 0.3, {0.9, 0.1, 0.0}), InfeasibleError);
    EXPECT_THROW(dfe_point(p, 1.2), DomainError);
    p.chi = 0.0;
    const auto free = dfe_point(p, 0.5, {0.3, 0.5, 0.2});
    EXPECT_TRUE(free.certified());
    EXPECT_LT(free.residual, 1e-12);
}

TEST(Nme, ClosedFormAtPi1One) {
    const auto e = nme_point(case1(1.0));
    EXPECT_EQ(e.branch, "i1");
    EXPECT_NEAR(e.macro.S, 0.175, 1e-15);
    EXPECT_NEAR(e.macro.I1, 0.55, 1e-15);
    EXPECT_NEAR(e.macro.R, 0.275, 1e-15);
    EXPECT_EQ(e.macro.D, 0.0);
    EXPECT_EQ(e.micro, (MicroState{0.0, 1.0, 0.0, 2.0}));
    EXPECT_NEAR(nme_beta11(case1(1.0)), 40.0 / 7.0, 1e-14);
    expect_certified(e);
}

TEST(Nme, Infeasibility) {
    try {
        nme_point(case1(6.0));
        FAIL();
    } catch (const InfeasibleError& e) {
        EXPECT_LT(e.margin(), 0.0);
    }
    auto p = case1(1.0);
    p.delta1 = 0.1;
    EXPECT_THROW(nme_point(p), InfeasibleError);
    // Degenerate branch needs pi1 = 0 and its free coordinates.
    p = case1(0.0);
    p.a1 = 0.0;
    EXPECT_THROW(nme_point(p), ValidationError);
    NmeFreedoms f;
    f.S = 0.5;
    f.I1 = 0.2;
    const auto e = nme_point(p, f);
    EXPECT_EQ(e.branch, "i2");
    expect_certified(e);
}

TEST(Nmut, CaseOneHasNone) {
    const auto cases = nmut_cases(case1(1.0));
    EXPECT_EQ(cases.size(), 16u);
    for (const auto& c : cases) EXPECT_FALSE(c.feasible) << c.label << " " << to_string(c.micro);
}

TEST(Nmut, BranchI2WithoutCrossTransmission) {
    auto p = case1(1.0);
    p.a1 = 0.0;
    NmutFreedoms f;
    f.I0 = 0.1;
    int feasible = 0;
    for (const auto& c : nmut_cases(p, f)) {
        if (!c.feasible) continue;
        ++feasible;
        EXPECT_EQ(c.label, "i2");
        EXPECT_EQ(c.micro, NmutMicro::Mu);
        const auto& e = *c.point;
        const double beta00 = e.snapshot.beta00;
        EXPECT_NEAR(e.macro.S, p.pi0 / beta00, 1e-14);
        EXPECT_LE(e.macro.I0, (1.0 - p.pi0 / beta00) / (1.0 + p.pi0 / p.chi));
        EXPECT_FALSE(c.representative);
        expect_certified(e);
    }
    EXPECT_EQ(feasible, 1);

    p.delta0 = 0.2;
    for (const auto& c : nmut_cases(p, f)) EXPECT_FALSE(c.feasible);
}

TEST(Nmut, MissingFreedomUsesFlaggedMidpoint) {
    auto p = case1(1.0);
    p.a1 = 0.0;
    for (const auto& c : nmut_cases(p))
        if (c.feasible) {
            EXPECT_TRUE(c.representative);
        }
}

TEST(Cse, RootCountsAcrossPi1) {
    const std::vector<std::pair<double, std::size_t>> expected{{1.5, 0}, {3.0, 2}, {5.0, 2}, {7.0, 2}, {9.0, 1}};
    for (auto [pi1, n] : expected) {
        const auto p = case1(pi1);
        const auto pts = cse_solve(p);
        EXPECT_EQ(pts.size(), n) << pi1;
        for (const auto& e : pts) {
            expect_certified(e);
            const auto r = rt_report(e.state(), p);
            EXPECT_NEAR(*r.Rt0, 1.0, 1e-8);
            EXPECT_NEAR(*r.Rt1, 1.0, 1e-8);
            EXPECT_NEAR(r.Gt, 0.0, 1e-12);
            const double nu0 = e.snapshot.nu0;
            ASSERT_TRUE(e.snapshot.mu_crit);
            EXPECT_LT(p.mu, *e.snapshot.mu_crit);
            EXPECT_NEAR(e.micro.g0, micro_equilibrium(p, nu0).g0, 1e-10);
        }
    }
}

TEST(Cse, DeathsExcludeCoCirculation) {
    auto p = case1(5.0);
    p.delta0 = 0.1;
    EXPECT_TRUE(cse_solve(p).empty());
    const auto q = case2_params();
    EXPECT_TRUE(cse_solve(q).empty());
    EXPECT_THROW(nme_point(q), InfeasibleError);
    for (const auto& c : nmut_cases(q)) EXPECT_FALSE(c.feasible);
}

TEST(Cse, ContinuationFamiliesAreContinuous) {
    const double step = 0.025;
    const auto cont = cse_continuation(case1(1.0), 0.5, 10.0, step);
    ASSERT_GE(cont.families.size(), 2u);
    EXPECT_EQ(cont.families[0].tag, "CSE1");
    EXPECT_EQ(cont.families[1].tag, "CSE2");
    for (const auto& fam : cont.families)
        for (std::size_t k = 1; k < fam.points.size(); ++k) {
            const auto& a = fam.points[k - 1].macro;
            const auto& b = fam.points[k].macro;
            EXPECT_LT(std::hypot(a.I0 - b.I0, a.I1 - b.I1), 10.0 * step);
        }
    EXPECT_NEAR(*cont.birth_grid, 1.675, 0.05);
    EXPECT_NEAR(*cont.collision_grid, 8.875, 0.05);
    ASSERT_TRUE(cont.collision_point);
    EXPECT_LT(cont.collision_point->macro.I0, 1e-6);
    EXPECT_LT(cont.collision_point->macro.I1, 1e-6);
}

TEST(Limit, CorrectedCoCirculationPoint) {
    auto p = case1(1.0);
    const auto eq = limit_equilibria(p, 0.5);
    EXPECT_NEAR(eq.beta00, 5.0 / 1.35, 1e-12);
    EXPECT_NEAR(eq.beta01, 6.0 / 1.1, 1e-12);
    ASSERT_TRUE(eq.cse);
    const auto& c = *eq.cse;
    EXPECT_NEAR(c.S, 0.1350, 5e-5);
    EXPECT_NEAR(c.I0, 0.534551, 1e-6);
    EXPECT_NEAR(c.R, 0.330449, 1e-6);
    EXPECT_NEAR(c.S + c.I0 + c.R, 1.0, 1e-15);
    const auto d = rhs_reduced_limit(c, p, eq.beta00, eq.beta01);
    EXPECT_NEAR(d.S, 0.0, 1e-14);
    EXPECT_NEAR(d.I0, 0.0, 1e-14);
    EXPECT_NEAR(d.R, 0.0, 1e-14);
}

TEST(Limit, VanishingMasterLoad) {
    const auto p = case1(1.0);
    const auto eq = limit_equilibria(p, 0.999999);
    EXPECT_LT(eq.micro.v0, 1e-5);
    EXPECT_FALSE(eq.cse);
    EXPECT_THROW(limit_cse(p, 0.999999), InfeasibleError);
    EXPECT_THROW(limit_equilibria(p, 1.0), DomainError);
}

TEST(Catalog, PiOneFiveHasOneNmeAndTwoCse) {
    const auto cat = equilibrium_catalog(case1(5.0));
    EXPECT_TRUE(cat.nme);
    EXPECT_EQ(cat.cse.size(), 2u);
    EXPECT_FALSE(cat.dfe_segment.empty());
    expect_certified(cat.dfe_representative);
}
