#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "rflab/harnack.hpp"

using namespace rflab;

namespace {

constexpr double pi = std::numbers::pi;

TrajPtr sphere_traj(double T, double dt, FlowMode m = FlowMode::exact_sphere, int n = 2, double r2 = 1.0) {
    return std::make_shared<const FlowTrajectory>(evolve_ricci_flow(MetricSnapshot::sphere(RoundSphere{n, r2, 32}), FlowConfig{T, dt, m}));
}

GridField zonal(const MetricSnapshot& s, const std::function<double(double)>& f) {
    GridField g = s.zero_field();
    g.values = s.basis->project(f);
    return g;
}

}  // namespace

TEST(CorrectionC, ClosedFormValues) {
    EXPECT_NEAR(correction_c(1.0, std::log(2.0) / 2.0), 2.0, 1e-13);
    EXPECT_NEAR(correction_c(1.0, 1.0), 1.0 / (1.0 - std::exp(-2.0)), 1e-13);
    EXPECT_NEAR(correction_c(1.0, 1.0), 1.156518, 1e-6);
    EXPECT_DOUBLE_EQ(correction_c(0.0, 0.5), 1.0);
}

TEST(CorrectionC, SmallKappaLimit) {
    for (double k : {1e-3, 1e-6, 1e-9}) EXPECT_NEAR(correction_c(k, 1.0), 0.5, 2.0 * k);
}

TEST(CorrectionC, SandwichAndOdeOnGrid) {
    for (int i = 1; i <= 20; ++i)
        for (int j = 1; j <= 20; ++j) {
            const double kappa = 0.25 * i, t = 0.05 * j;
            const auto r = correction_c_full(kappa, t);
            EXPECT_GT(r.value, 0.5 / t);
            EXPECT_LT(r.value, 0.5 / t + kappa);
            EXPECT_LE(std::abs(r.residual), 1e-10 * std::max(1.0, std::abs(r.derivative)));
        }
}

TEST(CorrectionC, BadArgumentsAreDomainErrors) {
    EXPECT_THROW(correction_c(1.0, 0.0), DomainError);
    EXPECT_THROW(correction_c(-1.0, 1.0), DomainError);
}

TEST(Eta, ExplicitValue) {
    EXPECT_NEAR(eta_correction(1.0, 0.5, 1.0, EtaVariant::explicit_eta), 2.581977, 1e-6);
}

TEST(Eta, AncientSolvesItsOde) {
    EXPECT_NEAR(eta_correction(0.0, 0.25, 0.5, EtaVariant::ancient), 2.0, 1e-14);
    for (double t : {0.1, 0.3, 0.45}) {
        const auto r = eta_correction_full(1.5, t, 0.5, EtaVariant::ancient);
        EXPECT_LE(std::abs(r.residual), 1e-10 * std::max(1.0, std::abs(r.derivative)));
    }
}

TEST(Eta, BothVariantsBlowUpAtT) {
    for (double kappa : {0.0, 0.5, 2.0}) {
        EXPECT_TRUE(eta_blows_up(kappa, 1.0, EtaVariant::explicit_eta));
        EXPECT_TRUE(eta_blows_up(kappa, 1.0, EtaVariant::ancient));
    }
    EXPECT_THROW(eta_correction(1.0, 1.0, 1.0, EtaVariant::ancient), DomainError);
}

TEST(HeatLyh, HoldsOnShrinkingSphere) {
    const auto tr = sphere_traj(0.2, 2e-3);
    const auto sol = solve_heat_forward(tr, zonal(tr->at(0), [](double th) { return 2.0 + std::cos(th); }));
    const auto rep = heat_lyh_report(sol, certify(*tr).kappa);
    EXPECT_EQ(rep.verdict, Verdict::holds);
    EXPECT_GT(rep.extreme, 0.0);
    EXPECT_EQ(rep.extra["trace_verdict"], "holds");
}

TEST(HeatLyh, KappaBelowCertificateIsRejected) {
    const auto tr = sphere_traj(0.2, 2e-3);
    const auto sol = solve_heat_forward(tr, zonal(tr->at(0), [](double th) { return 2.0 + std::cos(th); }));
    EXPECT_THROW(heat_lyh_report(sol, 0.5), HypothesisError);
}

TEST(ConjugateLyh, HoldsOnShrinkingSphereBothVariants) {
    const auto tr = sphere_traj(0.2, 2e-3);
    const auto sol = solve_conjugate_backward(tr, zonal(tr->at(0), [](double th) { return 2.0 + std::cos(th); }));
    for (auto v : {EtaVariant::explicit_eta, EtaVariant::ancient}) {
        const auto rep = conjugate_lyh_report(sol, certify(*tr).kappa, v);
        EXPECT_EQ(rep.verdict, Verdict::holds) << eta_variant_name(v);
        EXPECT_LT(rep.extreme, 0.0);
    }
}

TEST(Hypotheses, BumpyTorusIsNotCertified) {
    const auto s = MetricSnapshot::torus(ConformalTorus2D::from_function(32, 1.0, [](double x, double y) {
        return 0.1 * std::sin(2 * pi * x) * std::cos(2 * pi * y);
    }));
    const auto tr = std::make_shared<const FlowTrajectory>(evolve_ricci_flow(s, FlowConfig{0.002, 1e-4, FlowMode::numerical_torus}));
    GridField u = s.zero_field();
    std::fill(u.values.begin(), u.values.end(), 1.0);
    const auto sol = solve_heat_forward(tr, u);
    EXPECT_THROW(heat_lyh_report(sol, 1.0), HypothesisError);
    EXPECT_THROW(conjugate_lyh_report(solve_conjugate_backward(tr, u), 1.0, EtaVariant::ancient), HypothesisError);
    EXPECT_THROW(brendle_harnack_report(*tr, 10, 1), HypothesisError);
    // the fit-only report still runs
    EXPECT_NO_THROW(general_beta_report(sol, {}));
}

TEST(Brendle, NonnegativeOnShrinkingSphereAndDeterministic) {
    const auto tr = sphere_traj(0.3, 0.01, FlowMode::exact_sphere, 3, 2.0);
    const auto a = brendle_harnack_report(*tr, 300, 42);
    const auto b = brendle_harnack_report(*tr, 300, 42);
    EXPECT_EQ(a.verdict, Verdict::holds);
    EXPECT_EQ(a.data.dump(), b.data.dump());
    const auto c = brendle_harnack_report(*tr, 300, 43);
    EXPECT_NE(a.data["min_random"], c.data["min_random"]);
}

TEST(Brendle, StaticSphereIsOutOfScope) {
    const auto tr = sphere_traj(0.1, 0.01, FlowMode::static_metric);
    EXPECT_THROW(brendle_harnack_report(*tr, 10, 1), HypothesisError);
}

TEST(GeneralBeta, DominatesEmpiricalOnSphere) {
    const auto tr = sphere_traj(0.2, 2e-3);
    const auto sol = solve_heat_forward(tr, zonal(tr->at(0), [](double th) { return 2.0 + std::cos(th); }));
    const auto rep = general_beta_report(sol, {});
    EXPECT_NE(rep.verdict, Verdict::violated);
}

TEST(StaticHamilton, StaticOnly) {
    const auto tr = sphere_traj(0.2, 2e-3);
    const auto sol = solve_heat_forward(tr, zonal(tr->at(0), [](double th) { return 2.0 + std::cos(th); }));
    EXPECT_THROW(static_hamilton_report(sol, {}), HypothesisError);
}
