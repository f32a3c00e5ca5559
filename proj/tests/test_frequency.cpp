#include <gtest/gtest.h>

#include <numbers>

#include "rflab/frequency.hpp"

using namespace rflab;

namespace {

constexpr double pi = std::numbers::pi;

TrajPtr sphere_traj(double T, double dt, int L = 32, FlowMode m = FlowMode::exact_sphere) {
    return std::make_shared<const FlowTrajectory>(evolve_ricci_flow(MetricSnapshot::sphere(RoundSphere{2, 1.0, L}), FlowConfig{T, dt, m}));
}

GridField zonal(const MetricSnapshot& s, const std::function<double(double)>& f) {
    GridField g = s.zero_field();
    g.values = s.basis->project(f);
    return g;
}

TrajPtr flat_traj(int N, double T, double dt) {
    const auto s = MetricSnapshot::torus(ConformalTorus2D::from_function(N, 1.0, [](double, double) { return 0.0; }));
    return std::make_shared<const FlowTrajectory>(evolve_ricci_flow(s, FlowConfig{T, dt, FlowMode::static_metric}));
}

}  // namespace

TEST(FrequencySeries, ConstantOnShrinkingSphereIsScalarCurvature) {
    const auto tr = sphere_traj(0.3, 0.005);
    const auto u = solve_conjugate_backward(tr, zonal(tr->at(0), [](double) { return 1.0; }));
    const auto fs = frequency_series(u, nullptr);
    for (int i = 0; i < fs.size(); ++i) {
        EXPECT_NEAR(fs.D[i], 0.0, 1e-12);
        EXPECT_NEAR(fs.F[i], 2.0 / (1.0 - 2.0 * fs.times[i]), 1e-10);
    }
}

TEST(FrequencySeries, UnitOnFlatTorus) {
    const auto tr = flat_traj(32, 0.002, 1e-4);
    GridField one = tr->at(0).zero_field();
    std::fill(one.values.begin(), one.values.end(), 1.0);
    const auto fs = frequency_series(solve_conjugate_backward(tr, one), nullptr);
    for (int i = 0; i < fs.size(); ++i) {
        EXPECT_NEAR(fs.I[i], 1.0, 1e-13);
        EXPECT_EQ(fs.D[i], 0.0);
        EXPECT_EQ(fs.S[i], 0.0);
    }
}

TEST(FrequencyResiduals, SecondOrderInTimeOnSphere) {
    std::vector<std::vector<ResidualReport>> runs;
    for (double dt : {0.004, 0.002}) {
        const auto tr = sphere_traj(0.2, dt);
        const auto u = solve_conjugate_backward(tr, zonal(tr->at(0), [](double th) { return 1.5 + std::cos(th) + 0.3 * std::cos(2 * th); }));
        runs.push_back(frequency_derivative_residuals(frequency_series(u, nullptr)));
    }
    for (int j = 0; j < 4; ++j) {
        ASSERT_GT(runs[1][j].linf, 0.0) << runs[0][j].name;
        EXPECT_NEAR(std::log2(runs[0][j].linf / runs[1][j].linf), 2.0, 0.3) << runs[0][j].name;
    }
}

TEST(FrequencyResiduals, KernelWeightedSphereIsSmall) {
    const auto tr = sphere_traj(0.2, 1e-3, 48);
    const auto G = approximate_heat_kernel(tr, sphere_point_at_angle(0.0), 0.05);
    const auto u = solve_conjugate_backward(tr, zonal(tr->at(0), [](double th) { return 2.0 + std::cos(th); }));
    const auto fs = frequency_series(u, &G);
    for (const auto& r : frequency_derivative_residuals(fs)) EXPECT_LT(r.linf_normalized, 1e-3) << r.name;
    EXPECT_LE(cauchy_schwarz_excess(fs), 1e-10);

    const auto mono = corrected_frequency_series(fs, FrequencyVariant::sec_nonneg);
    EXPECT_TRUE(mono.certified);
    EXPECT_EQ(mono.verdict, Verdict::holds);
    EXPECT_THROW(corrected_frequency_series(fs, FrequencyVariant::unweighted), ConfigError);
}

TEST(Monotonicity, UnweightedLogConvexOnSphere) {
    const auto tr = sphere_traj(0.2, 2e-3);
    const auto u = solve_conjugate_backward(tr, zonal(tr->at(0), [](double th) { return 1.5 + std::cos(th); }));
    const auto r = corrected_frequency_series(frequency_series(u, nullptr), FrequencyVariant::unweighted);
    EXPECT_EQ(r.verdict, Verdict::holds);
    EXPECT_TRUE(r.params["decomposition_holds"].get<bool>());
}

TEST(Monotonicity, ConjugateWeightOnSphere) {
    const auto tr = sphere_traj(0.2, 2e-3);
    const auto u = solve_heat_forward(tr, zonal(tr->at(0), [](double th) { return std::cos(th) + 0.2 * std::cos(2 * th); }));
    const auto w = solve_conjugate_backward(tr, zonal(tr->at(0), [](double th) { return 2.0 + std::cos(th); }));
    const auto fs = conjugate_weight_series(u, w, 10 * tr->dt);
    FrequencyParams prm;
    const auto r = corrected_frequency_series(fs, FrequencyVariant::conjugate_weight, prm);
    EXPECT_EQ(r.direction, "nonincreasing");
    EXPECT_EQ(r.verdict, Verdict::holds);
    EXPECT_THROW(frequency_derivative_residuals(fs), ConfigError);
}

TEST(FrequencyErrors, StaticNonFlatIsAConfigError) {
    const auto tr = sphere_traj(0.1, 0.01, 16, FlowMode::static_metric);
    const auto u = solve_conjugate_backward(tr, zonal(tr->at(0), [](double) { return 1.0; }));
    EXPECT_THROW(frequency_series(u, nullptr), ConfigError);
}

TEST(FrequencyErrors, ZeroSolutionIsADomainError) {
    const auto tr = flat_traj(16, 0.002, 2e-4);
    const auto u = solve_conjugate_backward(tr, tr->at(0).zero_field());
    EXPECT_THROW(frequency_series(u, nullptr), DomainError);
}

TEST(FrequencyErrors, HeatSolutionRejected) {
    const auto tr = flat_traj(16, 0.002, 2e-4);
    GridField f = tr->at(0).zero_field();
    for (int p = 0; p < 256; ++p) f.values[p] = 2.0 + std::sin(2 * pi * (p % 16) / 16.0);
    EXPECT_THROW(frequency_series(solve_heat_forward(tr, f), nullptr), ConfigError);
}
