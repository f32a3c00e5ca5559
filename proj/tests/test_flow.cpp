#include <gtest/gtest.h>

#include <filesystem>
#include <numbers>

#include "rflab/flow.hpp"

using namespace rflab;

namespace {

constexpr double pi = std::numbers::pi;

FlowTrajectory bump_flow(int N, double dt, double T, int store_every = 1) {
    const auto s = MetricSnapshot::torus(ConformalTorus2D::from_function(N, 1.0, [](double x, double y) {
        return 0.1 * std::sin(2 * pi * x) * std::cos(2 * pi * y);
    }));
    return evolve_ricci_flow(s, FlowConfig{T, dt, FlowMode::numerical_torus, 0.9, store_every});
}

}  // namespace

TEST(SphereFlow, RadiusShrinksLinearly) {
    const auto tr = evolve_ricci_flow(MetricSnapshot::sphere(RoundSphere{2, 1.0, 16}), FlowConfig{0.3, 0.01, FlowMode::exact_sphere});
    const int k = static_cast<int>(std::lround(0.25 / tr.dt));
    EXPECT_NEAR(tr.at(k).radius_sq, 0.5, 1e-14);
    EXPECT_NEAR(tr.extinction_time(), 0.5, 1e-15);
}

TEST(SphereFlow, ExtinctionIsAHorizonError) {
    EXPECT_THROW(evolve_ricci_flow(MetricSnapshot::sphere(RoundSphere{3, 1.0, 16}), FlowConfig{0.3, 0.01, FlowMode::exact_sphere}),
                 HorizonError);
}

TEST(SphereFlow, ResidualAtRoundingFloor) {
    const auto tr = evolve_ricci_flow(MetricSnapshot::sphere(RoundSphere{3, 2.0, 16}), FlowConfig{0.4, 0.005, FlowMode::exact_sphere});
    EXPECT_LE(ricci_flow_residual(tr), 1e-10);
}

TEST(TorusFlow, ConstantConformalFactorIsFixed) {
    const auto s = MetricSnapshot::torus(ConformalTorus2D::from_function(32, 1.0, [](double, double) { return 0.3; }));
    const auto tr = evolve_ricci_flow(s, FlowConfig{0.01, 2e-4, FlowMode::numerical_torus});
    for (int k = 0; k < tr.count(); ++k)
        for (double v : *tr.at(k).phi) EXPECT_EQ(v, 0.3);
    EXPECT_EQ(ricci_flow_residual(tr), 0.0);
}

TEST(TorusFlow, StaticFlatResidualIsZero) {
    const auto s = MetricSnapshot::torus(ConformalTorus2D::from_function(32, 1.0, [](double, double) { return 0.0; }));
    const auto tr = evolve_ricci_flow(s, FlowConfig{0.01, 2e-4, FlowMode::static_metric});
    EXPECT_EQ(ricci_flow_residual(tr), 0.0);
}

TEST(TorusFlow, CflViolationNamesTheBound) {
    try {
        bump_flow(32, 1e-3, 0.01);
        FAIL() << "expected a configuration error";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("CFL"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("h^2"), std::string::npos);
    }
}

TEST(TorusFlow, ResidualConvergesAtSecondOrder) {
    // h and stored dt halve; internal dt quarters
    const double r1 = ricci_flow_residual(bump_flow(16, 4e-4, 0.008, 1));
    const double r2 = ricci_flow_residual(bump_flow(32, 1e-4, 0.008, 2));
    const double r3 = ricci_flow_residual(bump_flow(64, 2.5e-5, 0.008, 4));
    EXPECT_NEAR(std::log2(r1 / r2), 2.0, 0.4);
    EXPECT_NEAR(std::log2(r2 / r3), 2.0, 0.4);
}

TEST(TorusFlow, OscillationDoesNotGrow) {
    const auto tr = bump_flow(32, 1e-4, 0.02);
    double prev = 1e300;
    for (int k = 0; k < tr.count(); k += 10) {
        const auto& p = *tr.at(k).phi;
        const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
        EXPECT_LE(*hi - *lo, prev + 1e-12);
        prev = *hi - *lo;
    }
}

TEST(TorusFlow, InterpolationIsExactAtStoredTimes) {
    const auto tr = bump_flow(32, 1e-4, 0.01, 2);
    const auto m = tr.at_time(tr.time(3));
    EXPECT_EQ(*m.phi, *tr.at(3).phi);
    EXPECT_THROW(tr.at_time(0.02), DomainError);
}

TEST(TorusFlow, SaveLoadRoundTrip) {
    const auto tr = bump_flow(16, 2e-4, 0.002);
    const auto dir = std::filesystem::temp_directory_path() / "rflab_traj_test";
    std::filesystem::remove_all(dir);
    save_trajectory(tr, dir.string());
    const auto back = load_trajectory(dir.string());
    ASSERT_EQ(back.count(), tr.count());
    EXPECT_EQ(*back.at(back.count() - 1).phi, *tr.at(tr.count() - 1).phi);
    std::filesystem::remove_all(dir);
}
