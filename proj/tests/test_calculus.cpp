#include <gtest/gtest.h>

#include <numbers>

#include "rflab/calculus.hpp"

using namespace rflab;

namespace {

constexpr double pi = std::numbers::pi;

TrajPtr make_traj(const MetricSnapshot& s, double T, double dt, FlowMode m, int store_every = 1) {
    return std::make_shared<const FlowTrajectory>(evolve_ricci_flow(s, FlowConfig{T, dt, m, 0.9, store_every}));
}

MetricSnapshot flat(int N) { return MetricSnapshot::torus(ConformalTorus2D::from_function(N, 1.0, [](double, double) { return 0.0; })); }

MetricSnapshot bumpy(int N) {
    return MetricSnapshot::torus(ConformalTorus2D::from_function(N, 1.0, [](double x, double y) {
        return 0.1 * std::sin(2 * pi * x) * std::cos(2 * pi * y);
    }));
}

GridField torus_field(const MetricSnapshot& s, const std::function<double(double, double)>& f) {
    GridField g = s.zero_field();
    for (int p = 0; p < s.points(); ++p) g.values[p] = f((p % s.N) * s.h(), (p / s.N) * s.h());
    return g;
}

}  // namespace

TEST(LogDerivatives, ConstantHasNoDerivatives) {
    const auto tr = make_traj(bumpy(32), 0.002, 1e-4, FlowMode::numerical_torus);
    GridField c = tr->at(0).zero_field();
    std::fill(c.values.begin(), c.values.end(), 4.0);
    const auto sol = solve_heat_forward(tr, c);
    const auto L = log_derivatives(sol, 5);
    for (std::size_t p = 0; p < L.v.size(); ++p) {
        EXPECT_NEAR(L.hessian[p].max_abs(), 0.0, 1e-10);
        EXPECT_NEAR(L.grad_v_sq[p], 0.0, 1e-20);
    }
}

TEST(LogDerivatives, GaussianHessianIsExactOnFlatPatch) {
    const int N = 64;
    const auto s = flat(N);
    const double t = 0.01;
    GridField u = torus_field(s, [&](double x, double y) {
        const double r2 = (x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5);
        return std::exp(-r2 / (4 * t)) / (4 * pi * t);
    });
    const auto L = log_jets(u, s, point_frame(s), false);
    // interior, away from the seam
    for (int j = 16; j < 48; j += 5)
        for (int i = 16; i < 48; i += 5) {
            const auto& H = L.hessian[j * N + i];
            EXPECT_NEAR(H(0, 0), -1.0 / (2 * t), 1e-8);
            EXPECT_NEAR(H(1, 1), -1.0 / (2 * t), 1e-8);
            EXPECT_NEAR(H(0, 1), 0.0, 1e-8);
        }
}

TEST(LogDerivatives, FourierDataSecondOrder) {
    double prev = 0.0;
    for (int N : {32, 64, 128}) {
        const auto s = flat(N);
        const auto u = torus_field(s, [](double x, double) { return 2.0 + std::sin(2 * pi * x); });
        const auto L = log_jets(u, s, point_frame(s), false);
        double err = 0.0;
        for (int p = 0; p < s.points(); ++p) {
            const double x = (p % N) * s.h();
            const double sn = std::sin(2 * pi * x), cs = std::cos(2 * pi * x);
            const double exact = -4 * pi * pi * sn / (2 + sn) - std::pow(2 * pi * cs / (2 + sn), 2);
            err = std::max(err, std::abs(L.hessian[p](0, 0) - exact));
        }
        if (prev > 0.0) { EXPECT_NEAR(prev / err, 4.0, 0.4); }
        prev = err;
    }
}

TEST(LogDerivatives, NonpositiveDataIsADomainError) {
    const auto s = flat(32);
    auto u = torus_field(s, [](double x, double) { return std::sin(2 * pi * x); });
    EXPECT_THROW(log_jets(u, s, point_frame(s), false), DomainError);
}

TEST(EvolutionResidual, ConstantConjugateOnShrinkingSphere) {
    const auto tr = make_traj(MetricSnapshot::sphere(RoundSphere{2, 1.0, 16}), 0.2, 0.002, FlowMode::exact_sphere);
    GridField f = tr->at(0).zero_field();
    f.values[0] = 1.0;
    const auto sol = solve_conjugate_backward(tr, f);
    EXPECT_LE(evolution_residual(sol, -1.0, 1.0).linf, 1e-10);
    EXPECT_THROW(evolution_residual(sol, 1.0, 0.0), ConfigError);
}

TEST(EvolutionResidual, TorusFlowSecondOrder) {
    std::vector<double> r;
    for (int lvl = 0; lvl < 3; ++lvl) {
        const int N = 16 << lvl;
        const auto tr = make_traj(bumpy(N), 0.004, 4e-4 / (1 << (2 * lvl)), FlowMode::numerical_torus, 1 << lvl);
        const auto u = torus_field(tr->at(0), [](double x, double y) { return 2.0 + std::cos(2 * pi * x) * std::sin(2 * pi * y); });
        r.push_back(evolution_residual(solve_heat_forward(tr, u), 1.0, 0.0, 6).linf);
    }
    EXPECT_NEAR(std::log2(r[1] / r[2]), 2.0, 0.4);
}

TEST(Commutator, SpatiallyConstantFieldsVanish) {
    const auto tr = make_traj(bumpy(32), 0.002, 1e-4, FlowMode::numerical_torus);
    std::vector<GridField> f(tr->count(), tr->at(0).zero_field());
    for (int k = 0; k < tr->count(); ++k) std::fill(f[k].values.begin(), f[k].values.end(), 1.0 + tr->time(k));
    EXPECT_NEAR(lichnerowicz_commutator_residual(f, *tr, 1.0, 6).linf, 0.0, 1e-8);
}

// Christoffel symbols do not change under homothety, so every term is exact and
// both sides vanish for a heat solution
TEST(Commutator, ExactOnShrinkingSphere) {
    const auto tr = make_traj(MetricSnapshot::sphere(RoundSphere{3, 2.0, 16}), 0.2, 0.004, FlowMode::exact_sphere);
    GridField u0 = tr->at(0).zero_field();
    u0.values[0] = 1.0;
    u0.values[2] = 0.2;
    const auto sol = solve_heat_forward(tr, u0);
    EXPECT_LE(lichnerowicz_commutator_residual(sol.values, *tr, 1.0, 8).linf, 1e-11);
    // a field that is not a heat solution keeps both sides nonzero
    std::vector<GridField> f(tr->count(), u0);
    const auto r = lichnerowicz_commutator_residual(f, *tr, 1.0, 8);
    EXPECT_GT(r.scale, 1e-3);
    EXPECT_LE(r.linf, 1e-11 * r.scale);
}

TEST(ClassicalIdentities, ConstantSolutionHasZeroResidual) {
    const auto tr = make_traj(MetricSnapshot::sphere(RoundSphere{2, 1.0, 16}), 0.2, 0.01, FlowMode::static_metric);
    GridField f = tr->at(0).zero_field();
    f.values[0] = 2.0;
    for (const auto& r : classical_identity_residuals(solve_heat_forward(tr, f))) EXPECT_LE(r.linf, 1e-12);
}

TEST(ClassicalIdentities, FlatTorusSecondOrderInSpace) {
    std::vector<double> r;
    for (int lvl = 0; lvl < 2; ++lvl) {
        const int N = 32 << lvl;
        const auto tr = make_traj(flat(N), 0.002, 1e-4 / (1 << (2 * lvl)), FlowMode::static_metric, 1 << lvl);
        const auto u = torus_field(tr->at(0), [](double x, double y) { return 3.0 + std::sin(2 * pi * x) + std::cos(2 * pi * y); });
        double worst = 0.0;
        for (const auto& rr : classical_identity_residuals(solve_heat_forward(tr, u), 4)) worst = std::max(worst, rr.linf);
        r.push_back(worst);
    }
    EXPECT_NEAR(std::log2(r[0] / r[1]), 2.0, 0.4);
}
