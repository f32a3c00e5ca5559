#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "rflab/geometry.hpp"

using namespace rflab;

namespace {

constexpr double pi = std::numbers::pi;

MetricSnapshot sphere(int n, double r2, int L = 16) { return MetricSnapshot::sphere(RoundSphere{n, r2, L}); }

template <class F>
MetricSnapshot torus(int N, F&& phi, double period = 1.0) {
    return MetricSnapshot::torus(ConformalTorus2D::from_function(N, period, phi));
}

GridField torus_field(const MetricSnapshot& s, const std::function<double(double, double)>& f) {
    GridField g = s.zero_field();
    for (int p = 0; p < s.points(); ++p) g.values[p] = f((p % s.N) * s.h(), (p / s.N) * s.h());
    return g;
}

}  // namespace

TEST(Curvature, UnitSphereScalar) {
    for (int n : {2, 3}) {
        const auto s = sphere(n, 1.0);
        const auto cb = curvature_bundle(s);
        for (double R : cb.scalar) EXPECT_NEAR(R, n * (n - 1.0), 1e-12);
    }
}

TEST(Curvature, FlatTorusVanishes) {
    const auto s = torus(32, [](double, double) { return 0.0; });
    const auto cb = curvature_bundle(s);
    for (std::size_t p = 0; p < cb.scalar.size(); ++p) {
        EXPECT_EQ(cb.scalar[p], 0.0);
        EXPECT_EQ(cb.ricci[p].max_abs(), 0.0);
    }
    EXPECT_EQ(cb.K_max, 0.0);
}

TEST(Curvature, SineBumpMatchesAnalyticScalar) {
    // R = -2 e^{-2 phi} Delta_flat phi
    const double eps = 0.05;
    double prev = 0.0;
    for (int N : {32, 64, 128}) {
        const auto s = torus(N, [&](double x, double) { return eps * std::sin(2.0 * pi * x); });
        const auto cb = curvature_bundle(s);
        const double exact = 2.0 * eps * 4.0 * pi * pi * std::exp(-2.0 * eps);
        const double err = std::abs(cb.scalar[N / 4] - exact);
        EXPECT_LT(err, 1e-2 * exact);
        if (prev > 0.0) { EXPECT_NEAR(prev / err, 4.0, 0.4); }
        prev = err;
    }
}

TEST(Laplacian, ConstantsAreHarmonic) {
    const auto s = sphere(2, 1.0);
    GridField f = s.zero_field();
    f.values[0] = 3.0;
    for (double v : laplace_beltrami(f, s).values) EXPECT_EQ(v, 0.0);
    const auto t = torus(32, [](double x, double y) { return 0.1 * std::cos(2 * pi * x) * std::sin(2 * pi * y); });
    GridField c = t.zero_field();
    std::fill(c.values.begin(), c.values.end(), 2.5);
    for (double v : laplace_beltrami(c, t).values) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Laplacian, FirstSphereModeEigenvalue) {
    const auto s = sphere(2, 1.0);
    GridField f = s.zero_field();
    f.values[1] = 1.0;
    const auto L = laplace_beltrami(f, s);
    EXPECT_NEAR(L.values[1], -2.0, 1e-14);
}

TEST(Laplacian, FlatFourierModeSecondOrder) {
    double prev = 0.0;
    for (int N : {32, 64, 128}) {
        const auto s = torus(N, [](double, double) { return 0.0; });
        const auto f = torus_field(s, [](double x, double) { return std::sin(2 * pi * x); });
        const auto L = laplace_beltrami(f, s);
        double err = 0.0;
        for (int p = 0; p < s.points(); ++p) err = std::max(err, std::abs(L.values[p] + 4 * pi * pi * f.values[p]));
        if (prev > 0.0) { EXPECT_NEAR(prev / err, 4.0, 0.1); }
        prev = err;
    }
}

TEST(Hessian, FlatTorusFourierMode) {
    const int N = 64;
    const auto s = torus(N, [](double, double) { return 0.0; });
    const auto f = torus_field(s, [](double x, double) { return std::sin(2 * pi * x); });
    const auto H = covariant_hessian(f, s);
    const double h = s.h();
    for (int p = 0; p < s.points(); p += 37) {
        const double x = (p % N) * h;
        EXPECT_NEAR(H[p](0, 0), -4 * pi * pi * std::sin(2 * pi * x), 1e-3 * 4 * pi * pi);
        EXPECT_NEAR(H[p](0, 1), 0.0, 1e-10);
        EXPECT_NEAR(H[p](1, 1), 0.0, 1e-10);
    }
}

TEST(Hessian, SphereZonalClosedForm) {
    // f = cos(theta): H_thth = f'' and H_phph = sin cos f', independent of the radius
    for (double r2 : {1.0, 2.5}) {
        const auto s = sphere(2, r2);
        GridField f = s.zero_field();
        f.values = s.basis->project([](double th) { return std::cos(th); });
        const auto H = covariant_hessian(f, s);
        for (int q = 0; q < s.points(); ++q) {
            const double th = s.basis->theta[q];
            EXPECT_NEAR(H[q](0, 0), -std::cos(th), 1e-12);
            EXPECT_NEAR(H[q](1, 1), -std::sin(th) * std::sin(th) * std::cos(th), 1e-12);
        }
    }
}

TEST(Hessian, TraceIsLaplacian) {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const auto s3 = sphere(3, 1.7, 12);
    GridField f = s3.zero_field();
    for (double& v : f.values) v = U(rng);
    const auto H = covariant_hessian(f, s3);
    const auto L = point_values(laplace_beltrami(f, s3), s3);
    const auto fr = point_frame(s3);
    for (int q = 0; q < s3.points(); ++q) EXPECT_NEAR(trace(H[q], fr.ginv[q]), L[q], 1e-9 * (1.0 + std::abs(L[q])));

    const auto t = torus(48, [](double x, double y) { return 0.2 * std::sin(2 * pi * (x + 2 * y)); });
    const auto g = torus_field(t, [](double x, double y) { return std::cos(2 * pi * x) * std::exp(std::sin(2 * pi * y)); });
    const auto Ht = covariant_hessian(g, t);
    const auto Lt = laplace_beltrami(g, t);
    const auto frt = point_frame(t);
    double worst = 0.0, scale = 0.0;
    for (int p = 0; p < t.points(); ++p) {
        worst = std::max(worst, std::abs(trace(Ht[p], frt.ginv[p]) - Lt.values[p]));
        scale = std::max(scale, std::abs(Lt.values[p]));
    }
    EXPECT_LT(worst, 0.05 * scale);  // different stencils, both O(h^2)
}

TEST(Integrate, Volumes) {
    const auto s = sphere(2, 1.0);
    GridField one = s.zero_field();
    one.values = s.basis->project([](double) { return 1.0; });
    EXPECT_NEAR(integrate(one, s), 4 * pi, 1e-10);
    const auto s3 = sphere(3, 1.0);
    GridField one3 = s3.zero_field();
    one3.values = s3.basis->project([](double) { return 1.0; });
    EXPECT_NEAR(integrate(one3, s3), 2 * pi * pi, 1e-10);

    const auto flat = torus(32, [](double, double) { return 0.0; });
    GridField c = flat.zero_field();
    std::fill(c.values.begin(), c.values.end(), 1.0);
    EXPECT_NEAR(integrate(c, flat), 1.0, 1e-13);
    const auto lifted = torus(32, [](double, double) { return 0.5; });
    EXPECT_NEAR(integrate(c, lifted), std::exp(1.0), 1e-12);
}

TEST(Distance, SphereAndTorus) {
    const auto s = sphere(2, 1.0);
    const auto d = distance_proxy(sphere_point_at_angle(0.0), sphere_point_at_angle(pi), s);
    EXPECT_NEAR(d.lo, pi, 1e-12);
    EXPECT_EQ(distance_proxy(sphere_point_at_angle(0.4), sphere_point_at_angle(0.4), s).hi, 0.0);
    const auto t = torus(32, [](double, double) { return 0.0; });
    const auto w = distance_proxy(torus_point(0.0, 0.0), torus_point(0.9, 0.0), t);
    EXPECT_NEAR(w.lo, 0.1, 1e-12);
    EXPECT_NEAR(w.hi, 0.1, 1e-12);
}

TEST(Validation, BadModelsAreRejected) {
    EXPECT_THROW(MetricSnapshot::sphere(RoundSphere{4, 1.0, 16}), ConfigError);
    EXPECT_THROW(MetricSnapshot::sphere(RoundSphere{2, -1.0, 16}), ConfigError);
    EXPECT_THROW(torus(15, [](double, double) { return 0.0; }), ConfigError);
}
