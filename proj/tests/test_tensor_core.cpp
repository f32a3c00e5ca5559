#include <gtest/gtest.h>

#include <random>

#include "rflab/tensor_core.hpp"

using namespace rflab;

namespace {

SymTensor random_spd(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> N01;
    std::array<double, 9> A{}, M{};
    for (int i = 0; i < n * n; ++i) A[(i / n) * 3 + i % n] = N01(rng);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = i == j ? 0.5 : 0.0;
            for (int k = 0; k < n; ++k) s += A[i * 3 + k] * A[j * 3 + k];
            M[i * 3 + j] = s;
        }
    return SymTensor::from_rows(n, M);
}

SymTensor random_sym(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> N01;
    SymTensor s(n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) s.set(i, j, N01(rng));
    return s;
}

}  // namespace

TEST(GeneralizedEigen, DiagonalAgainstIdentity) {
    const auto e = generalized_eigenvalues(SymTensor::diag(2, {-1.0, 3.0}), SymTensor::identity(2));
    EXPECT_NEAR(e.min(), -1.0, 1e-14);
    EXPECT_NEAR(e.max(), 3.0, 1e-14);
}

TEST(GeneralizedEigen, ProportionalTensors) {
    std::mt19937_64 rng(11);
    for (int n : {2, 3}) {
        const auto g = random_spd(n, rng);
        const auto e = generalized_eigenvalues(2.0 * g, g);
        EXPECT_NEAR(e.min(), 2.0, 1e-12);
        EXPECT_NEAR(e.max(), 2.0, 1e-12);
    }
}

TEST(GeneralizedEigen, HandSolvedPencil) {
    // det(Z - l g) = 4 l^2 - 1
    const auto e = generalized_eigenvalues(SymTensor(2, {0.0, 1.0, 1.0, 0.0}), SymTensor::diag(2, {1.0, 4.0}));
    EXPECT_NEAR(e.min(), -0.5, 1e-14);
    EXPECT_NEAR(e.max(), 0.5, 1e-14);
}

TEST(GeneralizedEigen, RejectsIndefiniteMetric) {
    EXPECT_THROW(generalized_eigenvalues(SymTensor::identity(2), SymTensor::diag(2, {1.0, -1.0})), DegenerateMetricError);
    EXPECT_THROW(generalized_eigenvalues(SymTensor::identity(3), SymTensor::diag(3, {1.0, 1.0, 0.0})), DegenerateMetricError);
}

TEST(GeneralizedEigen, RejectsMixedDimensions) {
    EXPECT_THROW(generalized_eigenvalues(SymTensor::identity(2), SymTensor::identity(3)), ShapeError);
}

TEST(GeneralizedEigen, RejectsAsymmetricInput) {
    EXPECT_THROW(SymTensor(2, {1.0, 2.0, 0.0, 1.0}), ShapeError);
}

// Z x = l g x and x^T g x = 1, checked with plain matrix arithmetic
TEST(GeneralizedEigen, RandomPencilsSatisfyDefinition) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + trial % 2;
        const auto g = random_spd(n, rng);
        const auto Z = random_sym(n, rng);
        const auto e = generalized_eigenvalues(Z, g);
        double tr = 0.0;
        const auto gi = inverse(g);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) tr += gi(i, j) * Z(j, i);
        double sum = 0.0;
        for (int a = 0; a < n; ++a) {
            sum += e.values[a];
            const auto& x = e.vectors[a];
            for (int i = 0; i < n; ++i) {
                double zx = 0.0, gx = 0.0;
                for (int j = 0; j < n; ++j) {
                    zx += Z(i, j) * x[j];
                    gx += g(i, j) * x[j];
                }
                EXPECT_NEAR(zx, e.values[a] * gx, 1e-9 * (1.0 + Z.max_abs()));
            }
            for (int b = 0; b < n; ++b) {
                double ip = 0.0;
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) ip += e.vectors[a][i] * g(i, j) * e.vectors[b][j];
                EXPECT_NEAR(ip, a == b ? 1.0 : 0.0, 1e-9);
            }
            if (a > 0) { EXPECT_LE(e.values[a - 1], e.values[a]); }
        }
        EXPECT_NEAR(sum, tr, 1e-9 * (1.0 + std::abs(tr)));
    }
}

TEST(CurvTensor, ConstantCurvatureSymmetries) {
    std::mt19937_64 rng(5);
    for (int n : {2, 3}) {
        const auto g = random_spd(n, rng);
        const auto Rm = CurvTensor::constant_curvature(0.7, g);
        EXPECT_LT(Rm.symmetry_defect(), 1e-12);
        // g^{bd} R_abcd = (n-1) K g_ac
        const auto gi = inverse(g);
        for (int a = 0; a < n; ++a)
            for (int c = 0; c < n; ++c) {
                double ric = 0.0;
                for (int b = 0; b < n; ++b)
                    for (int d = 0; d < n; ++d) ric += gi(b, d) * Rm(a, b, c, d);
                EXPECT_NEAR(ric, (n - 1) * 0.7 * g(a, c), 1e-12);
            }
    }
}

TEST(CurvTensor, ActionOnSymmetricTensorMatchesClosedForm) {
    // R(i,k,j,l) h^{kl} = K (g_ij tr h - h_ij) for constant curvature
    std::mt19937_64 rng(8);
    for (int n : {2, 3}) {
        const auto g = random_spd(n, rng);
        const auto gi = inverse(g);
        const auto h = random_sym(n, rng);
        const double K = 1.3;
        const auto A = curvature_action(CurvTensor::constant_curvature(K, g), h, gi);
        const double tr = trace(h, gi);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) EXPECT_NEAR(A(i, j), K * (g(i, j) * tr - h(i, j)), 1e-10);
    }
}

TEST(HarnackQuadratic, OnlyMatrixTermSurvives) {
    const double q = harnack_quadratic(SymTensor::identity(2), Tensor3(2), CurvTensor(2), Vec(2, {0.0, 0.0}), Vec(2, {1.0, 0.0}),
                                       SymTensor::identity(2));
    EXPECT_DOUBLE_EQ(q, 1.0);
}

TEST(HarnackQuadratic, EinsteinSphereSpotValue) {
    // r^2 = 1 - 2t at t = 0.1, M = Ric^2-type closed form (n-1)^2/r^4 + (n-1)/(2 t r^2)
    const double r2 = 0.8, t = 0.1;
    const auto g = SymTensor::identity(2) * r2;
    const double m = 1.0 / (r2 * r2) + 1.0 / (2.0 * t * r2);
    // M as a bilinear form on unit w: M_ij = m g_ij
    const auto M = g * m;
    Vec w(2, {1.0 / std::sqrt(r2), 0.0});
    const double q = harnack_quadratic(M, Tensor3(2), CurvTensor::constant_curvature(1.0 / r2, g), Vec(2, {0.0, 0.0}), w, g);
    EXPECT_NEAR(q, 7.8125, 1e-12);
}

TEST(HarnackQuadratic, ParallelVectorsKillCurvatureTerm) {
    const auto g = SymTensor::diag(3, {1.0, 2.0, 3.0});
    Vec v(3, {0.3, -0.2, 0.5});
    const double with_rm = harnack_quadratic(SymTensor(3), Tensor3(3), CurvTensor::constant_curvature(2.0, g), v, v, g);
    EXPECT_NEAR(with_rm, 0.0, 1e-14);
}

TEST(HarnackQuadratic, ShapeMismatchThrows) {
    EXPECT_THROW(harnack_quadratic(SymTensor::identity(2), Tensor3(3), CurvTensor(2), Vec(2), Vec(2), SymTensor::identity(2)), ShapeError);
}

TEST(SymTensorOps, ProductIsSymmetrizedMatrixProduct) {
    std::mt19937_64 rng(3);
    const auto a = random_sym(3, rng), b = random_sym(3, rng);
    const auto gi = SymTensor::identity(3);
    const auto p = product(a, gi, b);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double ab = 0.0, ba = 0.0;
            for (int k = 0; k < 3; ++k) {
                ab += a(i, k) * b(k, j);
                ba += b(i, k) * a(k, j);
            }
            EXPECT_NEAR(p(i, j), 0.5 * (ab + ba), 1e-13);
        }
}
