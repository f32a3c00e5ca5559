#pragma once
// Zonal harmonics on S^2 (Legendre) and S^3 (Chebyshev U), written as cosine
// series in the polar angle so that theta-derivatives of any order are exact.

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <utility>
#include <vector>

#include "rflab/errors.hpp"

namespace rflab {

class ZonalBasis {
public:
    int n = 2;   // sphere dimension
    int L = 8;   // highest mode
    int Q = 0;   // quadrature nodes
    std::vector<double> theta;  // nodes, ascending in theta
    std::vector<double> mu;     // unit-sphere measure weights at nodes
    std::vector<double> norm;   // integral of Y_l^2 over the unit sphere

    static std::shared_ptr<const ZonalBasis> get(int n, int L) {
        static std::mutex m;
        static std::map<std::pair<int, int>, std::shared_ptr<const ZonalBasis>> cache;
        std::lock_guard<std::mutex> lk(m);
        auto& slot = cache[{n, L}];
        if (!slot) slot = std::shared_ptr<const ZonalBasis>(new ZonalBasis(n, L));
        return slot;
    }

    double lambda(int l) const { return l * (l + n - 1.0); }

    // Y_l(theta) = sum_m C[l][m] cos(m theta)
    double cos_coef(int l, int m) const { return C_[l * (L + 1) + m]; }

    std::vector<double> to_cosine(const std::vector<double>& a) const {
        std::vector<double> b(L + 1, 0.0);
        for (int l = 0; l <= L; ++l)
            for (int m = 0; m <= l; ++m) b[m] += a[l] * cos_coef(l, m);
        return b;
    }

    // k-th theta-derivative of a cosine series
    static double eval_cosine(const std::vector<double>& b, double th, int k) {
        double s = 0.0;
        for (std::size_t m = 0; m < b.size(); ++m) {
            if (b[m] == 0.0) continue;
            const double mm = static_cast<double>(m);
            const double arg = mm * th + k * 0.5 * std::numbers::pi;
            s += b[m] * std::pow(mm, k) * std::cos(arg);
        }
        return s;
    }

    double eval(const std::vector<double>& a, double th, int k = 0) const { return eval_cosine(to_cosine(a), th, k); }

    std::vector<double> at_nodes(const std::vector<double>& a, int k = 0) const {
        const auto b = to_cosine(a);
        std::vector<double> v(Q);
        for (int q = 0; q < Q; ++q) v[q] = eval_cosine(b, theta[q], k);
        return v;
    }

    double basis_at(int l, double th) const {
        double s = 0.0;
        for (int m = 0; m <= l; ++m) s += cos_coef(l, m) * std::cos(m * th);
        return s;
    }

    std::vector<double> project_nodes(const std::vector<double>& vals) const {
        std::vector<double> a(L + 1, 0.0);
        for (int l = 0; l <= L; ++l) {
            double s = 0.0;
            for (int q = 0; q < Q; ++q) s += mu[q] * vals[q] * Ybuf_[l * Q + q];
            a[l] = s / norm[l];
        }
        return a;
    }

    std::vector<double> project(const std::function<double(double)>& f) const {
        std::vector<double> vals(Q);
        for (int q = 0; q < Q; ++q) vals[q] = f(theta[q]);
        return project_nodes(vals);
    }

    double unit_volume() const { return n == 2 ? 4.0 * std::numbers::pi : 2.0 * std::numbers::pi * std::numbers::pi; }

private:
    ZonalBasis(int n_, int L_) : n(n_), L(L_) {
        if (n != 2 && n != 3) throw ShapeError("zonal basis needs n in {2,3}");
        if (L < 1) throw ShapeError("zonal basis needs L >= 1");
        Q = (3 * L) / 2 + 2;
        C_.assign((L + 1) * (L + 1), 0.0);
        if (n == 2) {
            std::vector<double> c(L + 1);
            c[0] = 1.0;
            for (int j = 1; j <= L; ++j) c[j] = c[j - 1] * (2.0 * j - 1.0) / (2.0 * j);
            for (int l = 0; l <= L; ++l)
                for (int j = 0; j <= l; ++j) C_[l * (L + 1) + std::abs(l - 2 * j)] += c[j] * c[l - j];
        } else {
            for (int l = 0; l <= L; ++l)
                for (int j = 0; j <= l; ++j) C_[l * (L + 1) + std::abs(l - 2 * j)] += 1.0;
        }
        theta.resize(Q);
        mu.resize(Q);
        if (n == 2) {
            // Gauss-Legendre in x = cos(theta), Newton on P_Q.
            for (int i = 0; i < Q; ++i) {
                double x = std::cos(std::numbers::pi * (i + 0.75) / (Q + 0.5));
                double dp = 1.0;
                for (int it = 0; it < 100; ++it) {
                    double p0 = 1.0, p1 = x;
                    for (int k = 2; k <= Q; ++k) {
                        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                        p0 = p1;
                        p1 = p2;
                    }
                    dp = Q * (x * p1 - p0) / (x * x - 1.0);
                    const double dx = p1 / dp;
                    x -= dx;
                    if (std::abs(dx) < 1e-16) break;
                }
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= Q; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = Q * (x * p1 - p0) / (x * x - 1.0);
                theta[i] = std::acos(x);
                mu[i] = 2.0 * std::numbers::pi * 2.0 / ((1.0 - x * x) * dp * dp);
            }
        } else {
            // Gauss-Chebyshev of the second kind: weight sqrt(1-x^2) = sin^2(theta) dtheta.
            for (int i = 0; i < Q; ++i) {
                const double a = (i + 1) * std::numbers::pi / (Q + 1);
                theta[i] = a;
                mu[i] = 4.0 * std::numbers::pi * std::numbers::pi / (Q + 1) * std::sin(a) * std::sin(a);
            }
        }
        norm.resize(L + 1);
        for (int l = 0; l <= L; ++l)
            norm[l] = n == 2 ? 4.0 * std::numbers::pi / (2.0 * l + 1.0) : 2.0 * std::numbers::pi * std::numbers::pi;
        Ybuf_.resize((L + 1) * Q);
        for (int l = 0; l <= L; ++l)
            for (int q = 0; q < Q; ++q) Ybuf_[l * Q + q] = basis_at(l, theta[q]);
    }

    std::vector<double> C_;
    std::vector<double> Ybuf_;
};

}  // namespace rflab
