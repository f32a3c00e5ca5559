#pragma once
// Pointwise tensor algebra in dimension 2 or 3. Components are coordinate
// components with lower indices unless a function says otherwise.

#include <algorithm>
#include <array>
#include <cmath>
#include <initializer_list>
#include <string>

#include "rflab/errors.hpp"

namespace rflab {

inline void check_dim(int d) {
    if (d != 2 && d != 3) throw ShapeError("tensor dimension must be 2 or 3, got " + std::to_string(d));
}

struct Vec {
    int dim = 2;
    std::array<double, 3> c{0.0, 0.0, 0.0};

    Vec() = default;
    explicit Vec(int d) : dim(d) { check_dim(d); }
    Vec(int d, std::initializer_list<double> v) : dim(d) {
        check_dim(d);
        if (static_cast<int>(v.size()) != d) throw ShapeError("vector length does not match dimension");
        std::copy(v.begin(), v.end(), c.begin());
    }
    double& operator[](int i) { return c[i]; }
    double operator[](int i) const { return c[i]; }
};

class SymTensor {
public:
    SymTensor() : SymTensor(2) {}
    explicit SymTensor(int d) : dim_(d) { check_dim(d); a_.fill(0.0); }

    // Row-major entries; symmetrized, with relative asymmetry above 1e-8 rejected.
    SymTensor(int d, std::initializer_list<double> rows) : dim_(d) {
        check_dim(d);
        if (static_cast<int>(rows.size()) != d * d) throw ShapeError("matrix entry count does not match dimension");
        std::array<double, 9> m{};
        int k = 0;
        for (double x : rows) { m[(k / d) * 3 + k % d] = x; ++k; }
        assign_checked(m);
    }

    static SymTensor from_rows(int d, const std::array<double, 9>& m) {
        SymTensor s(d);
        s.assign_checked(m);
        return s;
    }

    static SymTensor identity(int d) {
        SymTensor s(d);
        for (int i = 0; i < d; ++i) s.a_[i * 3 + i] = 1.0;
        return s;
    }

    static SymTensor diag(int d, std::initializer_list<double> v) {
        SymTensor s(d);
        if (static_cast<int>(v.size()) != d) throw ShapeError("diagonal length does not match dimension");
        int i = 0;
        for (double x : v) { s.a_[i * 3 + i] = x; ++i; }
        return s;
    }

    int dim() const { return dim_; }
    double operator()(int i, int j) const { return a_[i * 3 + j]; }

    // Sets both (i,j) and (j,i).
    void set(int i, int j, double v) { a_[i * 3 + j] = v; a_[j * 3 + i] = v; }
    void add(int i, int j, double v) {
        a_[i * 3 + j] += v;
        if (i != j) a_[j * 3 + i] += v;
    }

    double max_abs() const {
        double m = 0.0;
        for (int i = 0; i < dim_; ++i)
            for (int j = 0; j < dim_; ++j) m = std::max(m, std::abs((*this)(i, j)));
        return m;
    }

    SymTensor& operator+=(const SymTensor& o) { same(o); for (int k = 0; k < 9; ++k) a_[k] += o.a_[k]; return *this; }
    SymTensor& operator-=(const SymTensor& o) { same(o); for (int k = 0; k < 9; ++k) a_[k] -= o.a_[k]; return *this; }
    SymTensor& operator*=(double s) { for (double& x : a_) x *= s; return *this; }
    friend SymTensor operator+(SymTensor a, const SymTensor& b) { return a += b; }
    friend SymTensor operator-(SymTensor a, const SymTensor& b) { return a -= b; }
    friend SymTensor operator*(double s, SymTensor a) { return a *= s; }
    friend SymTensor operator*(SymTensor a, double s) { return a *= s; }

private:
    void same(const SymTensor& o) const {
        if (o.dim_ != dim_) throw ShapeError("symmetric tensor dimension mismatch");
    }
    void assign_checked(const std::array<double, 9>& m) {
        double scale = 0.0, asym = 0.0;
        for (int i = 0; i < dim_; ++i)
            for (int j = 0; j < dim_; ++j) {
                scale = std::max(scale, std::abs(m[i * 3 + j]));
                asym = std::max(asym, std::abs(m[i * 3 + j] - m[j * 3 + i]));
            }
        if (asym > 1e-8 * scale) throw ShapeError("matrix is not symmetric (relative asymmetry above 1e-8)");
        a_.fill(0.0);
        for (int i = 0; i < dim_; ++i)
            for (int j = 0; j < dim_; ++j) a_[i * 3 + j] = 0.5 * (m[i * 3 + j] + m[j * 3 + i]);
    }

    int dim_;
    std::array<double, 9> a_;
};

// R(a,b,c,d) stored as entries[a][b][c][d]. Convention: sectional curvature of
// the plane (v,w) is R(v,w,v,w)/(|v|^2|w|^2 - <v,w>^2) and g^{bd} R(a,b,c,d) = Ric(a,c).
class CurvTensor {
public:
    CurvTensor() : CurvTensor(2) {}
    explicit CurvTensor(int d) : dim_(d) { check_dim(d); e_.fill(0.0); }

    // K (g_ac g_bd - g_ad g_bc)
    static CurvTensor constant_curvature(double K, const SymTensor& g) {
        CurvTensor r(g.dim());
        const int n = g.dim();
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                for (int c = 0; c < n; ++c)
                    for (int d = 0; d < n; ++d)
                        r.e_[idx(a, b, c, d)] = K * (g(a, c) * g(b, d) - g(a, d) * g(b, c));
        return r;
    }

    int dim() const { return dim_; }
    double operator()(int a, int b, int c, int d) const { return e_[idx(a, b, c, d)]; }
    double& at(int a, int b, int c, int d) { return e_[idx(a, b, c, d)]; }

    // Largest violation of the algebraic symmetries and the first Bianchi identity.
    double symmetry_defect() const {
        double m = 0.0;
        const int n = dim_;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                for (int c = 0; c < n; ++c)
                    for (int d = 0; d < n; ++d) {
                        const double r = (*this)(a, b, c, d);
                        m = std::max(m, std::abs(r + (*this)(b, a, c, d)));
                        m = std::max(m, std::abs(r + (*this)(a, b, d, c)));
                        m = std::max(m, std::abs(r - (*this)(c, d, a, b)));
                        m = std::max(m, std::abs(r + (*this)(a, c, d, b) + (*this)(a, d, b, c)));
                    }
        return m;
    }

private:
    static int idx(int a, int b, int c, int d) { return ((a * 3 + b) * 3 + c) * 3 + d; }
    int dim_;
    std::array<double, 81> e_;
};

// Three-index tensor T(k,i,j), used for nabla_k R_ij, nabla_k H_ij and P_kij.
class Tensor3 {
public:
    Tensor3() : Tensor3(2) {}
    explicit Tensor3(int d) : dim_(d) { check_dim(d); e_.fill(0.0); }
    int dim() const { return dim_; }
    double operator()(int k, int i, int j) const { return e_[(k * 3 + i) * 3 + j]; }
    double& at(int k, int i, int j) { return e_[(k * 3 + i) * 3 + j]; }

private:
    int dim_;
    std::array<double, 27> e_;
};

struct EigenPair {
    int dim = 2;
    std::array<double, 3> values{};        // ascending
    std::array<Vec, 3> vectors{};          // g-orthonormal
    SymTensor wrt;

    double min() const { return values[0]; }
    double max() const { return values[dim - 1]; }
};

namespace detail {

// Symmetric eigen decomposition, ascending. Closed form in 2D, cyclic Jacobi in 3D.
inline void sym_eigen(int n, std::array<double, 9> a, std::array<double, 3>& w, std::array<double, 9>& v) {
    v.fill(0.0);
    for (int i = 0; i < n; ++i) v[i * 3 + i] = 1.0;
    if (n == 2) {
        const double p = a[0], q = a[1], r = a[4];
        const double m = 0.5 * (p + r);
        const double rad = std::hypot(0.5 * (p - r), q);
        if (rad == 0.0) { w = {p, r, 0.0}; if (p > r) std::swap(w[0], w[1]); return; }
        // Stable pair: large-magnitude root directly, the other from the determinant.
        const double big = m >= 0 ? m + rad : m - rad;
        const double det = p * r - q * q;
        const double other = big != 0.0 ? det / big : m - rad;
        double lo = std::min(big, other), hi = std::max(big, other);
        w = {lo, hi, 0.0};
        // Angle of the eigenvector of hi.
        const double th = 0.5 * std::atan2(2.0 * q, p - r);
        const double cs = std::cos(th), sn = std::sin(th);
        // (cs, sn) is the eigenvector of the larger root; columns of v are vectors.
        v[0] = -sn; v[3] = cs;
        v[1] = cs;  v[4] = sn;
        return;
    }
    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = std::abs(a[1]) + std::abs(a[2]) + std::abs(a[5]);
        if (off == 0.0) break;
        for (int p = 0; p < 2; ++p)
            for (int q = p + 1; q < 3; ++q) {
                const double apq = a[p * 3 + q];
                if (apq == 0.0) continue;
                const double app = a[p * 3 + p], aqq = a[q * 3 + q];
                const double theta = 0.5 * (aqq - app) / apq;
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (int k = 0; k < 3; ++k) {
                    const double akp = a[k * 3 + p], akq = a[k * 3 + q];
                    a[k * 3 + p] = c * akp - s * akq;
                    a[k * 3 + q] = s * akp + c * akq;
                }
                for (int k = 0; k < 3; ++k) {
                    const double apk = a[p * 3 + k], aqk = a[q * 3 + k];
                    a[p * 3 + k] = c * apk - s * aqk;
                    a[q * 3 + k] = s * apk + c * aqk;
                }
                for (int k = 0; k < 3; ++k) {
                    const double vkp = v[k * 3 + p], vkq = v[k * 3 + q];
                    v[k * 3 + p] = c * vkp - s * vkq;
                    v[k * 3 + q] = s * vkp + c * vkq;
                }
            }
    }
    std::array<int, 3> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int x, int y) { return a[x * 3 + x] < a[y * 3 + y]; });
    std::array<double, 9> vs{};
    for (int j = 0; j < 3; ++j) {
        w[j] = a[order[j] * 3 + order[j]];
        for (int k = 0; k < 3; ++k) vs[k * 3 + j] = v[k * 3 + order[j]];
    }
    v = vs;
}

}  // namespace detail

inline std::array<double, 9> rows_of(const SymTensor& s) {
    std::array<double, 9> m{};
    for (int i = 0; i < s.dim(); ++i)
        for (int j = 0; j < s.dim(); ++j) m[i * 3 + j] = s(i, j);
    return m;
}

inline std::array<double, 3> eigenvalues(const SymTensor& s) {
    std::array<double, 3> w{};
    std::array<double, 9> v{};
    detail::sym_eigen(s.dim(), rows_of(s), w, v);
    return w;
}

// Eigenvalues of Z relative to g, via the Cholesky congruence L^{-1} Z L^{-T}.
inline EigenPair generalized_eigenvalues(const SymTensor& Z, const SymTensor& g) {
    if (Z.dim() != g.dim()) throw ShapeError("generalized_eigenvalues: dimension mismatch");
    const int n = g.dim();
    const auto gw = eigenvalues(g);
    if (!(gw[0] > 1e-12)) throw DegenerateMetricError("metric is not positive definite (smallest eigenvalue <= 1e-12)");
    std::array<double, 9> L{};
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) {
            double s = g(i, j);
            for (int k = 0; k < j; ++k) s -= L[i * 3 + k] * L[j * 3 + k];
            if (i == j) L[i * 3 + i] = std::sqrt(s);
            else L[i * 3 + j] = s / L[j * 3 + j];
        }
    // Linv lower triangular
    std::array<double, 9> Li{};
    for (int j = 0; j < n; ++j) {
        Li[j * 3 + j] = 1.0 / L[j * 3 + j];
        for (int i = j + 1; i < n; ++i) {
            double s = 0.0;
            for (int k = j; k < i; ++k) s -= L[i * 3 + k] * Li[k * 3 + j];
            Li[i * 3 + j] = s / L[i * 3 + i];
        }
    }
    std::array<double, 9> C{};
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) s += Li[i * 3 + a] * Z(a, b) * Li[j * 3 + b];
            C[i * 3 + j] = s;
        }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j) C[i * 3 + j] = C[j * 3 + i] = 0.5 * (C[i * 3 + j] + C[j * 3 + i]);
    EigenPair out;
    out.dim = n;
    out.wrt = g;
    std::array<double, 9> Y{};
    detail::sym_eigen(n, C, out.values, Y);
    for (int j = 0; j < n; ++j) {
        Vec x(n);
        // x = L^{-T} y
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int k = 0; k < n; ++k) s += Li[k * 3 + i] * Y[k * 3 + j];
            x[i] = s;
        }
        out.vectors[j] = x;
    }
    if (n == 2) out.values[2] = 0.0;
    return out;
}

inline double quad_form(const SymTensor& Z, const Vec& w) {
    if (Z.dim() != w.dim) throw ShapeError("quad_form: dimension mismatch");
    double s = 0.0;
    for (int i = 0; i < Z.dim(); ++i)
        for (int j = 0; j < Z.dim(); ++j) s += Z(i, j) * w[i] * w[j];
    return s;
}

inline SymTensor inverse(const SymTensor& g) {
    const int n = g.dim();
    SymTensor r(n);
    if (n == 2) {
        const double det = g(0, 0) * g(1, 1) - g(0, 1) * g(0, 1);
        if (det == 0.0) throw DegenerateMetricError("singular metric");
        r.set(0, 0, g(1, 1) / det);
        r.set(1, 1, g(0, 0) / det);
        r.set(0, 1, -g(0, 1) / det);
        return r;
    }
    const double c00 = g(1, 1) * g(2, 2) - g(1, 2) * g(2, 1);
    const double c01 = g(1, 2) * g(2, 0) - g(1, 0) * g(2, 2);
    const double c02 = g(1, 0) * g(2, 1) - g(1, 1) * g(2, 0);
    const double det = g(0, 0) * c00 + g(0, 1) * c01 + g(0, 2) * c02;
    if (det == 0.0) throw DegenerateMetricError("singular metric");
    r.set(0, 0, c00 / det);
    r.set(0, 1, c01 / det);
    r.set(0, 2, c02 / det);
    r.set(1, 1, (g(0, 0) * g(2, 2) - g(0, 2) * g(2, 0)) / det);
    r.set(1, 2, (g(0, 2) * g(1, 0) - g(0, 0) * g(1, 2)) / det);
    r.set(2, 2, (g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0)) / det);
    return r;
}

inline double trace(const SymTensor& h, const SymTensor& ginv) {
    double s = 0.0;
    for (int i = 0; i < h.dim(); ++i)
        for (int j = 0; j < h.dim(); ++j) s += ginv(i, j) * h(i, j);
    return s;
}

// a_ik g^{kl} b_lj, symmetrized (exact for commuting a, b such as a == b).
inline SymTensor product(const SymTensor& a, const SymTensor& ginv, const SymTensor& b) {
    const int n = a.dim();
    std::array<double, 9> m{};
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l) s += a(i, k) * ginv(k, l) * b(l, j);
            m[i * 3 + j] = s;
        }
    SymTensor r(n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) r.set(i, j, 0.5 * (m[i * 3 + j] + m[j * 3 + i]));
    return r;
}

// |h|^2_g = h_ij h_kl g^{ik} g^{jl}
inline double norm_sq(const SymTensor& h, const SymTensor& ginv) {
    const int n = h.dim();
    double s = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l) s += h(i, j) * h(k, l) * ginv(i, k) * ginv(j, l);
    return s;
}

inline Vec raise(const Vec& w, const SymTensor& ginv) {
    Vec r(w.dim);
    for (int i = 0; i < w.dim; ++i)
        for (int j = 0; j < w.dim; ++j) r[i] += ginv(i, j) * w[j];
    return r;
}

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (int i = 0; i < a.dim; ++i) s += a[i] * b[i];
    return s;
}

// g^{ij} a_i b_j for covectors a, b
inline double inner(const Vec& a, const Vec& b, const SymTensor& ginv) {
    double s = 0.0;
    for (int i = 0; i < a.dim; ++i)
        for (int j = 0; j < a.dim; ++j) s += ginv(i, j) * a[i] * b[j];
    return s;
}

inline SymTensor outer(const Vec& a, const Vec& b) {
    SymTensor r(a.dim);
    for (int i = 0; i < a.dim; ++i)
        for (int j = i; j < a.dim; ++j) r.set(i, j, 0.5 * (a[i] * b[j] + a[j] * b[i]));
    return r;
}

// R(i,k,j,l) h^{kl}, with h^{kl} = g^{ka} g^{lb} h_ab
inline SymTensor curvature_action(const CurvTensor& Rm, const SymTensor& h, const SymTensor& ginv) {
    const int n = h.dim();
    std::array<double, 9> hu{};
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
            double s = 0.0;
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) s += ginv(k, a) * ginv(l, b) * h(a, b);
            hu[k * 3 + l] = s;
        }
    SymTensor r(n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l) s += Rm(i, k, j, l) * hu[k * 3 + l];
            r.set(i, j, s);
        }
    return r;
}

// R(i,k,j,l) a^k a^l for a covector a
inline SymTensor curvature_on_covector(const CurvTensor& Rm, const Vec& a, const SymTensor& ginv) {
    return curvature_action(Rm, outer(a, a), ginv);
}

// T(k,i,j) X^k for a covector X (raised with g)
inline SymTensor contract_first(const Tensor3& T, const Vec& X, const SymTensor& ginv) {
    const Vec up = raise(X, ginv);
    const int n = T.dim();
    SymTensor r(n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            double s = 0.0, s2 = 0.0;
            for (int k = 0; k < n; ++k) { s += T(k, i, j) * up[k]; s2 += T(k, j, i) * up[k]; }
            r.set(i, j, 0.5 * (s + s2));
        }
    return r;
}

// (nabla_i R_jk + nabla_j R_ik - nabla_k R_ij) X^k, with dRic(k,i,j) = nabla_k R_ij
inline SymTensor ricci_gradient_term(const Tensor3& dRic, const Vec& X, const SymTensor& ginv) {
    const Vec up = raise(X, ginv);
    const int n = dRic.dim();
    SymTensor r(n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < n; ++k) s += (dRic(i, j, k) + dRic(j, i, k) - dRic(k, i, j)) * up[k];
            r.set(i, j, s);
        }
    return r;
}

// M_ij w^i w^j + 2 P_kij v^k w^i w^j + R(v,w,v,w) for tangent vectors v, w.
inline double harnack_quadratic(const SymTensor& M, const Tensor3& P, const CurvTensor& Rm, const Vec& v, const Vec& w,
                                const SymTensor& g) {
    const int n = g.dim();
    if (M.dim() != n || P.dim() != n || Rm.dim() != n || v.dim != n || w.dim != n)
        throw ShapeError("harnack_quadratic: dimension mismatch");
    double s = quad_form(M, w);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) s += 2.0 * P(k, i, j) * v[k] * w[i] * w[j];
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c)
                for (int d = 0; d < n; ++d) s += Rm(a, b, c, d) * v[a] * w[b] * v[c] * w[d];
    return s;
}

}  // namespace rflab
