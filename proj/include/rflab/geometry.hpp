#pragma once
// Model geometries: round spheres with zonal data (spectral) and conformally
// flat tori g = e^{2 phi} (dx^2 + dy^2) on a periodic grid (finite differences).

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "rflab/errors.hpp"
#include "rflab/sphere_basis.hpp"
#include "rflab/tensor_core.hpp"
#include "rflab/util.hpp"

namespace rflab {

enum class Family { sphere, torus };

inline const char* family_name(Family f) { return f == Family::sphere ? "round_sphere" : "conformal_torus"; }

struct RoundSphere {
    int n = 2;
    double radius_sq = 1.0;
    int L = 16;

    void validate() const {
        if (n != 2 && n != 3) throw ConfigError("RoundSphere: n must be 2 or 3");
        if (!(radius_sq > 0.0)) throw ConfigError("RoundSphere: radius_sq must be positive");
        if (L < 8) throw ConfigError("RoundSphere: mode cutoff L must be >= 8");
    }
};

struct ConformalTorus2D {
    int N = 32;
    double period = 1.0;
    std::vector<double> phi;  // N*N, index j*N + i for x_i = i h, y_j = j h

    void validate() const {
        if (N < 16 || N % 2 != 0) throw ConfigError("ConformalTorus2D: N must be even and >= 16");
        if (!(period > 0.0)) throw ConfigError("ConformalTorus2D: period must be positive");
        if (static_cast<int>(phi.size()) != N * N) throw ResolutionError("ConformalTorus2D: phi has wrong length");
        for (double v : phi)
            if (!std::isfinite(v)) throw ConfigError("ConformalTorus2D: phi must be finite");
    }

    template <class F>
    static ConformalTorus2D from_function(int N, double period, F&& f) {
        ConformalTorus2D t;
        t.N = N;
        t.period = period;
        t.phi.resize(static_cast<std::size_t>(N) * N);
        const double h = period / N;
        for (int j = 0; j < N; ++j)
            for (int i = 0; i < N; ++i) t.phi[j * N + i] = f(i * h, j * h);
        return t;
    }
};

// Values over torus grid points, or zonal mode coefficients on a sphere.
struct GridField {
    Family family = Family::torus;
    int dim = 2;
    int res = 0;  // N (torus) or L (sphere)
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
};

struct MetricSnapshot {
    Family family = Family::torus;
    int dim = 2;
    double t = 0.0;
    // sphere
    double radius_sq = 1.0;
    int L = 0;
    std::shared_ptr<const ZonalBasis> basis;
    // torus
    int N = 0;
    double period = 1.0;
    std::shared_ptr<const std::vector<double>> phi;
    bool flat = false;

    static MetricSnapshot sphere(const RoundSphere& s, double t = 0.0) {
        s.validate();
        MetricSnapshot m;
        m.family = Family::sphere;
        m.dim = s.n;
        m.t = t;
        m.radius_sq = s.radius_sq;
        m.L = s.L;
        m.basis = ZonalBasis::get(s.n, s.L);
        return m;
    }

    static MetricSnapshot torus(const ConformalTorus2D& c, double t = 0.0) {
        c.validate();
        MetricSnapshot m;
        m.family = Family::torus;
        m.dim = 2;
        m.t = t;
        m.N = c.N;
        m.period = c.period;
        m.phi = std::make_shared<const std::vector<double>>(c.phi);
        double lo = c.phi[0], hi = c.phi[0];
        for (double v : c.phi) { lo = std::min(lo, v); hi = std::max(hi, v); }
        m.flat = (hi == lo);
        return m;
    }

    MetricSnapshot with_phi(std::vector<double> p, double t_new) const {
        MetricSnapshot m = *this;
        m.t = t_new;
        double lo = p[0], hi = p[0];
        for (double v : p) { lo = std::min(lo, v); hi = std::max(hi, v); }
        m.flat = (hi == lo);
        m.phi = std::make_shared<const std::vector<double>>(std::move(p));
        return m;
    }

    MetricSnapshot with_radius_sq(double r2, double t_new) const {
        MetricSnapshot m = *this;
        m.radius_sq = r2;
        m.t = t_new;
        return m;
    }

    int points() const { return family == Family::sphere ? basis->Q : N * N; }
    int field_size() const { return family == Family::sphere ? L + 1 : N * N; }
    int res() const { return family == Family::sphere ? L : N; }
    double h() const { return period / N; }

    GridField zero_field() const {
        GridField f;
        f.family = family;
        f.dim = dim;
        f.res = res();
        f.values.assign(field_size(), 0.0);
        return f;
    }

    void check_field(const GridField& f) const {
        if (f.family != family || f.dim != dim || f.res != res() || static_cast<int>(f.values.size()) != field_size())
            throw ResolutionError("field does not match the snapshot geometry/resolution");
    }
};

// ---------------------------------------------------------------------------
// Periodic finite differences

struct Periodic2D {
    int N;
    double h;

    int at(int i, int j) const { return ((j + N) % N) * N + ((i + N) % N); }

    std::vector<double> dx(const std::vector<double>& f) const {
        std::vector<double> r(f.size());
        parallel_for(static_cast<std::size_t>(N) * N, [&](std::size_t k) {
            const int i = k % N, j = k / N;
            r[k] = (f[at(i + 1, j)] - f[at(i - 1, j)]) / (2.0 * h);
        });
        return r;
    }
    std::vector<double> dy(const std::vector<double>& f) const {
        std::vector<double> r(f.size());
        parallel_for(static_cast<std::size_t>(N) * N, [&](std::size_t k) {
            const int i = k % N, j = k / N;
            r[k] = (f[at(i, j + 1)] - f[at(i, j - 1)]) / (2.0 * h);
        });
        return r;
    }
    std::vector<double> dxx(const std::vector<double>& f) const {
        std::vector<double> r(f.size());
        parallel_for(static_cast<std::size_t>(N) * N, [&](std::size_t k) {
            const int i = k % N, j = k / N;
            r[k] = (f[at(i + 1, j)] - 2.0 * f[k] + f[at(i - 1, j)]) / (h * h);
        });
        return r;
    }
    std::vector<double> dyy(const std::vector<double>& f) const {
        std::vector<double> r(f.size());
        parallel_for(static_cast<std::size_t>(N) * N, [&](std::size_t k) {
            const int i = k % N, j = k / N;
            r[k] = (f[at(i, j + 1)] - 2.0 * f[k] + f[at(i, j - 1)]) / (h * h);
        });
        return r;
    }
    std::vector<double> dxy(const std::vector<double>& f) const {
        std::vector<double> r(f.size());
        parallel_for(static_cast<std::size_t>(N) * N, [&](std::size_t k) {
            const int i = k % N, j = k / N;
            r[k] = (f[at(i + 1, j + 1)] - f[at(i + 1, j - 1)] - f[at(i - 1, j + 1)] + f[at(i - 1, j - 1)]) / (4.0 * h * h);
        });
        return r;
    }
    // 5-point Laplacian
    std::vector<double> lap(const std::vector<double>& f) const {
        std::vector<double> r(f.size());
        parallel_for(static_cast<std::size_t>(N) * N, [&](std::size_t k) {
            const int i = k % N, j = k / N;
            r[k] = (f[at(i + 1, j)] + f[at(i - 1, j)] + f[at(i, j + 1)] + f[at(i, j - 1)] - 4.0 * f[k]) / (h * h);
        });
        return r;
    }
    std::vector<double> d(int axis, const std::vector<double>& f) const { return axis == 0 ? dx(f) : dy(f); }
};

inline Periodic2D grid_ops(const MetricSnapshot& s) { return Periodic2D{s.N, s.h()}; }

// ---------------------------------------------------------------------------
// Pointwise frame: metric, inverse and quadrature weight at every sample point.

struct PointFrame {
    std::vector<SymTensor> g, ginv;
    std::vector<double> weight;  // includes the Riemannian density
    std::vector<double> sin_theta, cos_theta;  // sphere only
};

inline SymTensor sphere_metric(int n, double r2, double th) {
    const double s2 = std::sin(th) * std::sin(th);
    return n == 2 ? SymTensor::diag(2, {r2, r2 * s2}) : SymTensor::diag(3, {r2, r2 * s2, r2 * s2});
}

inline PointFrame point_frame(const MetricSnapshot& s) {
    PointFrame f;
    const int P = s.points();
    f.g.resize(P, SymTensor(s.dim));
    f.ginv.resize(P, SymTensor(s.dim));
    f.weight.resize(P);
    if (s.family == Family::sphere) {
        const auto& B = *s.basis;
        const double rn = std::pow(s.radius_sq, 0.5 * s.dim);
        f.sin_theta.resize(P);
        f.cos_theta.resize(P);
        for (int q = 0; q < P; ++q) {
            f.g[q] = sphere_metric(s.dim, s.radius_sq, B.theta[q]);
            f.ginv[q] = inverse(f.g[q]);
            f.weight[q] = rn * B.mu[q];
            f.sin_theta[q] = std::sin(B.theta[q]);
            f.cos_theta[q] = std::cos(B.theta[q]);
        }
    } else {
        const double h2 = s.h() * s.h();
        const auto& phi = *s.phi;
        for (int k = 0; k < P; ++k) {
            const double e = std::exp(2.0 * phi[k]);
            f.g[k] = SymTensor::diag(2, {e, e});
            f.ginv[k] = SymTensor::diag(2, {1.0 / e, 1.0 / e});
            f.weight[k] = h2 * e;
        }
    }
    return f;
}

// Integral of pointwise samples against the snapshot's measure.
inline double integrate_points(const std::vector<double>& vals, const PointFrame& fr) {
    std::vector<double> w(vals.size());
    for (std::size_t k = 0; k < vals.size(); ++k) w[k] = vals[k] * fr.weight[k];
    return pairwise_sum(w);
}

// Field values at sample points (sphere: evaluation of the zonal series at nodes).
inline std::vector<double> point_values(const GridField& f, const MetricSnapshot& s) {
    s.check_field(f);
    if (s.family == Family::sphere) return s.basis->at_nodes(f.values, 0);
    return f.values;
}

inline double integrate(const GridField& f, const MetricSnapshot& s) {
    return integrate_points(point_values(f, s), point_frame(s));
}

// ---------------------------------------------------------------------------
// Scalar jets

struct ScalarJets {
    std::vector<double> val;
    std::vector<Vec> grad;          // covector d f
    std::vector<SymTensor> hess;    // covariant Hessian
    std::vector<double> lap;        // Laplace-Beltrami, computed independently of hess
    std::vector<std::array<double, 5>> dtheta;  // sphere: theta-derivatives 0..4
};

inline GridField laplace_beltrami(const GridField& f, const MetricSnapshot& s) {
    s.check_field(f);
    GridField r = f;
    if (s.family == Family::sphere) {
        for (int l = 0; l <= s.L; ++l) r.values[l] = -s.basis->lambda(l) / s.radius_sq * f.values[l];
        return r;
    }
    const auto ops = grid_ops(s);
    const auto lp = ops.lap(f.values);
    const auto& phi = *s.phi;
    for (std::size_t k = 0; k < lp.size(); ++k) r.values[k] = std::exp(-2.0 * phi[k]) * lp[k];
    return r;
}

// Christoffel symbols of the torus metric: Gamma^k_ij = d_ik phi_j + d_jk phi_i - d_ij phi_k.
inline std::vector<Tensor3> torus_christoffel(const MetricSnapshot& s) {
    const auto ops = grid_ops(s);
    const auto px = ops.dx(*s.phi), py = ops.dy(*s.phi);
    std::vector<Tensor3> G(px.size(), Tensor3(2));
    for (std::size_t p = 0; p < px.size(); ++p) {
        const double d[2] = {px[p], py[p]};
        for (int k = 0; k < 2; ++k)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    G[p].at(k, i, j) = (i == k ? d[j] : 0.0) + (j == k ? d[i] : 0.0) - (i == j ? d[k] : 0.0);
    }
    return G;
}

inline ScalarJets scalar_jets_from_points(const std::vector<double>& f, const MetricSnapshot& s) {
    // torus only: values at grid points
    ScalarJets J;
    const auto ops = grid_ops(s);
    const auto fx = ops.dx(f), fy = ops.dy(f), fxx = ops.dxx(f), fyy = ops.dyy(f), fxy = ops.dxy(f);
    const auto Gam = torus_christoffel(s);
    const auto& phi = *s.phi;
    const std::size_t P = f.size();
    J.val = f;
    J.grad.resize(P, Vec(2));
    J.hess.resize(P, SymTensor(2));
    J.lap.resize(P);
    for (std::size_t p = 0; p < P; ++p) {
        J.grad[p] = Vec(2, {fx[p], fy[p]});
        const double D[2][2] = {{fxx[p], fxy[p]}, {fxy[p], fyy[p]}};
        for (int i = 0; i < 2; ++i)
            for (int j = i; j < 2; ++j)
                J.hess[p].set(i, j, D[i][j] - Gam[p](0, i, j) * fx[p] - Gam[p](1, i, j) * fy[p]);
        J.lap[p] = std::exp(-2.0 * phi[p]) * (fxx[p] + fyy[p]);
    }
    return J;
}

inline SymTensor sphere_hessian(int n, double fpp, double fp, double sn, double cs) {
    const double a = sn * cs * fp;
    return n == 2 ? SymTensor::diag(2, {fpp, a}) : SymTensor::diag(3, {fpp, a, a});
}

inline ScalarJets scalar_jets(const GridField& f, const MetricSnapshot& s) {
    s.check_field(f);
    if (s.family == Family::torus) return scalar_jets_from_points(f.values, s);
    const auto& B = *s.basis;
    ScalarJets J;
    const int Q = B.Q;
    const auto b = B.to_cosine(f.values);
    std::vector<double> lapc(s.L + 1);
    for (int l = 0; l <= s.L; ++l) lapc[l] = -B.lambda(l) / s.radius_sq * f.values[l];
    const auto lapv = B.at_nodes(lapc, 0);
    J.val.resize(Q);
    J.grad.resize(Q, Vec(s.dim));
    J.hess.resize(Q, SymTensor(s.dim));
    J.lap = lapv;
    J.dtheta.resize(Q);
    for (int q = 0; q < Q; ++q) {
        for (int k = 0; k < 5; ++k) J.dtheta[q][k] = ZonalBasis::eval_cosine(b, B.theta[q], k);
        J.val[q] = J.dtheta[q][0];
        Vec gr(s.dim);
        gr[0] = J.dtheta[q][1];
        J.grad[q] = gr;
        J.hess[q] = sphere_hessian(s.dim, J.dtheta[q][2], J.dtheta[q][1], std::sin(B.theta[q]), std::cos(B.theta[q]));
    }
    return J;
}

inline std::vector<SymTensor> covariant_hessian(const GridField& f, const MetricSnapshot& s) {
    return scalar_jets(f, s).hess;
}

// ---------------------------------------------------------------------------
// Curvature

struct CurvatureBundle {
    std::vector<CurvTensor> riemann;
    std::vector<SymTensor> ricci;
    std::vector<double> scalar;
    std::vector<Tensor3> nabla_ricci;   // (k,i,j) -> nabla_k R_ij
    std::vector<Tensor3> christoffel;   // (k,i,j) -> Gamma^k_ij
    std::vector<SymTensor> hess_scalar; // nabla_i nabla_j R
    std::vector<SymTensor> lap_ricci;   // Delta R_ij
    double K_max = 0.0;                 // max |sectional curvature|
    double L_max = 0.0;                 // max |nabla Ric|
};

inline CurvatureBundle curvature_bundle(const MetricSnapshot& s, const PointFrame& fr) {
    CurvatureBundle cb;
    const int P = s.points();
    const int n = s.dim;
    cb.riemann.resize(P, CurvTensor(n));
    cb.ricci.resize(P, SymTensor(n));
    cb.scalar.resize(P);
    cb.nabla_ricci.assign(P, Tensor3(n));
    cb.christoffel.assign(P, Tensor3(n));
    cb.hess_scalar.assign(P, SymTensor(n));
    cb.lap_ricci.assign(P, SymTensor(n));
    if (s.family == Family::sphere) {
        const double K = 1.0 / s.radius_sq;
        for (int q = 0; q < P; ++q) {
            cb.riemann[q] = CurvTensor::constant_curvature(K, fr.g[q]);
            cb.ricci[q] = (n - 1.0) * K * fr.g[q];
            cb.scalar[q] = n * (n - 1.0) * K;
            const double sn = fr.sin_theta[q], cs = fr.cos_theta[q];
            for (int a = 1; a < n; ++a) {
                cb.christoffel[q].at(0, a, a) = -sn * cs;
                cb.christoffel[q].at(a, 0, a) = cs / sn;
                cb.christoffel[q].at(a, a, 0) = cs / sn;
            }
        }
        cb.K_max = K;
        cb.L_max = 0.0;
        return cb;
    }
    const auto ops = grid_ops(s);
    const auto& phi = *s.phi;
    const auto lp = ops.lap(phi);
    std::vector<double> K(P);
    for (int p = 0; p < P; ++p) K[p] = -std::exp(-2.0 * phi[p]) * lp[p];
    const auto Kx = ops.dx(K), Ky = ops.dy(K);
    std::vector<double> R(P);
    for (int p = 0; p < P; ++p) R[p] = 2.0 * K[p];
    const auto JR = scalar_jets_from_points(R, s);
    const auto JK = scalar_jets_from_points(K, s);
    cb.christoffel = torus_christoffel(s);
    for (int p = 0; p < P; ++p) {
        cb.riemann[p] = CurvTensor::constant_curvature(K[p], fr.g[p]);
        cb.ricci[p] = K[p] * fr.g[p];
        cb.scalar[p] = R[p];
        const double dK[2] = {Kx[p], Ky[p]};
        for (int k = 0; k < 2; ++k)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) cb.nabla_ricci[p].at(k, i, j) = dK[k] * fr.g[p](i, j);
        cb.hess_scalar[p] = JR.hess[p];
        cb.lap_ricci[p] = JK.lap[p] * fr.g[p];
        cb.K_max = std::max(cb.K_max, std::abs(K[p]));
        // |nabla Ric|_g = |dK|_g |g|_g = sqrt(2) |dK|_g in 2D
        const double dk2 = std::exp(-2.0 * phi[p]) * (Kx[p] * Kx[p] + Ky[p] * Ky[p]);
        cb.L_max = std::max(cb.L_max, std::sqrt(2.0 * dk2));
    }
    return cb;
}

inline CurvatureBundle curvature_bundle(const MetricSnapshot& s) { return curvature_bundle(s, point_frame(s)); }

// ---------------------------------------------------------------------------
// Points and distances

// Sphere: unit vector in R^{n+1}. Torus: (x, y) in [0, period)^2.
struct Point {
    std::array<double, 4> x{0, 0, 0, 0};
};

struct Interval {
    double lo = 0.0, hi = 0.0;
};

inline Point sphere_point_at_angle(double theta) {
    Point p;
    p.x = {std::cos(theta), std::sin(theta), 0.0, 0.0};
    return p;
}

inline Point torus_point(double x, double y) {
    Point p;
    p.x = {x, y, 0.0, 0.0};
    return p;
}

inline double flat_periodic_distance(double x0, double y0, double x1, double y1, double period) {
    auto wrap = [&](double d) {
        d = std::fmod(std::abs(d), period);
        return std::min(d, period - d);
    };
    return std::hypot(wrap(x1 - x0), wrap(y1 - y0));
}

inline Interval distance_proxy(const Point& a, const Point& b, const MetricSnapshot& s) {
    if (s.family == Family::sphere) {
        double d = 0.0, na = 0.0, nb = 0.0;
        for (int k = 0; k < 4; ++k) { d += a.x[k] * b.x[k]; na += a.x[k] * a.x[k]; nb += b.x[k] * b.x[k]; }
        const double c = std::clamp(d / std::sqrt(na * nb), -1.0, 1.0);
        const double r = std::sqrt(s.radius_sq) * std::acos(c);
        return {r, r};
    }
    const double d0 = flat_periodic_distance(a.x[0], a.x[1], b.x[0], b.x[1], s.period);
    double lo = (*s.phi)[0], hi = lo;
    for (double v : *s.phi) { lo = std::min(lo, v); hi = std::max(hi, v); }
    return {std::exp(lo) * d0, std::exp(hi) * d0};
}

// Coordinates of sample point p as a Point (sphere: node on the meridian).
inline Point sample_point(const MetricSnapshot& s, int p) {
    if (s.family == Family::sphere) return sphere_point_at_angle(s.basis->theta[p]);
    const double h = s.h();
    return torus_point((p % s.N) * h, (p / s.N) * h);
}

// ---------------------------------------------------------------------------
// GridField serialization. CSV: one comment header line then one value per line.
// Binary: magic "RFGF", then little-endian int32 family, dim, res, float64 extent,
// uint64 count, count float64 values (host byte order must be little-endian).

inline void write_field_csv(const GridField& f, double extent, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write " + path);
    os.precision(17);
    os << "# geometry=" << family_name(f.family) << " dim=" << f.dim << " res=" << f.res << " extent=" << extent
       << " count=" << f.values.size() << "\n";
    for (double v : f.values) os << v << "\n";
}

inline GridField read_field_csv(const std::string& path, double* extent = nullptr) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read " + path);
    std::string header;
    std::getline(is, header);
    GridField f;
    std::istringstream hs(header);
    std::string tok;
    std::size_t count = 0;
    while (hs >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
        if (k == "geometry") f.family = (v == "round_sphere") ? Family::sphere : Family::torus;
        else if (k == "dim") f.dim = std::stoi(v);
        else if (k == "res") f.res = std::stoi(v);
        else if (k == "extent" && extent) *extent = std::stod(v);
        else if (k == "count") count = std::stoull(v);
    }
    f.values.reserve(count);
    double x;
    while (is >> x) f.values.push_back(x);
    if (f.values.size() != count) throw ResolutionError("field file " + path + " has wrong value count");
    return f;
}

inline void write_field_binary(const GridField& f, double extent, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + path);
    os.write("RFGF", 4);
    const std::int32_t hdr[3] = {f.family == Family::sphere ? 1 : 0, f.dim, f.res};
    os.write(reinterpret_cast<const char*>(hdr), sizeof hdr);
    os.write(reinterpret_cast<const char*>(&extent), sizeof extent);
    const std::uint64_t n = f.values.size();
    os.write(reinterpret_cast<const char*>(&n), sizeof n);
    os.write(reinterpret_cast<const char*>(f.values.data()), static_cast<std::streamsize>(n * sizeof(double)));
}

inline GridField read_field_binary(const std::string& path, double* extent = nullptr) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot read " + path);
    char magic[4];
    is.read(magic, 4);
    if (std::string(magic, 4) != "RFGF") throw ConfigError("not a field file: " + path);
    std::int32_t hdr[3];
    is.read(reinterpret_cast<char*>(hdr), sizeof hdr);
    double ext;
    is.read(reinterpret_cast<char*>(&ext), sizeof ext);
    if (extent) *extent = ext;
    std::uint64_t n;
    is.read(reinterpret_cast<char*>(&n), sizeof n);
    GridField f;
    f.family = hdr[0] == 1 ? Family::sphere : Family::torus;
    f.dim = hdr[1];
    f.res = hdr[2];
    f.values.resize(n);
    is.read(reinterpret_cast<char*>(f.values.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw ResolutionError("truncated field file " + path);
    return f;
}

}  // namespace rflab
