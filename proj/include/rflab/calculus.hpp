#pragma once
// Derivatives of log u and residuals of the Hessian evolution identities.
//
// Time derivatives of tensors are taken component-wise in the fixed coordinates
// of each model (theta/angles on spheres, x/y on tori) by centered differences
// at stored steps.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rflab/pde.hpp"

namespace rflab {

struct ResidualReport {
    std::string name;
    double linf = 0.0;             // raw, max over space-time of the g-norm
    double l2 = 0.0;               // raw, root mean over times of volume-averaged squares
    double scale = 0.0;            // max g-norm of the two sides
    double linf_normalized = 0.0;  // linf / scale (linf itself when scale == 0)
    std::vector<double> times;
    std::vector<double> per_time;  // raw linf per stored time
    std::optional<double> convergence_order;

    void finish(double sum_l2, int nt) {
        l2 = nt > 0 ? std::sqrt(sum_l2 / nt) : 0.0;
        linf_normalized = scale > 0.0 ? linf / scale : linf;
    }
};

inline nlohmann::json to_json(const ResidualReport& r) {
    nlohmann::json j;
    j["name"] = r.name;
    j["linf"] = r.linf;
    j["l2"] = r.l2;
    j["scale"] = r.scale;
    j["linf_normalized"] = r.linf_normalized;
    j["times"] = r.times;
    j["per_time"] = r.per_time;
    if (r.convergence_order) j["convergence_order"] = *r.convergence_order;
    else j["convergence_order"] = nullptr;
    return j;
}

// Interior stored steps k (k-1 and k+1 available) in [first+1, count-2], thinned
// to at most max_times evenly spaced entries.
inline std::vector<int> interior_steps(int first, int count, int max_times) {
    std::vector<int> ks;
    const int lo = first + 1, hi = count - 2;
    if (hi < lo) return ks;
    const int m = hi - lo + 1;
    if (max_times <= 0 || m <= max_times) {
        for (int k = lo; k <= hi; ++k) ks.push_back(k);
        return ks;
    }
    for (int i = 0; i < max_times; ++i) ks.push_back(lo + static_cast<int>(std::lround(i * (m - 1.0) / (max_times - 1.0))));
    return ks;
}

// ---------------------------------------------------------------------------
// Pointwise tensor jets

namespace detail {

inline double tensor_norm(const SymTensor& h, const SymTensor& ginv) { return std::sqrt(std::max(0.0, norm_sq(h, ginv))); }

// Coordinate scale factors of the ON frame on a round sphere: d_theta = r e, d_alpha = r sin(theta) t_alpha.
inline std::array<double, 3> sphere_scales(int n, double r2, double sn) {
    const double r = std::sqrt(r2);
    return n == 2 ? std::array<double, 3>{r, r * sn, 0.0} : std::array<double, 3>{r, r * sn, r * sn};
}

struct SphereHessJets {
    SymTensor H, lapH;
    Tensor3 nablaH;
    explicit SphereHessJets(int n) : H(n), lapH(n), nablaH(n) {}
};

// Hessian of a zonal function F, its covariant derivative and rough Laplacian,
// from theta-derivatives d[0..4]. Hessian = B g + W e(x)e with e the unit radial field.
inline SphereHessJets sphere_hessian_jets(int n, double r2, double th, const std::array<double, 5>& d) {
    const double sn = std::sin(th), cs = std::cos(th);
    const double ct = cs / sn, csc2 = 1.0 / (sn * sn), r = std::sqrt(r2);
    const double A = d[2] / r2, A1 = d[3] / r2, A2 = d[4] / r2;
    const double B = ct * d[1] / r2;
    const double B1 = (-csc2 * d[1] + ct * d[2]) / r2;
    const double B2 = (2.0 * csc2 * ct * d[1] - 2.0 * csc2 * d[2] + ct * d[3]) / r2;
    const double W = A - B, W1 = A1 - B1, W2 = A2 - B2;
    auto lap = [&](double f1, double f2) { return (f2 + (n - 1) * ct * f1) / r2; };
    const double lrr = lap(B1, B2) + lap(W1, W2) - 2.0 * (n - 1) * ct * ct * W / r2;
    const double ltt = lap(B1, B2) + 2.0 * ct * ct * W / r2;
    const auto sc = sphere_scales(n, r2, sn);
    SphereHessJets J(n);
    for (int i = 0; i < n; ++i) {
        const double on = i == 0 ? A : B;
        const double lon = i == 0 ? lrr : ltt;
        J.H.set(i, i, on * sc[i] * sc[i]);
        J.lapH.set(i, i, lon * sc[i] * sc[i]);
    }
    J.nablaH.at(0, 0, 0) = A1 / r * sc[0] * sc[0] * sc[0];
    for (int a = 1; a < n; ++a) {
        J.nablaH.at(0, a, a) = B1 / r * sc[0] * sc[a] * sc[a];
        const double m = W * ct / r * sc[a] * sc[a] * sc[0];
        J.nablaH.at(a, a, 0) = m;
        J.nablaH.at(a, 0, a) = m;
    }
    return J;
}

inline std::array<double, 5> log_chain(const std::array<double, 5>& u) {
    if (!(u[0] > 0.0)) throw DomainError("log of a nonpositive value");
    std::array<double, 5> v{};
    v[0] = std::log(u[0]);
    v[1] = u[1] / u[0];
    v[2] = u[2] / u[0] - v[1] * v[1];
    v[3] = u[3] / u[0] - 3.0 * v[1] * v[2] - v[1] * v[1] * v[1];
    v[4] = u[4] / u[0] - (4.0 * v[1] * v[3] + 3.0 * v[2] * v[2] + 6.0 * v[1] * v[1] * v[2] + v[1] * v[1] * v[1] * v[1]);
    return v;
}

struct TorusTensorJets {
    std::vector<Tensor3> nablaH;
    std::vector<SymTensor> lapH;
};

// nabla_k H_ij and the rough Laplacian of a symmetric 2-tensor field on the torus.
inline TorusTensorJets torus_tensor_jets(const std::vector<SymTensor>& H, const MetricSnapshot& s, const std::vector<Tensor3>& Gam) {
    const auto ops = grid_ops(s);
    const std::size_t P = H.size();
    const int comp[3][2] = {{0, 0}, {0, 1}, {1, 1}};
    std::vector<double> buf(P);
    std::array<std::vector<double>, 3> dHx, dHy;
    for (int c = 0; c < 3; ++c) {
        for (std::size_t p = 0; p < P; ++p) buf[p] = H[p](comp[c][0], comp[c][1]);
        dHx[c] = ops.dx(buf);
        dHy[c] = ops.dy(buf);
    }
    auto cidx = [](int i, int j) { return i + j; };  // (0,0)->0, (0,1)->1, (1,1)->2
    TorusTensorJets J;
    J.nablaH.assign(P, Tensor3(2));
    for (std::size_t p = 0; p < P; ++p)
        for (int k = 0; k < 2; ++k)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    double v = (k == 0 ? dHx : dHy)[cidx(i, j)][p];
                    for (int m = 0; m < 2; ++m) v -= Gam[p](m, k, i) * H[p](m, j) + Gam[p](m, k, j) * H[p](i, m);
                    J.nablaH[p].at(k, i, j) = v;
                }
    // second derivative: nabla_l T_kij, traced over l = k with g^{lk} = e^{-2 phi} delta
    std::array<std::array<std::vector<double>, 3>, 2> dT;  // dT[k][c] = d_k of T_{k c}
    for (int k = 0; k < 2; ++k)
        for (int c = 0; c < 3; ++c) {
            for (std::size_t p = 0; p < P; ++p) buf[p] = J.nablaH[p](k, comp[c][0], comp[c][1]);
            dT[k][c] = ops.d(k, buf);
        }
    const auto& phi = *s.phi;
    J.lapH.assign(P, SymTensor(2));
    for (std::size_t p = 0; p < P; ++p) {
        const auto& T = J.nablaH[p];
        const auto& G = Gam[p];
        for (int c = 0; c < 3; ++c) {
            const int i = comp[c][0], j = comp[c][1];
            double acc = 0.0;
            for (int k = 0; k < 2; ++k) {
                double v = dT[k][c][p];
                for (int m = 0; m < 2; ++m) v -= G(m, k, k) * T(m, i, j) + G(m, k, i) * T(k, m, j) + G(m, k, j) * T(k, i, m);
                acc += v;
            }
            J.lapH[p].set(i, j, std::exp(-2.0 * phi[p]) * acc);
        }
    }
    return J;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// log u and derivatives

struct LogDerivatives {
    std::vector<double> v;
    std::vector<Vec> grad_v;
    std::vector<double> grad_v_sq;
    std::vector<SymTensor> hessian;
    std::vector<double> lap_v;
    std::vector<std::array<double, 5>> dtheta;  // sphere: theta-derivatives of v
    // filled when tensor jets are requested
    std::vector<Tensor3> nabla_hessian;
    std::vector<SymTensor> lap_hessian;
};

inline void check_log_floor(const std::vector<double>& u) {
    double lo = u[0], hi = u[0];
    for (double x : u) { lo = std::min(lo, x); hi = std::max(hi, x); }
    if (!(hi > 0.0) || !(lo >= 1e-12 * hi)) throw DomainError("log u needs min u >= 1e-12 max u");
}

// Jets of log F for a field F given by coefficients/values on snapshot s.
inline LogDerivatives log_jets(const GridField& u, const MetricSnapshot& s, const PointFrame& fr, bool tensor_jets) {
    s.check_field(u);
    LogDerivatives L;
    if (s.family == Family::sphere) {
        const auto J = scalar_jets(u, s);
        check_log_floor(J.val);
        const int Q = s.points(), n = s.dim;
        L.v.resize(Q);
        L.grad_v.assign(Q, Vec(n));
        L.grad_v_sq.resize(Q);
        L.hessian.assign(Q, SymTensor(n));
        L.lap_v.resize(Q);
        L.dtheta.resize(Q);
        if (tensor_jets) {
            L.nabla_hessian.assign(Q, Tensor3(n));
            L.lap_hessian.assign(Q, SymTensor(n));
        }
        for (int q = 0; q < Q; ++q) {
            const auto d = detail::log_chain(J.dtheta[q]);
            L.dtheta[q] = d;
            L.v[q] = d[0];
            L.grad_v[q][0] = d[1];
            L.grad_v_sq[q] = d[1] * d[1] / s.radius_sq;
            const double th = s.basis->theta[q];
            L.lap_v[q] = (d[2] + (n - 1) * std::cos(th) / std::sin(th) * d[1]) / s.radius_sq;
            auto HJ = detail::sphere_hessian_jets(n, s.radius_sq, th, d);
            L.hessian[q] = HJ.H;
            if (tensor_jets) {
                L.nabla_hessian[q] = HJ.nablaH;
                L.lap_hessian[q] = HJ.lapH;
            }
        }
        return L;
    }
    check_log_floor(u.values);
    std::vector<double> v(u.values.size());
    for (std::size_t p = 0; p < v.size(); ++p) v[p] = std::log(u.values[p]);
    auto J = scalar_jets_from_points(v, s);
    L.v = std::move(J.val);
    L.grad_v = std::move(J.grad);
    L.hessian = std::move(J.hess);
    L.lap_v = std::move(J.lap);
    L.grad_v_sq.resize(L.v.size());
    for (std::size_t p = 0; p < L.v.size(); ++p) L.grad_v_sq[p] = inner(L.grad_v[p], L.grad_v[p], fr.ginv[p]);
    if (tensor_jets) {
        auto T = detail::torus_tensor_jets(L.hessian, s, torus_christoffel(s));
        L.nabla_hessian = std::move(T.nablaH);
        L.lap_hessian = std::move(T.lapH);
    }
    return L;
}

inline LogDerivatives log_derivatives(const SolutionField& sol, int k, bool tensor_jets = false) {
    const auto& s = sol.metric(k);
    return log_jets(sol.at(k), s, point_frame(s), tensor_jets);
}

inline LogDerivatives log_derivatives_at(const SolutionField& sol, double t, bool tensor_jets = false) {
    return log_derivatives(sol, detail::stored_index(*sol.traj, t), tensor_jets);
}

// Hessian jets of a plain field (no log), used by the commutator check.
inline LogDerivatives hessian_jets(const GridField& f, const MetricSnapshot& s, const PointFrame& fr) {
    LogDerivatives L;
    if (s.family == Family::sphere) {
        const auto J = scalar_jets(f, s);
        const int Q = s.points(), n = s.dim;
        L.v = J.val;
        L.grad_v = J.grad;
        L.lap_v = J.lap;
        L.dtheta = J.dtheta;
        for (int q = 0; q < Q; ++q) {
            auto HJ = detail::sphere_hessian_jets(n, s.radius_sq, s.basis->theta[q], J.dtheta[q]);
            L.hessian.push_back(HJ.H);
            L.nabla_hessian.push_back(HJ.nablaH);
            L.lap_hessian.push_back(HJ.lapH);
            L.grad_v_sq.push_back(J.grad[q][0] * J.grad[q][0] / s.radius_sq);
        }
        return L;
    }
    auto J = scalar_jets_from_points(f.values, s);
    L.v = J.val;
    L.grad_v = J.grad;
    L.hessian = J.hess;
    L.lap_v = J.lap;
    for (std::size_t p = 0; p < L.v.size(); ++p) L.grad_v_sq.push_back(inner(L.grad_v[p], L.grad_v[p], fr.ginv[p]));
    auto T = detail::torus_tensor_jets(L.hessian, s, torus_christoffel(s));
    L.nabla_hessian = std::move(T.nablaH);
    L.lap_hessian = std::move(T.lapH);
    return L;
}

inline SymTensor lichnerowicz(const SymTensor& lapH, const SymTensor& H, const CurvTensor& Rm, const SymTensor& Ric,
                              const SymTensor& ginv) {
    SymTensor r = lapH + 2.0 * curvature_action(Rm, H, ginv);
    r -= 2.0 * product(Ric, ginv, H);  // product() is (Ric H + H Ric)/2
    return r;
}

// ---------------------------------------------------------------------------
// Hessian evolution identity
//
// (d_t - eps Delta) H = delta nabla^2 R + 2 eps (H^2 + Rm(dv, dv) + nabla H . dv)
//     + eps (2 Rm * H - Ric H - H Ric) + (f - eps) (nabla_i R_jk + nabla_j R_ik - nabla_k R_ij) v_k
// with f = 1 under Ricci flow and f = 0 on a static metric (no d_t Gamma term).

inline ResidualReport evolution_residual(const SolutionField& sol, double eps, double delta, int max_times = 24) {
    const auto [e0, d0] = sol.eps_delta();
    if (eps != e0 || delta != d0)
        throw ConfigError("evolution_residual: (eps, delta) does not match the solution's equation tag " + std::string(equation_name(sol.eq)));
    const auto& tr = *sol.traj;
    const double flow = tr.evolving() ? 1.0 : 0.0;
    ResidualReport rep;
    rep.name = "evolution_residual";
    double sum_l2 = 0.0;
    int nt = 0;
    for (int k : interior_steps(std::max(sol.k_first, sol.k_burn() - 1), sol.count(), max_times)) {
        const auto& s = tr.at(k);
        const auto fr = point_frame(s);
        const auto cb = curvature_bundle(s, fr);
        const auto Lm = log_jets(sol.at(k - 1), tr.at(k - 1), point_frame(tr.at(k - 1)), false);
        const auto Lp = log_jets(sol.at(k + 1), tr.at(k + 1), point_frame(tr.at(k + 1)), false);
        const auto L = log_jets(sol.at(k), s, fr, true);
        double worst = 0.0, acc = 0.0, vol = 0.0;
        for (int p = 0; p < s.points(); ++p) {
            const auto& gi = fr.ginv[p];
            const auto& H = L.hessian[p];
            const auto& dv = L.grad_v[p];
            SymTensor lhs = (1.0 / (2.0 * tr.dt)) * (Lp.hessian[p] - Lm.hessian[p]);
            lhs -= eps * L.lap_hessian[p];
            SymTensor rhs = delta * cb.hess_scalar[p];
            SymTensor quad = product(H, gi, H) + curvature_on_covector(cb.riemann[p], dv, gi) + contract_first(L.nabla_hessian[p], dv, gi);
            rhs += (2.0 * eps) * quad;
            rhs += eps * (2.0 * curvature_action(cb.riemann[p], H, gi) - 2.0 * product(cb.ricci[p], gi, H));
            rhs += (flow - eps) * ricci_gradient_term(cb.nabla_ricci[p], dv, gi);
            const double r = detail::tensor_norm(lhs - rhs, gi);
            rep.scale = std::max({rep.scale, detail::tensor_norm(lhs, gi), detail::tensor_norm(rhs, gi)});
            worst = std::max(worst, r);
            acc += r * r * fr.weight[p];
            vol += fr.weight[p];
        }
        rep.times.push_back(tr.time(k));
        rep.per_time.push_back(worst);
        rep.linf = std::max(rep.linf, worst);
        sum_l2 += acc / vol;
        ++nt;
    }
    if (nt == 0) throw StencilError("evolution_residual needs three consecutive stored steps");
    rep.finish(sum_l2, nt);
    return rep;
}

// ---------------------------------------------------------------------------
// Commutator of Hessian and Lichnerowicz Laplacian along the trajectory
//
// (d_t - eps Delta_L) nabla^2 f = nabla^2 (d_t - eps Delta) f + (f_flow - eps) (nabla Ric terms) . df

inline ResidualReport lichnerowicz_commutator_residual(const std::vector<GridField>& f, const FlowTrajectory& tr, double eps,
                                                      int max_times = 24) {
    if (static_cast<int>(f.size()) != tr.count()) throw ShapeError("commutator: need one field per stored step");
    const double flow = tr.evolving() ? 1.0 : 0.0;
    ResidualReport rep;
    rep.name = "lichnerowicz_commutator_residual";
    double sum_l2 = 0.0;
    int nt = 0;
    for (int k : interior_steps(0, tr.count(), max_times)) {
        const auto& s = tr.at(k);
        const auto fr = point_frame(s);
        const auto cb = curvature_bundle(s, fr);
        const auto Hm = hessian_jets(f[k - 1], tr.at(k - 1), point_frame(tr.at(k - 1)));
        const auto Hp = hessian_jets(f[k + 1], tr.at(k + 1), point_frame(tr.at(k + 1)));
        const auto Hk = hessian_jets(f[k], s, fr);
        // field (d_t - eps Delta) f at step k
        GridField q = f[k];
        const auto lapf = laplace_beltrami(f[k], s);
        for (std::size_t i = 0; i < q.values.size(); ++i)
            q.values[i] = (f[k + 1].values[i] - f[k - 1].values[i]) / (2.0 * tr.dt) - eps * lapf.values[i];
        const auto Hq = hessian_jets(q, s, fr);
        double worst = 0.0, acc = 0.0, vol = 0.0;
        for (int p = 0; p < s.points(); ++p) {
            const auto& gi = fr.ginv[p];
            SymTensor lhs = (1.0 / (2.0 * tr.dt)) * (Hp.hessian[p] - Hm.hessian[p]);
            lhs -= eps * lichnerowicz(Hk.lap_hessian[p], Hk.hessian[p], cb.riemann[p], cb.ricci[p], gi);
            SymTensor rhs = Hq.hessian[p] + (flow - eps) * ricci_gradient_term(cb.nabla_ricci[p], Hk.grad_v[p], gi);
            const double r = detail::tensor_norm(lhs - rhs, gi);
            rep.scale = std::max({rep.scale, detail::tensor_norm(lhs, gi), detail::tensor_norm(rhs, gi)});
            worst = std::max(worst, r);
            acc += r * r * fr.weight[p];
            vol += fr.weight[p];
        }
        rep.times.push_back(tr.time(k));
        rep.per_time.push_back(worst);
        rep.linf = std::max(rep.linf, worst);
        sum_l2 += acc / vol;
        ++nt;
    }
    if (nt == 0) throw StencilError("commutator residual needs at least 3 stored steps");
    rep.finish(sum_l2, nt);
    return rep;
}

// ---------------------------------------------------------------------------
// Classical identities for L = Delta + 2 nabla log u . nabla - d_t and a heat solution u:
//   L(Delta u / u) = -2 f Ric(nabla^2 u) / u
//   L(|nabla log u|^2) = 2 |nabla^2 log u|^2 + 2 (1 - f) Ric(nabla log u, nabla log u)
// with f = 1 under Ricci flow, f = 0 on a static metric.

namespace detail {

struct ClassicalPoint {
    std::vector<double> w, z;              // Delta u / u and |nabla log u|^2 at sample points
    std::vector<double> Lw_space, Lz_space;  // Delta + 2 nabla v . nabla applied
    std::vector<double> rhs_w, rhs_z;
};

inline ClassicalPoint classical_terms(const GridField& u, const MetricSnapshot& s, const PointFrame& fr, const CurvatureBundle& cb,
                                      double flow) {
    ClassicalPoint C;
    const auto L = log_jets(u, s, fr, false);
    const int P = s.points();
    C.w.resize(P);
    C.z = L.grad_v_sq;
    C.Lw_space.resize(P);
    C.Lz_space.resize(P);
    C.rhs_w.resize(P);
    C.rhs_z.resize(P);
    if (s.family == Family::sphere) {
        const auto& B = *s.basis;
        const auto J = scalar_jets(u, s);
        const auto lapu = laplace_beltrami(u, s);
        const auto bq = B.to_cosine(lapu.values);
        const int n = s.dim;
        const double r2 = s.radius_sq;
        for (int q = 0; q < P; ++q) {
            const double th = B.theta[q], ct = std::cos(th) / std::sin(th);
            const auto& ud = J.dtheta[q];
            const double q0 = ZonalBasis::eval_cosine(bq, th, 0), q1 = ZonalBasis::eval_cosine(bq, th, 1),
                         q2 = ZonalBasis::eval_cosine(bq, th, 2);
            const double u0 = ud[0], u1 = ud[1], u2 = ud[2];
            const double w0 = q0 / u0;
            const double w1 = q1 / u0 - q0 * u1 / (u0 * u0);
            const double w2 = q2 / u0 - 2.0 * q1 * u1 / (u0 * u0) - q0 * u2 / (u0 * u0) + 2.0 * q0 * u1 * u1 / (u0 * u0 * u0);
            const auto& v = L.dtheta[q];
            const double z1 = 2.0 * v[1] * v[2] / r2, z2 = 2.0 * (v[2] * v[2] + v[1] * v[3]) / r2;
            C.w[q] = w0;
            C.Lw_space[q] = (w2 + (n - 1) * ct * w1) / r2 + 2.0 * v[1] * w1 / r2;
            C.Lz_space[q] = (z2 + (n - 1) * ct * z1) / r2 + 2.0 * v[1] * z1 / r2;
            const auto& gi = fr.ginv[q];
            const SymTensor hu = sphere_hessian(n, u2, u1, std::sin(th), std::cos(th));
            const SymTensor ric_up = [&] {
                SymTensor a(n);
                for (int i = 0; i < n; ++i)
                    for (int j = i; j < n; ++j) {
                        double acc = 0.0;
                        for (int a1 = 0; a1 < n; ++a1)
                            for (int b1 = 0; b1 < n; ++b1) acc += gi(i, a1) * cb.ricci[q](a1, b1) * gi(b1, j);
                        a.set(i, j, acc);
                    }
                return a;
            }();
            double rh = 0.0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) rh += ric_up(i, j) * hu(i, j);
            C.rhs_w[q] = -2.0 * flow * rh / u0;
            C.rhs_z[q] = 2.0 * norm_sq(L.hessian[q], gi) + 2.0 * (1.0 - flow) * quad_form(ric_up, L.grad_v[q]);
        }
        return C;
    }
    const auto lapu = laplace_beltrami(u, s);
    const auto Ju = scalar_jets_from_points(u.values, s);
    for (int p = 0; p < P; ++p) C.w[p] = lapu.values[p] / u.values[p];
    const auto Jw = scalar_jets_from_points(C.w, s);
    const auto Jz = scalar_jets_from_points(C.z, s);
    for (int p = 0; p < P; ++p) {
        const auto& gi = fr.ginv[p];
        C.Lw_space[p] = Jw.lap[p] + 2.0 * inner(L.grad_v[p], Jw.grad[p], gi);
        C.Lz_space[p] = Jz.lap[p] + 2.0 * inner(L.grad_v[p], Jz.grad[p], gi);
        // Ric = K g on a surface
        const double K = cb.scalar[p] / 2.0;
        C.rhs_w[p] = -2.0 * flow * K * trace(Ju.hess[p], gi) / u.values[p];
        C.rhs_z[p] = 2.0 * norm_sq(L.hessian[p], gi) + 2.0 * (1.0 - flow) * K * L.grad_v_sq[p];
    }
    return C;
}

}  // namespace detail

inline std::vector<ResidualReport> classical_identity_residuals(const SolutionField& sol, int max_times = 24) {
    if (sol.eq == Equation::conjugate_backward) throw ConfigError("classical identities need a forward heat solution");
    const auto& tr = *sol.traj;
    const double flow = tr.evolving() ? 1.0 : 0.0;
    ResidualReport rw, rz;
    rw.name = "L(Delta u/u)";
    rz.name = "L(|grad log u|^2)";
    double lw = 0.0, lz = 0.0;
    int nt = 0;
    for (int k : interior_steps(std::max(sol.k_first, sol.k_burn() - 1), sol.count(), max_times)) {
        const auto& s = tr.at(k);
        const auto fr = point_frame(s);
        const auto cb = curvature_bundle(s, fr);
        const auto C = detail::classical_terms(sol.at(k), s, fr, cb, flow);
        const auto& sm = tr.at(k - 1);
        const auto& sp = tr.at(k + 1);
        const auto Cm = detail::classical_terms(sol.at(k - 1), sm, point_frame(sm), curvature_bundle(sm), flow);
        const auto Cp = detail::classical_terms(sol.at(k + 1), sp, point_frame(sp), curvature_bundle(sp), flow);
        double ww = 0.0, wz = 0.0, aw = 0.0, az = 0.0, vol = 0.0;
        for (int p = 0; p < s.points(); ++p) {
            const double lw_ = C.Lw_space[p] - (Cp.w[p] - Cm.w[p]) / (2.0 * tr.dt);
            const double lz_ = C.Lz_space[p] - (Cp.z[p] - Cm.z[p]) / (2.0 * tr.dt);
            const double ew = std::abs(lw_ - C.rhs_w[p]), ez = std::abs(lz_ - C.rhs_z[p]);
            rw.scale = std::max({rw.scale, std::abs(lw_), std::abs(C.rhs_w[p]), std::abs(C.Lw_space[p])});
            rz.scale = std::max({rz.scale, std::abs(lz_), std::abs(C.rhs_z[p]), std::abs(C.Lz_space[p])});
            ww = std::max(ww, ew);
            wz = std::max(wz, ez);
            aw += ew * ew * fr.weight[p];
            az += ez * ez * fr.weight[p];
            vol += fr.weight[p];
        }
        rw.times.push_back(tr.time(k));
        rz.times.push_back(tr.time(k));
        rw.per_time.push_back(ww);
        rz.per_time.push_back(wz);
        rw.linf = std::max(rw.linf, ww);
        rz.linf = std::max(rz.linf, wz);
        lw += aw / vol;
        lz += az / vol;
        ++nt;
    }
    if (nt == 0) throw StencilError("classical identities need three consecutive stored steps");
    rw.finish(lw, nt);
    rz.finish(lz, nt);
    return {rw, rz};
}

}  // namespace rflab
