#pragma once
// Heat equation forward, conjugate heat equation backward, and Gaussian-seeded
// approximate heat kernels along a flow trajectory.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "rflab/flow.hpp"

namespace rflab {

enum class Equation { heat, conjugate_backward, static_heat };

inline const char* equation_name(Equation e) {
    switch (e) {
        case Equation::heat: return "heat";
        case Equation::conjugate_backward: return "conjugate_backward";
        default: return "static_heat";
    }
}

using TrajPtr = std::shared_ptr<const FlowTrajectory>;

struct SolutionField {
    TrajPtr traj;
    Equation eq = Equation::heat;
    int k_first = 0;                // first stored step carrying data
    std::vector<GridField> values;  // indexed by stored step; empty before k_first
    double min_ratio = 0.0;         // min over space-time of u / max|u|
    bool positivity_violated = false;
    double t_burn = 0.0;            // reports start here
    double width_sq = 0.0;          // kernels: squared Gaussian width at burn-in, else 0

    int k_burn() const {
        const int k = static_cast<int>(std::ceil(t_burn / traj->dt - 1e-9));
        return std::max(k, k_first);
    }

    int count() const { return static_cast<int>(values.size()); }
    bool has(int k) const { return k >= k_first && k < count(); }
    const GridField& at(int k) const {
        if (!has(k)) throw DomainError("solution has no data at stored step " + std::to_string(k));
        return values[k];
    }
    double time(int k) const { return traj->time(k); }
    const MetricSnapshot& metric(int k) const { return traj->at(k); }
    // (eps, delta) with (d_t - eps Delta) u = delta R u
    std::pair<double, double> eps_delta() const {
        return eq == Equation::conjugate_backward ? std::pair{-1.0, 1.0} : std::pair{1.0, 0.0};
    }
};

namespace detail {

inline void check_finite(const GridField& f, const char* what) {
    for (double v : f.values)
        if (!std::isfinite(v)) throw DomainError(std::string(what) + " contains non-finite values");
}

inline int stored_index(const FlowTrajectory& tr, double t) {
    const double q = t / tr.dt;
    const long k = std::lround(q);
    if (std::abs(q - k) > 1e-9 || k < 0 || k >= tr.count()) throw DomainError("time " + std::to_string(t) + " is not a stored step");
    return static_cast<int>(k);
}

inline void torus_solver_cfl(const FlowTrajectory& tr) {
    // RK4 on the 5-point Laplacian is stable for dt * 8/(h^2 e^{2 phi_min}) < 2.78; we keep the flow bound.
    const double lim = torus_cfl_limit(tr.at(0), 1.0);
    if (tr.dt_internal > lim * (1.0 + 1e-12))
        throw ConfigError("CFL violated: solver step " + std::to_string(tr.dt_internal) + " exceeds h^2*min(e^{2phi})/4 = " + std::to_string(lim));
}

struct TorusStage {
    std::vector<double> emf;  // e^{-2 phi}
    std::vector<double> R;    // scalar curvature (conjugate only)
};

inline TorusStage torus_stage(const FlowTrajectory& tr, double t, bool need_R) {
    const auto s = tr.at_time(t);
    const auto& phi = *s.phi;
    TorusStage st;
    st.emf.resize(phi.size());
    for (std::size_t k = 0; k < phi.size(); ++k) st.emf[k] = std::exp(-2.0 * phi[k]);
    if (need_R) {
        const auto lp = grid_ops(s).lap(phi);
        st.R.resize(phi.size());
        for (std::size_t k = 0; k < phi.size(); ++k) st.R[k] = -2.0 * st.emf[k] * lp[k];
    }
    return st;
}

// sign = +1: du/dt = Delta u (forward). sign = -1: du/ds = Delta u - R u with s = T - t.
inline std::vector<double> torus_rhs(const std::vector<double>& u, const TorusStage& st, const Periodic2D& ops, bool conj) {
    auto r = ops.lap(u);
    for (std::size_t k = 0; k < r.size(); ++k) {
        r[k] *= st.emf[k];
        if (conj) r[k] -= st.R[k] * u[k];
    }
    return r;
}

inline void rk4_step(std::vector<double>& u, double h, const TorusStage& a, const TorusStage& m, const TorusStage& b,
                     const Periodic2D& ops, bool conj) {
    std::vector<double> tmp(u.size());
    const auto k1 = torus_rhs(u, a, ops, conj);
    for (std::size_t i = 0; i < u.size(); ++i) tmp[i] = u[i] + 0.5 * h * k1[i];
    const auto k2 = torus_rhs(tmp, m, ops, conj);
    for (std::size_t i = 0; i < u.size(); ++i) tmp[i] = u[i] + 0.5 * h * k2[i];
    const auto k3 = torus_rhs(tmp, m, ops, conj);
    for (std::size_t i = 0; i < u.size(); ++i) tmp[i] = u[i] + h * k3[i];
    const auto k4 = torus_rhs(tmp, b, ops, conj);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

inline void record_positivity(SolutionField& sol, bool data_positive) {
    double worst = std::numeric_limits<double>::infinity();
    for (int k = sol.k_first; k < sol.count(); ++k) {
        const auto pv = point_values(sol.values[k], sol.metric(k));
        double lo = pv[0], hi = 0.0;
        for (double v : pv) { lo = std::min(lo, v); hi = std::max(hi, std::abs(v)); }
        if (hi > 0.0) worst = std::min(worst, lo / hi);
    }
    sol.min_ratio = std::isfinite(worst) ? worst : 0.0;
    sol.positivity_violated = data_positive && sol.min_ratio < -1e-12;
}

inline bool all_positive(const GridField& f, const MetricSnapshot& s) {
    for (double v : point_values(f, s))
        if (!(v > 0.0)) return false;
    return true;
}

}  // namespace detail

inline SolutionField solve_heat_forward(TrajPtr traj, const GridField& initial, double t0 = 0.0) {
    const auto& tr = *traj;
    tr.at(0).check_field(initial);
    detail::check_finite(initial, "initial data");
    if (t0 < 0.0 || t0 >= tr.T) throw DomainError("t0 must lie in [0, T)");
    const int k0 = detail::stored_index(tr, t0);
    SolutionField sol;
    sol.traj = traj;
    sol.eq = tr.evolving() ? Equation::heat : Equation::static_heat;
    sol.k_first = k0;
    sol.t_burn = tr.time(k0);
    sol.values.assign(tr.count(), GridField{});
    sol.values[k0] = initial;
    const bool pos = detail::all_positive(initial, tr.at(k0));
    if (tr.family() == Family::sphere) {
        const auto& B = *tr.at(0).basis;
        const int n = tr.dim();
        const double r2a = tr.at(k0).radius_sq;
        for (int k = k0 + 1; k < tr.count(); ++k) {
            GridField f = initial;
            const double r2 = tr.at(k).radius_sq;
            for (int l = 0; l <= B.L; ++l) {
                const double lam = B.lambda(l);
                const double fac = tr.mode == FlowMode::exact_sphere ? std::pow(r2 / r2a, lam / (2.0 * (n - 1)))
                                                                     : std::exp(-lam * (tr.time(k) - tr.time(k0)) / r2a);
                f.values[l] *= fac;
            }
            sol.values[k] = std::move(f);
        }
        detail::record_positivity(sol, pos);
        return sol;
    }
    detail::torus_solver_cfl(tr);
    const auto ops = grid_ops(tr.at(0));
    std::vector<double> u = initial.values;
    const double h = tr.dt_internal;
    for (int k = k0; k + 1 < tr.count(); ++k) {
        for (int j = 0; j < tr.store_every; ++j) {
            const double ta = tr.time(k) + j * h;
            const auto A = detail::torus_stage(tr, ta, false);
            const auto M = detail::torus_stage(tr, ta + 0.5 * h, false);
            const auto Bst = detail::torus_stage(tr, std::min(ta + h, tr.T), false);
            detail::rk4_step(u, h, A, M, Bst, ops, false);
        }
        GridField f = initial;
        f.values = u;
        detail::check_finite(f, "heat solution");
        sol.values[k + 1] = std::move(f);
    }
    detail::record_positivity(sol, pos);
    return sol;
}

inline SolutionField solve_conjugate_backward(TrajPtr traj, const GridField& final_data) {
    const auto& tr = *traj;
    tr.at(0).check_field(final_data);
    detail::check_finite(final_data, "final data");
    SolutionField sol;
    sol.traj = traj;
    sol.eq = Equation::conjugate_backward;
    sol.k_first = 0;
    const int K = tr.count() - 1;
    sol.values.assign(tr.count(), GridField{});
    sol.values[K] = final_data;
    const bool pos = detail::all_positive(final_data, tr.at(K));
    if (tr.family() == Family::sphere) {
        const auto& B = *tr.at(0).basis;
        const int n = tr.dim();
        const double r2T = tr.at(K).radius_sq;
        for (int k = K - 1; k >= 0; --k) {
            GridField f = final_data;
            const double r2 = tr.at(k).radius_sq;
            for (int l = 0; l <= B.L; ++l) {
                const double rate = B.lambda(l) + n * (n - 1.0);
                const double fac = tr.mode == FlowMode::exact_sphere ? std::pow(r2T / r2, rate / (2.0 * (n - 1)))
                                                                     : std::exp(-rate * (tr.T - tr.time(k)) / r2T);
                f.values[l] *= fac;
            }
            sol.values[k] = std::move(f);
        }
        detail::record_positivity(sol, pos);
        return sol;
    }
    detail::torus_solver_cfl(tr);
    const auto ops = grid_ops(tr.at(0));
    std::vector<double> u = final_data.values;
    const double h = tr.dt_internal;
    for (int k = K; k > 0; --k) {
        for (int j = 0; j < tr.store_every; ++j) {
            const double ta = tr.time(k) - j * h;
            const auto A = detail::torus_stage(tr, ta, true);
            const auto M = detail::torus_stage(tr, ta - 0.5 * h, true);
            const auto Bst = detail::torus_stage(tr, std::max(ta - h, 0.0), true);
            detail::rk4_step(u, h, A, M, Bst, ops, true);
        }
        GridField f = final_data;
        f.values = u;
        detail::check_finite(f, "conjugate solution");
        sol.values[k - 1] = std::move(f);
    }
    detail::record_positivity(sol, pos);
    return sol;
}

// ---------------------------------------------------------------------------
// Approximate heat kernel

struct KernelApprox {
    SolutionField sol;
    Point pole;
    int pole_index = -1;  // torus grid index of the pole
    double t_start = 0.0;
    double sigma0 = 0.0;
    double t_burn = 0.0;
    int k_start = 0;
    int k_burn = 0;
    double raw_mass = 0.0;  // Gaussian mass before renormalization
};

inline KernelApprox approximate_heat_kernel(TrajPtr traj, const Point& pole, double t_start = -1.0) {
    const auto& tr = *traj;
    if (!(t_start > 0.0)) t_start = tr.T / 1000.0;
    KernelApprox ka;
    ka.k_start = std::max(1, static_cast<int>(std::lround(t_start / tr.dt)));
    if (ka.k_start >= tr.count() - 1) throw ConfigError("kernel t_start leaves no room before T");
    ka.t_start = tr.time(ka.k_start);
    ka.sigma0 = std::sqrt(2.0 * ka.t_start);
    ka.t_burn = 2.0 * ka.t_start;
    ka.k_burn = 2 * ka.k_start;
    const auto& s = tr.at(ka.k_start);
    const int n = s.dim;
    const double ts = ka.t_start;
    const double norm = std::pow(4.0 * std::numbers::pi * ts, -0.5 * n);
    GridField g0 = s.zero_field();
    if (s.family == Family::sphere) {
        const double nx = std::hypot(pole.x[0], pole.x[1], pole.x[2]);
        if (std::abs(pole.x[0] - nx) > 1e-12 * std::max(1.0, nx) || std::abs(pole.x[3]) > 1e-12)
            throw ConfigError("zonal kernels need the pole on the symmetry axis (theta = 0)");
        ka.pole = sphere_point_at_angle(0.0);
        const double cell = std::numbers::pi * std::sqrt(s.radius_sq) / s.basis->Q;
        if (ka.sigma0 < 4.0 * cell) throw ConfigError("kernel sigma0 spans fewer than 4 node spacings; raise t_start or L");
        const double r = std::sqrt(s.radius_sq);
        g0.values = s.basis->project([&](double th) { return norm * std::exp(-(r * th) * (r * th) / (4.0 * ts)); });
    } else {
        const double h = s.h();
        const int i0 = static_cast<int>(std::lround(pole.x[0] / h)) % s.N;
        const int j0 = static_cast<int>(std::lround(pole.x[1] / h)) % s.N;
        ka.pole_index = ((j0 + s.N) % s.N) * s.N + (i0 + s.N) % s.N;
        ka.pole = sample_point(s, ka.pole_index);
        const double ep = std::exp((*s.phi)[ka.pole_index]);
        if (ka.sigma0 < 4.0 * h * ep) throw ConfigError("kernel sigma0 spans fewer than 4 grid cells; raise t_start or N");
        for (int p = 0; p < s.points(); ++p) {
            const auto q = sample_point(s, p);
            const double d = ep * flat_periodic_distance(ka.pole.x[0], ka.pole.x[1], q.x[0], q.x[1], s.period);
            g0.values[p] = norm * std::exp(-d * d / (4.0 * ts));
        }
    }
    ka.raw_mass = integrate(g0, s);
    for (double& v : g0.values) v /= ka.raw_mass;
    ka.sol = solve_heat_forward(traj, g0, ka.t_start);
    ka.sol.t_burn = ka.t_burn;
    ka.sol.width_sq = 2.0 * ka.t_burn;
    return ka;
}

// ---------------------------------------------------------------------------
// Export: one file per stored step plus a manifest.

inline void save_solution(const SolutionField& sol, const std::string& dir, bool csv = true) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json m;
    const auto& s0 = sol.metric(0);
    m["geometry"] = family_name(s0.family);
    m["dim"] = s0.dim;
    m["res"] = s0.res();
    m["equation"] = equation_name(sol.eq);
    m["dt"] = sol.traj->dt;
    m["k_first"] = sol.k_first;
    std::vector<std::string> files;
    std::vector<double> times;
    for (int k = sol.k_first; k < sol.count(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, csv ? "u_%05d.csv" : "u_%05d.bin", k);
        const double extent = s0.family == Family::sphere ? sol.metric(k).radius_sq : s0.period;
        const auto path = (fs::path(dir) / name).string();
        if (csv) write_field_csv(sol.values[k], extent, path);
        else write_field_binary(sol.values[k], extent, path);
        files.push_back(name);
        times.push_back(sol.time(k));
    }
    m["files"] = files;
    m["times"] = times;
    std::ofstream os((fs::path(dir) / "manifest.json").string());
    os << m.dump(2) << "\n";
}

}  // namespace rflab
