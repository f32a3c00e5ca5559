#pragma once
// Ricci flow trajectories: closed form on round spheres, RK4 on the conformal
// factor of a torus, or a static metric.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rflab/geometry.hpp"

namespace rflab {

enum class FlowMode { exact_sphere, numerical_torus, static_metric };

inline const char* mode_name(FlowMode m) {
    switch (m) {
        case FlowMode::exact_sphere: return "exact_sphere";
        case FlowMode::numerical_torus: return "numerical_torus";
        default: return "static";
    }
}

inline FlowMode parse_mode(const std::string& s) {
    if (s == "exact_sphere") return FlowMode::exact_sphere;
    if (s == "numerical_torus") return FlowMode::numerical_torus;
    if (s == "static") return FlowMode::static_metric;
    throw ConfigError("unknown flow mode '" + s + "'");
}

struct FlowConfig {
    double T = 0.1;
    double dt = 1e-3;
    FlowMode mode = FlowMode::static_metric;
    double cfl_safety = 0.9;
    int store_every = 1;  // internal steps between stored snapshots
};

inline double torus_cfl_limit(const MetricSnapshot& s, double cfl_safety) {
    double lo = (*s.phi)[0];
    for (double v : *s.phi) lo = std::min(lo, v);
    const double h = s.h();
    return cfl_safety * h * h * std::exp(2.0 * lo) / 4.0;
}

struct FlowTrajectory {
    FlowMode mode = FlowMode::static_metric;
    std::vector<MetricSnapshot> snaps;
    double dt = 0.0;           // spacing of stored snapshots
    double dt_internal = 0.0;  // integration step
    int store_every = 1;
    double T = 0.0;
    double r0_sq = 0.0;        // sphere initial radius^2

    Family family() const { return snaps.front().family; }
    int dim() const { return snaps.front().dim; }
    int count() const { return static_cast<int>(snaps.size()); }
    double time(int k) const { return k * dt; }
    const MetricSnapshot& at(int k) const { return snaps.at(k); }

    bool evolving() const { return mode != FlowMode::static_metric; }

    double extinction_time() const {
        if (family() != Family::sphere || mode != FlowMode::exact_sphere) return std::numeric_limits<double>::infinity();
        return r0_sq / (2.0 * (dim() - 1));
    }

    // Linear in r^2 (sphere) or phi (torus) between stored snapshots.
    MetricSnapshot at_time(double t) const {
        if (t < -1e-14 || t > T + 1e-12 * std::max(1.0, T)) throw DomainError("time outside trajectory");
        t = std::clamp(t, 0.0, T);
        int k = static_cast<int>(std::floor(t / dt));
        k = std::clamp(k, 0, count() - 1);
        if (k == count() - 1) return snaps[k];
        const double w = (t - time(k)) / dt;
        if (w <= 0.0) return snaps[k];
        const auto& a = snaps[k];
        const auto& b = snaps[k + 1];
        if (a.family == Family::sphere) return a.with_radius_sq((1 - w) * a.radius_sq + w * b.radius_sq, t);
        if (a.phi == b.phi) { auto m = a; m.t = t; return m; }
        std::vector<double> p(a.phi->size());
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = (1 - w) * (*a.phi)[i] + w * (*b.phi)[i];
        return a.with_phi(std::move(p), t);
    }
};

inline std::vector<double> torus_flow_rhs(const std::vector<double>& phi, const Periodic2D& ops) {
    auto r = ops.lap(phi);
    for (std::size_t k = 0; k < r.size(); ++k) r[k] *= std::exp(-2.0 * phi[k]);
    return r;
}

inline FlowTrajectory evolve_ricci_flow(const MetricSnapshot& initial, const FlowConfig& cfg) {
    if (!(cfg.T > 0.0) || !(cfg.dt > 0.0)) throw ConfigError("flow needs T > 0 and dt > 0");
    if (!(cfg.cfl_safety > 0.0 && cfg.cfl_safety <= 1.0)) throw ConfigError("cfl_safety must lie in (0, 1]");
    if (cfg.store_every < 1) throw ConfigError("store_every must be >= 1");
    FlowTrajectory tr;
    tr.mode = cfg.mode;
    tr.T = cfg.T;
    tr.store_every = cfg.store_every;
    const long steps = std::lround(std::ceil(cfg.T / cfg.dt - 1e-9));
    if (steps % cfg.store_every != 0) throw ConfigError("number of steps must be a multiple of store_every");
    tr.dt_internal = cfg.T / static_cast<double>(steps);
    tr.dt = tr.dt_internal * cfg.store_every;
    const long stored = steps / cfg.store_every;
    MetricSnapshot s0 = initial;
    s0.t = 0.0;
    if (cfg.mode == FlowMode::exact_sphere) {
        if (initial.family != Family::sphere) throw ConfigError("exact_sphere mode needs a round sphere");
        tr.r0_sq = initial.radius_sq;
        const double ext = initial.radius_sq / (2.0 * (initial.dim - 1));
        if (cfg.T >= ext)
            throw HorizonError("requested T = " + std::to_string(cfg.T) + " reaches the extinction time " + std::to_string(ext));
        for (long k = 0; k <= stored; ++k) {
            const double t = k * tr.dt;
            tr.snaps.push_back(s0.with_radius_sq(initial.radius_sq - 2.0 * (initial.dim - 1) * t, t));
        }
        return tr;
    }
    if (cfg.mode == FlowMode::static_metric) {
        tr.r0_sq = initial.radius_sq;
        for (long k = 0; k <= stored; ++k) {
            auto s = s0;
            s.t = k * tr.dt;
            tr.snaps.push_back(s);
        }
        return tr;
    }
    if (initial.family != Family::torus) throw ConfigError("numerical_torus mode needs a conformal torus");
    const double lim = torus_cfl_limit(initial, cfg.cfl_safety);
    if (tr.dt_internal > lim)
        throw ConfigError("CFL violated: dt = " + std::to_string(tr.dt_internal) + " exceeds cfl_safety*h^2*min(e^{2phi})/4 = " +
                          std::to_string(lim));
    const auto ops = grid_ops(initial);
    std::vector<double> phi = *initial.phi;
    tr.snaps.push_back(s0);
    const double h = tr.dt_internal;
    std::vector<double> tmp(phi.size());
    for (long k = 1; k <= steps; ++k) {
        const auto k1 = torus_flow_rhs(phi, ops);
        for (std::size_t i = 0; i < phi.size(); ++i) tmp[i] = phi[i] + 0.5 * h * k1[i];
        const auto k2 = torus_flow_rhs(tmp, ops);
        for (std::size_t i = 0; i < phi.size(); ++i) tmp[i] = phi[i] + 0.5 * h * k2[i];
        const auto k3 = torus_flow_rhs(tmp, ops);
        for (std::size_t i = 0; i < phi.size(); ++i) tmp[i] = phi[i] + h * k3[i];
        const auto k4 = torus_flow_rhs(tmp, ops);
        for (std::size_t i = 0; i < phi.size(); ++i) phi[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if (k % cfg.store_every == 0) tr.snaps.push_back(s0.with_phi(phi, (k / cfg.store_every) * tr.dt));
    }
    return tr;
}

// max over interior stored times of |centered d_t g + 2 Ric|_inf / |g|_inf
inline double ricci_flow_residual(const FlowTrajectory& tr) {
    if (tr.count() < 3) throw StencilError("ricci_flow_residual needs at least 3 snapshots");
    double worst = 0.0;
    const int n = tr.dim();
    for (int k = 1; k + 1 < tr.count(); ++k) {
        const auto& a = tr.at(k - 1);
        const auto& m = tr.at(k);
        const auto& b = tr.at(k + 1);
        if (m.family == Family::sphere) {
            // g = r^2 ghat, Ric = (n-1) ghat
            const double dg = (b.radius_sq - a.radius_sq) / (2.0 * tr.dt);
            worst = std::max(worst, std::abs(dg + 2.0 * (n - 1)) / m.radius_sq);
            continue;
        }
        const auto ops = grid_ops(m);
        const auto lp = ops.lap(*m.phi);
        for (std::size_t p = 0; p < lp.size(); ++p) {
            const double g = std::exp(2.0 * (*m.phi)[p]);
            const double K = -lp[p] / g;
            const double dg = (std::exp(2.0 * (*b.phi)[p]) - std::exp(2.0 * (*a.phi)[p])) / (2.0 * tr.dt);
            worst = std::max(worst, std::abs(dg + 2.0 * K * g) / g);
        }
    }
    return worst;
}

// Directory layout: manifest.json plus one binary field per stored torus snapshot.
inline void save_trajectory(const FlowTrajectory& tr, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json m;
    const auto& s0 = tr.at(0);
    m["geometry"] = family_name(s0.family);
    m["dim"] = s0.dim;
    m["mode"] = mode_name(tr.mode);
    m["dt"] = tr.dt;
    m["dt_internal"] = tr.dt_internal;
    m["store_every"] = tr.store_every;
    m["T"] = tr.T;
    m["count"] = tr.count();
    if (s0.family == Family::sphere) {
        m["L"] = s0.L;
        m["r0_sq"] = tr.r0_sq;
        std::vector<double> r2;
        for (const auto& s : tr.snaps) r2.push_back(s.radius_sq);
        m["radius_sq"] = r2;
    } else {
        m["N"] = s0.N;
        m["period"] = s0.period;
        std::vector<std::string> files;
        for (int k = 0; k < tr.count(); ++k) {
            char name[32];
            std::snprintf(name, sizeof name, "phi_%05d.bin", k);
            GridField f;
            f.family = Family::torus;
            f.dim = 2;
            f.res = s0.N;
            f.values = *tr.at(k).phi;
            write_field_binary(f, s0.period, (fs::path(dir) / name).string());
            files.push_back(name);
        }
        m["files"] = files;
    }
    std::ofstream os((fs::path(dir) / "manifest.json").string());
    os << m.dump(2) << "\n";
}

inline FlowTrajectory load_trajectory(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream is((fs::path(dir) / "manifest.json").string());
    if (!is) throw ConfigError("missing manifest.json in " + dir);
    nlohmann::json m;
    is >> m;
    FlowTrajectory tr;
    tr.mode = parse_mode(m.at("mode").get<std::string>());
    tr.dt = m.at("dt").get<double>();
    tr.dt_internal = m.at("dt_internal").get<double>();
    tr.store_every = m.at("store_every").get<int>();
    tr.T = m.at("T").get<double>();
    const int count = m.at("count").get<int>();
    if (m.at("geometry").get<std::string>() == "round_sphere") {
        RoundSphere rs;
        rs.n = m.at("dim").get<int>();
        rs.L = m.at("L").get<int>();
        tr.r0_sq = m.at("r0_sq").get<double>();
        const auto r2 = m.at("radius_sq").get<std::vector<double>>();
        rs.radius_sq = r2.at(0);
        const auto s0 = MetricSnapshot::sphere(rs);
        for (int k = 0; k < count; ++k) tr.snaps.push_back(s0.with_radius_sq(r2.at(k), k * tr.dt));
    } else {
        ConformalTorus2D c;
        c.N = m.at("N").get<int>();
        c.period = m.at("period").get<double>();
        const auto files = m.at("files").get<std::vector<std::string>>();
        for (int k = 0; k < count; ++k) {
            auto f = read_field_binary((fs::path(dir) / files.at(k)).string());
            c.phi = f.values;
            tr.snaps.push_back(MetricSnapshot::torus(c, k * tr.dt));
        }
    }
    return tr;
}

}  // namespace rflab
