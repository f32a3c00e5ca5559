#pragma once
// Li-Yau-Hamilton quantities: correction functions, geometry certificates,
// eigenvalue reports over space-time and the fit-only constant extraction.

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "rflab/calculus.hpp"

namespace rflab {

// ---------------------------------------------------------------------------
// Correction functions

struct CorrectionValue {
    double value = 0.0;
    double derivative = 0.0;
    double residual = 0.0;  // ODE residual (c) or inequality margin (eta, <= 0 means satisfied)
};

// c(t) = kappa / (1 - e^{-2 kappa t}), with the kappa -> 0 limit 1/(2t).
inline CorrectionValue correction_c_full(double kappa, double t) {
    if (!(t > 0.0)) throw DomainError("correction_c needs t > 0");
    if (kappa < 0.0) throw DomainError("correction_c needs kappa >= 0");
    CorrectionValue r;
    if (kappa == 0.0) {
        r.value = 0.5 / t;
        r.derivative = -0.5 / (t * t);
    } else {
        const double den = -std::expm1(-2.0 * kappa * t);
        r.value = kappa / den;
        r.derivative = -2.0 * kappa * kappa * std::exp(-2.0 * kappa * t) / (den * den);
    }
    r.residual = r.derivative + 2.0 * r.value * r.value - 2.0 * kappa * r.value;
    return r;
}

inline double correction_c(double kappa, double t) {
    const auto r = correction_c_full(kappa, t);
    const double lo = 0.5 / t;
    if (kappa > 0.0 && !(r.value > lo && r.value < lo + kappa))
        throw DomainError("correction_c sandwich failed (floating point range exhausted)");
    return r.value;
}

enum class EtaVariant { explicit_eta, ancient };

inline EtaVariant parse_eta_variant(const std::string& s) {
    if (s == "explicit") return EtaVariant::explicit_eta;
    if (s == "ancient") return EtaVariant::ancient;
    throw ConfigError("unknown eta variant '" + s + "'");
}

inline const char* eta_variant_name(EtaVariant v) { return v == EtaVariant::ancient ? "ancient" : "explicit"; }

// kappa/(1 - e^{-2 kappa s}) for s = T - t, and its t-derivative; 1/(2s) when kappa = 0
inline std::pair<double, double> eta_blowup_part(double kappa, double s) {
    if (kappa == 0.0) return {0.5 / s, 0.5 / (s * s)};
    const double den = -std::expm1(-2.0 * kappa * s);
    return {kappa / den, 2.0 * kappa * kappa * std::exp(-2.0 * kappa * s) / (den * den)};
}

// Returns eta and the margin of its differential inequality (<= 0 when satisfied).
// explicit: eta' <= 2 eta^2 - 2 kappa eta - kappa/t. ancient: eta' = 2 eta^2 - 2 kappa eta.
inline CorrectionValue eta_correction_full(double kappa, double t, double T, EtaVariant v) {
    if (!(t > 0.0 && t < T)) throw DomainError("eta_correction needs 0 < t < T");
    if (kappa < 0.0) throw DomainError("eta_correction needs kappa >= 0");
    const auto [a, da] = eta_blowup_part(kappa, T - t);
    CorrectionValue r;
    if (v == EtaVariant::ancient) {
        r.value = a;
        r.derivative = da;
        r.residual = r.derivative - (2.0 * a * a - 2.0 * kappa * a);
        return r;
    }
    const double b = std::sqrt(kappa / (2.0 * t));
    r.value = a + b;
    r.derivative = da - (kappa > 0.0 ? 0.5 * b / t : 0.0);
    r.residual = r.derivative - (2.0 * r.value * r.value - 2.0 * kappa * r.value - kappa / t);
    return r;
}

inline double eta_correction(double kappa, double t, double T, EtaVariant v) {
    const auto r = eta_correction_full(kappa, t, T, v);
    const double tol = 1e-10 * std::max(1.0, std::abs(r.derivative));
    if (v == EtaVariant::ancient && std::abs(r.residual) > tol) throw DomainError("ancient eta failed its ODE");
    if (v == EtaVariant::explicit_eta && r.residual > tol) throw DomainError("explicit eta failed its differential inequality");
    return r.value;
}

// eta(T - d) * d for shrinking d; stays >= 1/2 in both variants.
inline bool eta_blows_up(double kappa, double T, EtaVariant v) {
    for (double d = 1e-2 * T; d >= 1e-8 * T; d *= 0.1)
        if (eta_correction_full(kappa, T - d, T, v).value * d < 0.4) return false;
    return true;
}

struct CorrectionProfile {
    std::string kind;  // c_kappa, beta_general, gamma_static, eta_ode, eta_explicit, eta_ancient
    double kappa = 0.0, K = 0.0, L = 0.0, diam = 0.0;
    std::map<std::string, double> constants;
    std::vector<double> times, values;
};

// ---------------------------------------------------------------------------
// Hypothesis certificates

struct Certificate {
    std::string geometry;
    bool sec_nonneg = false;
    bool complex_sec_nonneg = false;
    bool ric_upper = false;  // Ric <= kappa g on the whole trajectory
    bool ric_nonneg = false;
    double kappa = 0.0;
    bool any() const { return sec_nonneg || complex_sec_nonneg || ric_upper || ric_nonneg; }
};

inline Certificate certify(const FlowTrajectory& tr) {
    Certificate c;
    if (tr.family() == Family::sphere) {
        c.geometry = tr.evolving() ? "shrinking_round_sphere" : "static_round_sphere";
        c.sec_nonneg = c.complex_sec_nonneg = c.ric_upper = c.ric_nonneg = true;
        c.kappa = (tr.dim() - 1.0) / tr.at(tr.count() - 1).radius_sq;
        return c;
    }
    bool flat = true;
    for (const auto& s : tr.snaps) flat = flat && s.flat;
    if (flat) {
        c.geometry = "flat_torus";
        c.sec_nonneg = c.complex_sec_nonneg = c.ric_upper = c.ric_nonneg = true;
        c.kappa = 0.0;
    } else {
        c.geometry = "conformal_torus";
    }
    return c;
}

inline nlohmann::json to_json(const Certificate& c) {
    return {{"geometry", c.geometry},
            {"sec_nonneg", c.sec_nonneg},
            {"complex_sec_nonneg", c.complex_sec_nonneg},
            {"ric_upper", c.ric_upper},
            {"ric_nonneg", c.ric_nonneg},
            {"kappa", c.kappa}};
}

// ---------------------------------------------------------------------------
// Tolerances and verdicts

enum class Verdict { holds, violated, inconclusive, report_only };

inline const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::holds: return "holds";
        case Verdict::violated: return "violated";
        case Verdict::inconclusive: return "inconclusive";
        default: return "report_only";
    }
}

struct CheckOptions {
    double c_tol = 10.0;
    double tolerance_scale = 1.0;
    double tol_override = -1.0;  // > 0 replaces the policy value
    double t_burn = -1.0;        // > 0 replaces the solution's burn-in
    double t_max = std::numeric_limits<double>::infinity();
    int delta_end_steps = 10;
    int max_times = 0;           // 0 = every stored step
};

// Relative size of the dropped zonal modes after burn-in: tail coefficients against the minimum of u.
inline double spectral_tail(const SolutionField& sol) {
    const auto& B = *sol.metric(0).basis;
    double worst = 0.0;
    for (int k = sol.k_burn(); k < sol.count(); ++k) {
        const auto& a = sol.values[k].values;
        double tail = 0.0;
        for (int l = std::max(0, B.L - 3); l <= B.L; ++l) tail += std::abs(a[l]) * (B.n == 2 ? 1.0 : l + 1.0);
        double lo = std::numeric_limits<double>::infinity();
        for (double v : B.at_nodes(a)) lo = std::min(lo, std::abs(v));
        if (lo > 0.0) worst = std::max(worst, tail / lo);
    }
    return worst;
}

inline double discretization_size(const SolutionField& sol) {
    const auto& s = sol.metric(0);
    if (s.family == Family::sphere) return spectral_tail(sol);
    // a kernel is resolved relative to its own width, not the period
    return sol.width_sq > 0.0 ? s.h() * s.h() / sol.width_sq : s.h() * s.h();
}

inline double policy_tolerance(const SolutionField& sol, const CheckOptions& o) {
    if (o.tol_override > 0.0) return o.tol_override * o.tolerance_scale;
    const double dt = sol.traj->dt;
    return std::max(1e-8, o.c_tol * (discretization_size(sol) + dt * dt)) * o.tolerance_scale;
}

// Stored steps with t in [lo, hi], thinned to at most max_times.
inline std::vector<int> steps_in(const FlowTrajectory& tr, int first, double lo, double hi, int max_times) {
    std::vector<int> all;
    for (int k = std::max(first, 0); k < tr.count(); ++k) {
        const double t = tr.time(k);
        if (t + 1e-12 >= lo && t <= hi + 1e-12 && t > 0.0) all.push_back(k);
    }
    if (max_times <= 0 || static_cast<int>(all.size()) <= max_times) return all;
    std::vector<int> ks;
    const int m = static_cast<int>(all.size());
    for (int i = 0; i < max_times; ++i) ks.push_back(all[std::lround(i * (m - 1.0) / (max_times - 1.0))]);
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    return ks;
}

inline double burn_time(const SolutionField& sol, const CheckOptions& o) { return o.t_burn > 0.0 ? o.t_burn : sol.t_burn; }

// Signed-definiteness summary. sense "min": holds iff min >= -tol; "max": holds iff max <= tol.
// Eigenvalues are normalized by the correction (c or eta) so tolerances are relative.
struct EigenReport {
    std::string check;
    std::string sense = "min";
    Certificate certificate;
    bool certified = false;
    double extreme = 0.0;  // min (or max) over space-time
    int arg_point = -1;
    double arg_time = 0.0;
    std::vector<double> times, per_time;
    double tolerance_used = 0.0;
    Verdict verdict = Verdict::inconclusive;
    nlohmann::json extra = nlohmann::json::object();

    void add_time(double t, double v, int p) {
        const bool first = times.empty();
        times.push_back(t);
        per_time.push_back(v);
        const bool better = sense == "min" ? v < extreme : v > extreme;
        if (first || better) {
            extreme = v;
            arg_point = p;
            arg_time = t;
        }
    }

    void decide() {
        if (!certified || times.empty()) {
            verdict = Verdict::inconclusive;
            return;
        }
        const bool ok = sense == "min" ? extreme >= -tolerance_used : extreme <= tolerance_used;
        verdict = ok ? Verdict::holds : Verdict::violated;
    }
};

inline nlohmann::json to_json(const EigenReport& r) {
    nlohmann::json j = {{"check", r.check},
                        {"sense", r.sense},
                        {"certificate", to_json(r.certificate)},
                        {"certified", r.certified},
                        {"extreme", r.extreme},
                        {"argmin", {{"point", r.arg_point}, {"time", r.arg_time}}},
                        {"times", r.times},
                        {"per_time", r.per_time},
                        {"tolerance_used", r.tolerance_used},
                        {"verdict", verdict_name(r.verdict)},
                        {"extra", r.extra}};
    return j;
}

inline void write_csv(const EigenReport& r, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write " + path);
    os.precision(17);
    os << "t," << r.sense << "_normalized_eigenvalue\n";
    for (std::size_t i = 0; i < r.times.size(); ++i) os << r.times[i] << "," << r.per_time[i] << "\n";
}

// Fit-only or mixed reports.
struct Report {
    std::string check;
    Verdict verdict = Verdict::report_only;
    nlohmann::json data = nlohmann::json::object();
};

inline nlohmann::json to_json(const Report& r) {
    return {{"check", r.check}, {"verdict", verdict_name(r.verdict)}, {"data", r.data}};
}

// ---------------------------------------------------------------------------
// Heat-equation matrix estimate: H + c(t) g >= 0

namespace detail {

// Hessian of log u at the sphere pole theta = 0: isotropic, v''(0)/r^2.
inline double sphere_pole_hessian(const GridField& u, const MetricSnapshot& s) {
    const auto b = s.basis->to_cosine(u.values);
    std::array<double, 5> d{};
    for (int k = 0; k < 5; ++k) d[k] = ZonalBasis::eval_cosine(b, 0.0, k);
    return detail::log_chain(d)[2] / s.radius_sq;
}

inline double sphere_pole_value(const GridField& u, const MetricSnapshot& s, double th) {
    return s.basis->eval(u.values, th, 0);
}

}  // namespace detail

inline EigenReport heat_lyh_report(const SolutionField& sol, double kappa, const CheckOptions& o = {}, int pole_index = -2) {
    const auto& tr = *sol.traj;
    if (sol.eq == Equation::conjugate_backward) throw ConfigError("heat_lyh_report needs a forward heat solution");
    EigenReport rep;
    rep.check = "heat_matrix_lyh";
    rep.certificate = certify(tr);
    if (!(rep.certificate.sec_nonneg && rep.certificate.ric_upper))
        throw HypothesisError("heat_lyh_report: geometry '" + rep.certificate.geometry +
                              "' does not certify sec >= 0 and Ric <= kappa g; use general_beta_report");
    if (kappa < rep.certificate.kappa * (1.0 - 1e-12))
        throw HypothesisError("heat_lyh_report: kappa below the certified Ricci bound " + std::to_string(rep.certificate.kappa));
    rep.certified = true;
    rep.tolerance_used = policy_tolerance(sol, o);
    const int n = tr.dim();
    const double tb = burn_time(sol, o);
    double trace_min = std::numeric_limits<double>::infinity(), trace_gap = 0.0, pole_abs = 0.0;
    std::vector<double> pole_series;
    for (int k : steps_in(tr, sol.k_burn(), tb, o.t_max, o.max_times)) {
        const double t = tr.time(k);
        const auto& s = tr.at(k);
        const auto fr = point_frame(s);
        const auto L = log_derivatives(sol, k);
        const double c = correction_c(kappa, t);
        double lo = std::numeric_limits<double>::infinity();
        int arg = -1;
        for (int p = 0; p < s.points(); ++p) {
            const auto Z = L.hessian[p] + c * fr.g[p];
            const double lam = generalized_eigenvalues(Z, fr.g[p]).min() / c;
            if (lam < lo) { lo = lam; arg = p; }
            const double tr_field = L.lap_v[p] + n * c;
            const double tr_matrix = trace(L.hessian[p], fr.ginv[p]) + n * c;
            trace_min = std::min(trace_min, tr_field / c);
            trace_gap = std::max(trace_gap, std::abs(tr_field - tr_matrix) / (std::abs(tr_matrix) + c));
        }
        if (pole_index >= 0 || (pole_index == -1 && s.family == Family::sphere)) {
            double pv;
            if (s.family == Family::sphere) {
                pv = (detail::sphere_pole_hessian(sol.at(k), s) + c) / c;
            } else {
                const auto Z = L.hessian[pole_index] + c * fr.g[pole_index];
                pv = generalized_eigenvalues(Z, fr.g[pole_index]).min() / c;
            }
            pole_series.push_back(pv);
            pole_abs = std::max(pole_abs, std::abs(pv));
        }
        rep.add_time(t, lo, arg);
    }
    rep.decide();
    rep.extra["kappa"] = kappa;
    rep.extra["t_burn"] = tb;
    rep.extra["trace_min_normalized"] = std::isfinite(trace_min) ? trace_min : 0.0;
    rep.extra["trace_vs_matrix_relative"] = trace_gap;
    rep.extra["trace_verdict"] = rep.times.empty() ? "inconclusive" : (trace_min >= -rep.tolerance_used ? "holds" : "violated");
    rep.extra["normalization"] = "lambda_min(H + c g)/c";
    if (!pole_series.empty()) {
        rep.extra["pole_series"] = pole_series;
        rep.extra["pole_max_abs"] = pole_abs;
    }
    return rep;
}

// Kernel overload: also tracks the value at the pole (equality case on flat metrics).
inline EigenReport heat_lyh_report(const KernelApprox& ka, double kappa, const CheckOptions& o = {}) {
    const int pole = ka.sol.metric(0).family == Family::sphere ? -1 : ka.pole_index;
    return heat_lyh_report(ka.sol, kappa, o, pole);
}

// ---------------------------------------------------------------------------
// Conjugate matrix estimate: Ric - Hess log u - eta g <= 0

inline EigenReport conjugate_lyh_report(const SolutionField& sol, double kappa, EtaVariant variant, const CheckOptions& o = {}) {
    const auto& tr = *sol.traj;
    if (sol.eq != Equation::conjugate_backward) throw ConfigError("conjugate_lyh_report needs a conjugate heat solution");
    EigenReport rep;
    rep.check = std::string("conjugate_matrix_lyh_") + eta_variant_name(variant);
    rep.sense = "max";
    rep.certificate = certify(tr);
    if (!(rep.certificate.complex_sec_nonneg && rep.certificate.ric_upper))
        throw HypothesisError("conjugate_lyh_report: geometry '" + rep.certificate.geometry +
                              "' does not certify nonnegative complex sectional curvature");
    if (kappa < rep.certificate.kappa * (1.0 - 1e-12))
        throw HypothesisError("conjugate_lyh_report: kappa below the certified Ricci bound");
    rep.certified = true;
    rep.tolerance_used = policy_tolerance(sol, o);
    const double tb = o.t_burn > 0.0 ? o.t_burn : tr.dt;
    const double t_end = tr.T - o.delta_end_steps * tr.dt;
    for (int k : steps_in(tr, 0, tb, std::min(t_end, o.t_max), o.max_times)) {
        const double t = tr.time(k);
        if (!(t < tr.T)) continue;
        const auto& s = tr.at(k);
        const auto fr = point_frame(s);
        const auto cb = curvature_bundle(s, fr);
        const auto L = log_derivatives(sol, k);
        const double eta = eta_correction(kappa, t, tr.T, variant);
        double hi = -std::numeric_limits<double>::infinity();
        int arg = -1;
        for (int p = 0; p < s.points(); ++p) {
            const auto Z = cb.ricci[p] - L.hessian[p] - eta * fr.g[p];
            const double lam = generalized_eigenvalues(Z, fr.g[p]).max() / eta;
            if (lam > hi) { hi = lam; arg = p; }
        }
        rep.add_time(t, hi, arg);
    }
    rep.decide();
    rep.extra["kappa"] = kappa;
    rep.extra["variant"] = eta_variant_name(variant);
    rep.extra["t_burn"] = tb;
    rep.extra["delta_end"] = o.delta_end_steps * tr.dt;
    rep.extra["normalization"] = "lambda_max(Ric - H - eta g)/eta";
    return rep;
}

// ---------------------------------------------------------------------------
// Geometry bounds used by the fit-only reports

// max |sectional curvature| over all stored snapshots
inline double sectional_bound(const FlowTrajectory& tr) {
    if (tr.family() == Family::sphere) {
        double K = 0.0;
        for (const auto& s : tr.snaps) K = std::max(K, 1.0 / s.radius_sq);
        return K;
    }
    double K = 0.0;
    for (const auto& s : tr.snaps) {
        if (s.flat) continue;
        const auto lp = grid_ops(s).lap(*s.phi);
        for (std::size_t p = 0; p < lp.size(); ++p) K = std::max(K, std::abs(std::exp(-2.0 * (*s.phi)[p]) * lp[p]));
    }
    return K;
}

// Upper bound for the diameter over the trajectory.
inline double diameter_bound(const FlowTrajectory& tr) {
    double d = 0.0;
    for (const auto& s : tr.snaps) {
        if (s.family == Family::sphere) {
            d = std::max(d, std::numbers::pi * std::sqrt(s.radius_sq));
        } else {
            double hi = (*s.phi)[0];
            for (double v : *s.phi) hi = std::max(hi, v);
            d = std::max(d, s.period / std::sqrt(2.0) * std::exp(hi));
        }
    }
    return d;
}

inline double round_up_grid(double x, double step = 1e-3) { return x <= 0.0 ? 0.0 : std::ceil(x / step - 1e-9) * step; }

inline double constant_or(const std::map<std::string, double>& c, const std::string& k, double def = 1.0) {
    const auto it = c.find(k);
    return it == c.end() ? def : it->second;
}

namespace detail {

inline nlohmann::json finite_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

// min over points of the smallest eigenvalue of H relative to g
inline std::pair<double, int> min_hessian_eigen(const LogDerivatives& L, const PointFrame& fr) {
    double lo = std::numeric_limits<double>::infinity();
    int arg = -1;
    for (std::size_t p = 0; p < L.hessian.size(); ++p) {
        const double v = generalized_eigenvalues(L.hessian[p], fr.g[p]).min();
        if (v < lo) { lo = v; arg = static_cast<int>(p); }
    }
    return {lo, arg};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// General compact case: beta_emp(t) = max(0, -min lambda(tH) - 1/2)

inline Report general_beta_report(const SolutionField& sol, const std::map<std::string, double>& constants, const CheckOptions& o = {}) {
    const auto& tr = *sol.traj;
    if (sol.eq == Equation::conjugate_backward) throw ConfigError("general_beta_report needs a forward heat solution");
    Report rep;
    rep.check = "general_beta";
    const auto cert = certify(tr);
    const int n = tr.dim();
    const double K = sectional_bound(tr), diam = diameter_bound(tr);
    const double C1 = constant_or(constants, "C1"), C2 = constant_or(constants, "C2");
    const double tol = policy_tolerance(sol, o);
    const double tb = burn_time(sol, o);
    std::vector<double> times, beta_emp, beta_formula, cross_margin;
    bool configured_holds = true, cross_ok = true;
    double need1 = 0.0, need2 = 0.0, bmax = 0.0;
    std::vector<double> excess, excess_t;
    for (int k : steps_in(tr, sol.k_burn(), tb, o.t_max, o.max_times)) {
        const double t = tr.time(k);
        const auto& s = tr.at(k);
        const auto fr = point_frame(s);
        const auto L = log_derivatives(sol, k);
        const double lam = t * detail::min_hessian_eigen(L, fr).first;
        const double be = std::max(0.0, -lam - 0.5);
        const double base = 4.0 * std::sqrt(n * K * t);
        const double bf = base + C2 * (K + 1.0) * t + C1 * std::sqrt(K) * diam;
        times.push_back(t);
        beta_emp.push_back(be);
        beta_formula.push_back(bf);
        bmax = std::max(bmax, be);
        if (be > bf + tol) configured_holds = false;
        const double ex = std::max(0.0, be - base);
        excess.push_back(ex);
        excess_t.push_back(t);
        need1 = std::max(need1, ex > 0.0 ? (K > 0.0 ? ex / (std::sqrt(K) * diam) : std::numeric_limits<double>::infinity()) : 0.0);
        need2 = std::max(need2, ex / ((K + 1.0) * t));
        if (tr.family() == Family::sphere) {
            const double m = correction_c(cert.kappa, t) * t - 0.5 - be;
            cross_margin.push_back(m);
            if (m < -tol) cross_ok = false;
        }
    }
    nlohmann::json frontier = nlohmann::json::array();
    if (std::isfinite(need1)) {
        for (double f : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            const double c1 = round_up_grid(f * need1);
            double c2 = 0.0;
            for (std::size_t i = 0; i < excess.size(); ++i)
                c2 = std::max(c2, (excess[i] - c1 * std::sqrt(K) * diam) / ((K + 1.0) * excess_t[i]));
            frontier.push_back({{"C1", c1}, {"C2", round_up_grid(std::max(0.0, c2))}});
        }
    }
    rep.data = {{"K", K},
                {"diam", diam},
                {"n", n},
                {"t_burn", tb},
                {"C1", C1},
                {"C2", C2},
                {"times", times},
                {"beta_emp", beta_emp},
                {"beta_emp_max", bmax},
                {"beta_formula", beta_formula},
                {"configured_constants_hold", configured_holds},
                {"fitted_C1_with_C2_zero", detail::finite_or_null(round_up_grid(need1))},
                {"fitted_C2_with_C1_zero", round_up_grid(need2)},
                {"frontier", frontier},
                {"tolerance_used", tol},
                {"certificate", to_json(cert)}};
    if (tr.family() == Family::sphere) {
        rep.data["cross_check_margin"] = cross_margin;
        rep.data["cross_check_holds"] = cross_ok;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Static metrics: curvature-free gradient bound and the gamma-corrected estimate

inline Report static_hamilton_report(const SolutionField& sol, const std::map<std::string, double>& constants, const CheckOptions& o = {}) {
    const auto& tr = *sol.traj;
    if (tr.evolving()) throw HypothesisError("static_hamilton_report needs a static metric");
    if (sol.eq == Equation::conjugate_backward) throw ConfigError("static_hamilton_report needs a forward heat solution");
    Report rep;
    rep.check = "static_hamilton";
    const auto& s0 = tr.at(0);
    const int n = tr.dim();
    const double K = sectional_bound(tr);
    const double Lr = curvature_bundle(s0).L_max;
    const double L23 = std::pow(Lr, 2.0 / 3.0);
    const double diam = diameter_bound(tr);
    const double C3 = constant_or(constants, "C3");
    const double tb = burn_time(sol, o);
    const int kb = std::max(sol.k_burn(), static_cast<int>(std::ceil(tb / tr.dt - 1e-9)));
    const auto fr = point_frame(s0);

    // sup of u per stored step, poles included on spheres
    std::vector<double> sup(tr.count(), -std::numeric_limits<double>::infinity());
    for (int k = kb; k < tr.count(); ++k) {
        for (double v : point_values(sol.at(k), s0)) sup[k] = std::max(sup[k], v);
        if (s0.family == Family::sphere)
            for (double th : {0.0, std::numbers::pi}) sup[k] = std::max(sup[k], detail::sphere_pole_value(sol.at(k), s0, th));
    }
    std::map<int, LogDerivatives> cache;
    auto jets = [&](int k) -> const LogDerivatives& {
        auto it = cache.find(k);
        if (it == cache.end()) it = cache.emplace(k, log_derivatives(sol, k)).first;
        return it->second;
    };

    // (a) (t - t0/2)^2 |grad log u|^2 <= (t - t0/2) log(A/u) on (t0/2, t0]
    std::vector<int> k0s;
    for (int k0 = 2 * kb + (2 * kb) % 2; k0 < tr.count(); k0 += 2) k0s.push_back(k0);
    if (k0s.size() > 6) {
        std::vector<int> pick;
        for (int i = 0; i < 6; ++i) pick.push_back(k0s[std::lround(i * (k0s.size() - 1.0) / 5.0)]);
        k0s = pick;
    }
    double worst = std::numeric_limits<double>::infinity(), scale = 0.0;
    nlohmann::json windows = nlohmann::json::array();
    for (int k0 : k0s) {
        const int kh = k0 / 2;
        double A = -std::numeric_limits<double>::infinity();
        for (int k = kh; k <= k0; ++k) A = std::max(A, sup[k]);
        const double logA = std::log(A);
        std::vector<int> ks;
        const int m = k0 - kh;
        const int want = std::min(m, 12);
        for (int i = 1; i <= want; ++i) ks.push_back(kh + static_cast<int>(std::lround(i * static_cast<double>(m) / want)));
        double wmin = std::numeric_limits<double>::infinity();
        for (int k : ks) {
            const double sdt = tr.time(k) - tr.time(kh);
            const auto& L = jets(k);
            for (std::size_t p = 0; p < L.v.size(); ++p) {
                const double lhs = sdt * sdt * L.grad_v_sq[p];
                const double rhs = sdt * (logA - L.v[p]);
                scale = std::max({scale, std::abs(lhs), std::abs(rhs)});
                wmin = std::min(wmin, rhs - lhs);
            }
        }
        worst = std::min(worst, wmin);
        windows.push_back({{"t0", tr.time(k0)}, {"A", A}, {"min_margin", wmin}});
    }
    const double grad_tol = 1e-8 * std::max(scale, 1e-300) * o.tolerance_scale;
    const bool have = !k0s.empty();
    const Verdict grad_verdict = !have ? Verdict::inconclusive : (worst >= -grad_tol ? Verdict::holds : Verdict::violated);

    // (b) H + (1/(2t) + (2n-1)K + (sqrt3/2) L^{2/3} + gamma/(2t)) g >= 0
    double c3_need = 0.0;
    bool configured_holds = true;
    std::vector<double> times, gamma_needed;
    for (int k : steps_in(tr, kb, tb, o.t_max, o.max_times > 0 ? o.max_times : 24)) {
        const double t = tr.time(k);
        const double lam = detail::min_hessian_eigen(jets(k), fr).first;
        const double gn = std::max(0.0, -2.0 * t * (lam + 0.5 / t + (2.0 * n - 1.0) * K + std::sqrt(3.0) / 2.0 * L23));
        const double Kt = K * t;
        const double g0 = std::sqrt(n * Kt * (2.0 + (n - 1.0) * Kt)) +
                          (2.0 * K * (2.0 + (n - 1.0) * Kt) + 1.5 * L23 * (1.0 + (n - 1.0) * Kt)) * diam;
        const double den = (K + L23) * t * (1.0 + Kt) * (1.0 + K + Kt);
        const double ex = std::max(0.0, gn - g0);
        if (ex > 0.0) c3_need = std::max(c3_need, den > 0.0 ? ex * ex / den : std::numeric_limits<double>::infinity());
        if (gn > g0 + std::sqrt(std::max(0.0, C3 * den)) * (1.0 + 1e-12)) configured_holds = false;
        times.push_back(t);
        gamma_needed.push_back(gn);
    }
    rep.verdict = grad_verdict;
    rep.data = {{"K", K},
                {"L", Lr},
                {"diam", diam},
                {"t_burn", tb},
                {"gradient_bound", {{"verdict", verdict_name(grad_verdict)}, {"min_margin", have ? worst : 0.0},
                                    {"scale", scale}, {"tolerance_used", grad_tol}, {"windows", windows}}},
                {"gamma", {{"C3", C3}, {"times", times}, {"gamma_needed", gamma_needed},
                           {"configured_constants_hold", configured_holds},
                           {"fitted_C3", detail::finite_or_null(round_up_grid(c3_need))}}},
                {"certificate", to_json(certify(tr))}};
    return rep;
}

// ---------------------------------------------------------------------------
// Harnack quadratic M(w,w) + 2P(v,w,w) + Rm(v,w,v,w) along the flow

struct HarnackTerms {
    SymTensor M, g;
    Tensor3 P;
    CurvTensor Rm;
};

inline HarnackTerms harnack_terms(const CurvatureBundle& cb, const PointFrame& fr, int p, double t) {
    HarnackTerms h;
    const auto& ginv = fr.ginv[p];
    const auto& Ric = cb.ricci[p];
    h.g = fr.g[p];
    h.M = cb.lap_ricci[p] - 0.5 * cb.hess_scalar[p] + 2.0 * curvature_action(cb.riemann[p], Ric, ginv) - product(Ric, ginv, Ric) +
          (0.5 / t) * Ric;
    const int n = h.g.dim();
    h.P = Tensor3(n);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) h.P.at(k, i, j) = cb.nabla_ricci[p](k, i, j) - cb.nabla_ricci[p](i, k, j);
    h.Rm = cb.riemann[p];
    return h;
}

inline void check_harnack_geometry(const FlowTrajectory& tr) {
    if (tr.family() != Family::sphere || !tr.evolving())
        throw HypothesisError("Harnack quadratic needs a Ricci flow with certified nonnegative complex sectional curvature (shrinking sphere)");
}

// Quadratic at stored step k, node p; v and w are tangent vectors taken as given.
inline double harnack_quadratic_at(const FlowTrajectory& tr, int k, int p, const Vec& v, const Vec& w) {
    check_harnack_geometry(tr);
    const double t = tr.time(k);
    if (!(t > 0.0)) throw DomainError("Harnack quadratic needs t > 0");
    const auto& s = tr.at(k);
    const auto fr = point_frame(s);
    const auto cb = curvature_bundle(s, fr);
    const auto h = harnack_terms(cb, fr, p, t);
    return harnack_quadratic(h.M, h.P, h.Rm, v, w, h.g);
}

namespace detail {

// Portable uniform/normal draws (std distributions are not reproducible across libraries).
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double normal01(std::mt19937_64& rng) {
    const double a = uniform01(rng), b = uniform01(rng);
    return std::sqrt(-2.0 * std::log1p(-a)) * std::cos(2.0 * std::numbers::pi * b);
}

inline Vec g_unit(Vec v, const SymTensor& g) {
    const double nn = std::sqrt(quad_form(g, v));
    for (int i = 0; i < v.dim; ++i) v[i] /= nn;
    return v;
}

}  // namespace detail

inline Report brendle_harnack_report(const FlowTrajectory& tr, int n_samples, std::uint64_t seed) {
    check_harnack_geometry(tr);
    if (n_samples < 1) throw ConfigError("n_samples must be positive");
    Report rep;
    rep.check = "brendle_harnack";
    std::mt19937_64 rng(seed);
    const int n = tr.dim();
    std::map<int, std::pair<PointFrame, CurvatureBundle>> cache;
    double lo = std::numeric_limits<double>::infinity(), lo_eig = lo;
    nlohmann::json arg;
    for (int i = 0; i < n_samples; ++i) {
        const int k = 1 + static_cast<int>(detail::uniform01(rng) * (tr.count() - 1));
        const auto& s = tr.at(k);
        auto it = cache.find(k);
        if (it == cache.end()) {
            auto fr = point_frame(s);
            auto cb = curvature_bundle(s, fr);
            it = cache.emplace(k, std::make_pair(std::move(fr), std::move(cb))).first;
        }
        const int p = static_cast<int>(detail::uniform01(rng) * s.points());
        const auto h = harnack_terms(it->second.second, it->second.first, p, tr.time(k));
        Vec v(n), w(n);
        for (int a = 0; a < n; ++a) v[a] = detail::normal01(rng);
        for (int a = 0; a < n; ++a) w[a] = detail::normal01(rng);
        v = detail::g_unit(v, h.g);
        w = detail::g_unit(w, h.g);
        const double q = harnack_quadratic(h.M, h.P, h.Rm, v, w, h.g);
        if (q < lo) {
            lo = q;
            arg = {{"time", tr.time(k)}, {"point", p}};
        }
        // v = 0 and w the bottom eigenvector of M
        const auto ep = generalized_eigenvalues(h.M, h.g);
        lo_eig = std::min(lo_eig, harnack_quadratic(h.M, h.P, h.Rm, Vec(n), ep.vectors[0], h.g));
    }
    const double m = std::min(lo, lo_eig);
    rep.verdict = m >= -1e-10 ? Verdict::holds : Verdict::violated;
    rep.data = {{"n_samples", n_samples},
                {"seed", seed},
                {"min_random", lo},
                {"min_eigen_extremal", lo_eig},
                {"min", m},
                {"argmin", arg},
                {"tolerance_used", 1e-10},
                {"certificate", to_json(certify(tr))}};
    return rep;
}

// ---------------------------------------------------------------------------
// Gaussian heat-kernel bounds (fit-only)

namespace detail {

// smallest C2 >= 0 with log C2 + C2 K t >= logX
inline double solve_c2(double logX, double Kt) {
    if (Kt <= 0.0) return std::exp(logX);
    auto f = [&](double c) { return std::log(c) + c * Kt - logX; };
    double hi = 1.0;
    while (f(hi) < 0.0) hi *= 2.0;
    double lo = hi;
    while (f(lo) > 0.0 && lo > 1e-300) lo *= 0.5;
    for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) >= 0.0 ? hi : lo) = mid;
    }
    return hi;
}

}  // namespace detail

inline Report heat_kernel_bound_report(const KernelApprox& ka, const CheckOptions& o = {}) {
    const auto& sol = ka.sol;
    const auto& tr = *sol.traj;
    Report rep;
    rep.check = "heat_kernel_bounds";
    const int n = tr.dim();
    const double K = sectional_bound(tr);
    struct Slice {
        double t;
        std::vector<double> logG, dlo2, dhi2;
        double diag;
    };
    std::vector<Slice> slices;
    int nonpositive = 0;
    for (int k : steps_in(tr, ka.k_burn, ka.t_burn, o.t_max, o.max_times > 0 ? o.max_times : 24)) {
        const auto& s = tr.at(k);
        Slice sl;
        sl.t = tr.time(k);
        const auto G = point_values(sol.at(k), s);
        for (int p = 0; p < s.points(); ++p) {
            if (!(G[p] > 0.0)) { ++nonpositive; continue; }
            const auto d = distance_proxy(ka.pole, sample_point(s, p), s);
            sl.logG.push_back(std::log(G[p]));
            sl.dlo2.push_back(d.lo * d.lo);
            sl.dhi2.push_back(d.hi * d.hi);
        }
        sl.diag = s.family == Family::sphere ? detail::sphere_pole_value(sol.at(k), s, 0.0) : G[ka.pole_index];
        slices.push_back(std::move(sl));
    }
    if (slices.empty()) throw ConfigError("heat_kernel_bound_report: no stored times after burn-in");
    std::vector<double> grid;
    for (double c = 1.0; c <= 64.0 + 1e-9; c *= 1.02) grid.push_back(c);
    std::vector<double> c2up(grid.size()), c2lo(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const double C1 = grid[g];
        double up = 0.0, lw = 0.0;
        for (const auto& sl : slices) {
            double xu = -std::numeric_limits<double>::infinity(), xl = xu;
            const double lt = 0.5 * n * std::log(sl.t);
            for (std::size_t i = 0; i < sl.logG.size(); ++i) {
                xu = std::max(xu, sl.logG[i] + lt + sl.dhi2[i] / (C1 * sl.t));
                xl = std::max(xl, -C1 * sl.dlo2[i] / sl.t - lt - sl.logG[i]);
            }
            up = std::max(up, detail::solve_c2(xu, K * sl.t));
            lw = std::max(lw, detail::solve_c2(xl, K * sl.t));
        }
        c2up[g] = up;
        c2lo[g] = lw;
    }
    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g)
        if (std::max(c2up[g], c2lo[g]) < std::max(c2up[best], c2lo[best])) best = g;
    double c1_fit = grid.back();
    for (std::size_t g = 0; g < grid.size(); ++g)
        if (c2up[g] <= 1.05 * c2up.back()) { c1_fit = grid[g]; break; }
    double diag_c2 = 0.0;
    for (const auto& sl : slices)
        if (sl.diag > 0.0) diag_c2 = std::max(diag_c2, detail::solve_c2(std::log(sl.diag) + 0.5 * n * std::log(sl.t), K * sl.t));
    rep.data = {{"K", K},
                {"t_burn", ka.t_burn},
                {"times", static_cast<int>(slices.size())},
                {"nonpositive_samples", nonpositive},
                {"C1_grid", grid},
                {"C2_upper", c2up},
                {"C2_lower", c2lo},
                {"fitted_pair", {{"C1", grid[best]}, {"C2", std::max(c2up[best], c2lo[best])}}},
                {"fitted_C1_upper_exponent", c1_fit},
                {"on_diagonal_C2", diag_c2}};
    return rep;
}

}  // namespace rflab
