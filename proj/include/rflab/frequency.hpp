#pragma once
// Parabolic frequency: weighted energies I, D, S of a conjugate solution, the
// derivative identities they satisfy along the flow, and the corrected
// monotone quantities.

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rflab/harnack.hpp"

namespace rflab {

enum class WeightKind { kernel_G, conjugate_w, unweighted };

inline const char* weight_name(WeightKind w) {
    switch (w) {
        case WeightKind::kernel_G: return "kernel_G";
        case WeightKind::conjugate_w: return "conjugate_w";
        default: return "unweighted";
    }
}

// Integrands at one stored time. The derivative formulas hold along Ricci flow
// (and trivially on flat static metrics).
struct FrequencyTerms {
    double I = 0, D = 0, S = 0;
    double Dp = 0, Sp = 0, Ipp = 0;  // formula sides of D', S', I''
    double cs_rhs = 0;               // I * int (2 Delta_f u - R u)^2 G
    double ric_grad = 0;             // int Ric(grad u, grad u) G
    double ric_sq = 0;               // int u^2 |Ric|^2 G
    double q1 = 0, q2 = 0;           // unweighted decomposition: int (2u_t - uR)^2, int u (2u_t - uR)
};

namespace detail {

struct PointCurvature {
    std::vector<double> R;
    std::vector<SymTensor> Ric;
};

inline PointCurvature point_curvature(const MetricSnapshot& s, const PointFrame& fr) {
    PointCurvature pc;
    const int P = s.points(), n = s.dim;
    pc.R.resize(P);
    pc.Ric.resize(P, SymTensor(n));
    if (s.family == Family::sphere) {
        const double K = 1.0 / s.radius_sq;
        for (int p = 0; p < P; ++p) {
            pc.R[p] = n * (n - 1.0) * K;
            pc.Ric[p] = (n - 1.0) * K * fr.g[p];
        }
        return pc;
    }
    const auto lp = grid_ops(s).lap(*s.phi);
    for (int p = 0; p < P; ++p) {
        const double K = -std::exp(-2.0 * (*s.phi)[p]) * lp[p];
        pc.R[p] = 2.0 * K;
        pc.Ric[p] = K * fr.g[p];
    }
    return pc;
}

inline void check_frequency_geometry(const FlowTrajectory& tr) {
    if (tr.evolving()) return;
    for (const auto& s : tr.snaps)
        if (!s.flat) throw ConfigError("frequency identities are derived along Ricci flow; static metrics must be flat");
}

}  // namespace detail

// G == nullptr means unit weight.
inline FrequencyTerms frequency_terms(const GridField& u, const GridField* G, const MetricSnapshot& s) {
    const auto fr = point_frame(s);
    const auto pc = detail::point_curvature(s, fr);
    const auto Ju = scalar_jets(u, s);
    ScalarJets JG;
    if (G) JG = scalar_jets(*G, s);
    const int P = s.points(), n = s.dim;
    std::vector<double> cI(P), cD(P), cS(P), cA(P), cB(P), cC(P), cDR(P), cR2(P), cRic(P), cRlapG(P), cRcross(P), cQ(P), cQ2(P);
    for (int p = 0; p < P; ++p) {
        const double uu = Ju.val[p];
        const auto& ginv = fr.ginv[p];
        const Vec up = raise(Ju.grad[p], ginv);
        const double gu2 = inner(Ju.grad[p], Ju.grad[p], ginv);
        double Gv = 1.0, lapG = 0.0, gGu = 0.0, hessf_uu = 0.0;
        if (G) {
            Gv = JG.val[p];
            if (!(Gv > 0.0)) throw DomainError("frequency weight must be positive");
            lapG = JG.lap[p];
            gGu = inner(JG.grad[p], Ju.grad[p], ginv);
            hessf_uu = -quad_form(JG.hess[p], up) / Gv + gGu * gGu / (Gv * Gv);
        }
        const double R = pc.R[p];
        const double ric_uu = quad_form(pc.Ric[p], up);
        const double ric2 = norm_sq(pc.Ric[p], ginv);
        const double lapf = Ju.lap[p] + gGu / Gv;
        const double w = fr.weight[p] * Gv;
        cI[p] = w * uu * uu;
        cD[p] = w * gu2;
        cS[p] = w * uu * uu * R;
        cA[p] = w * (ric_uu - hessf_uu);
        cB[p] = w * lapf * lapf;
        cC[p] = w * R * uu * lapf;
        cDR[p] = w * gu2 * R;
        cR2[p] = w * uu * uu * R * R;
        cRic[p] = w * uu * uu * ric2;
        cRlapG[p] = fr.weight[p] * uu * uu * R * lapG;
        cRcross[p] = fr.weight[p] * uu * R * gGu;
        const double m = 2.0 * lapf - R * uu;
        cQ[p] = w * m * m;
        cQ2[p] = w * ric_uu;
        (void)n;
    }
    FrequencyTerms T;
    T.I = pairwise_sum(cI);
    T.D = pairwise_sum(cD);
    T.S = pairwise_sum(cS);
    const double A = pairwise_sum(cA), B = pairwise_sum(cB), C = pairwise_sum(cC), DR = pairwise_sum(cDR);
    const double R2 = pairwise_sum(cR2), Ric2 = pairwise_sum(cRic), RlapG = pairwise_sum(cRlapG), Rcross = pairwise_sum(cRcross);
    const double Q = pairwise_sum(cQ);
    T.Dp = 2.0 * A + 2.0 * B - 2.0 * C - DR;
    T.Sp = R2 + 2.0 * Ric2 + 2.0 * DR + 2.0 * RlapG + 4.0 * Rcross;
    T.Ipp = 4.0 * A + Q + 2.0 * Ric2 + 2.0 * RlapG + 4.0 * Rcross;
    T.cs_rhs = T.I * Q;
    T.ric_grad = pairwise_sum(cQ2);
    T.ric_sq = Ric2;
    // with unit weight 2u_t - uR = -(2 Delta u - R u)
    T.q1 = Q;
    T.q2 = 2.0 * T.D + T.S;
    return T;
}

struct FrequencySeries {
    WeightKind weight = WeightKind::kernel_G;
    TrajPtr traj;
    std::vector<int> steps;  // consecutive stored steps
    std::vector<double> times, I, D, S, F;
    std::vector<FrequencyTerms> terms;
    double t_burn = 0.0;
    double dt = 0.0;
    double width_sq = 0.0;  // kernel weight width at burn-in, 0 otherwise

    int size() const { return static_cast<int>(times.size()); }
};

namespace detail {

inline void push_terms(FrequencySeries& fs, int k, double t, const FrequencyTerms& T) {
    if (!(T.I > 0.0)) throw DomainError("frequency series needs I > 0");
    fs.steps.push_back(k);
    fs.times.push_back(t);
    fs.I.push_back(T.I);
    fs.D.push_back(T.D);
    fs.S.push_back(T.S);
    fs.F.push_back((2.0 * T.D + T.S) / T.I);
    fs.terms.push_back(T);
}

}  // namespace detail

// (I, D, S) at one stored time.
inline std::array<double, 3> frequency_integrals(const SolutionField& u, const KernelApprox& G, double t) {
    if (u.traj != G.sol.traj) throw ConfigError("u and G live on different trajectories");
    if (u.eq != Equation::conjugate_backward) throw ConfigError("frequency integrals need a conjugate solution u");
    const int k = detail::stored_index(*u.traj, t);
    if (t + 1e-12 < G.t_burn) throw DomainError("t lies before the kernel burn-in");
    const auto T = frequency_terms(u.at(k), &G.sol.at(k), u.metric(k));
    return {T.I, T.D, T.S};
}

// Kernel-weighted (G given) or unweighted series for a conjugate solution, on
// every stored step in [t_burn, T - delta_end].
inline FrequencySeries frequency_series(const SolutionField& u, const KernelApprox* G, double delta_end = 0.0, double t_burn = -1.0) {
    const auto& tr = *u.traj;
    if (u.eq != Equation::conjugate_backward) throw ConfigError("frequency series needs a conjugate solution u");
    if (G && G->sol.traj != u.traj) throw ConfigError("u and G live on different trajectories");
    detail::check_frequency_geometry(tr);
    FrequencySeries fs;
    fs.weight = G ? WeightKind::kernel_G : WeightKind::unweighted;
    fs.traj = u.traj;
    fs.dt = tr.dt;
    fs.t_burn = t_burn > 0.0 ? t_burn : (G ? G->t_burn : 0.0);
    fs.width_sq = G ? G->sol.width_sq : 0.0;
    const int k0 = G ? std::max(G->k_burn, G->sol.k_burn()) : 0;
    for (int k = k0; k < tr.count(); ++k) {
        const double t = tr.time(k);
        if (t + 1e-12 < fs.t_burn || t > tr.T - delta_end + 1e-12) continue;
        detail::push_terms(fs, k, t, frequency_terms(u.at(k), G ? &G->sol.at(k) : nullptr, tr.at(k)));
    }
    if (fs.size() < 3) throw StencilError("frequency series needs at least 3 stored times in its window");
    return fs;
}

// Heat solution u against a positive conjugate weight w: I = int u^2 w, D = int |grad u|^2 w.
inline FrequencySeries conjugate_weight_series(const SolutionField& u, const SolutionField& w, double delta_end, double t_burn = -1.0) {
    if (u.traj != w.traj) throw ConfigError("u and w live on different trajectories");
    if (u.eq == Equation::conjugate_backward) throw ConfigError("conjugate-weight frequency needs a heat solution u");
    if (w.eq != Equation::conjugate_backward) throw ConfigError("conjugate-weight frequency needs a conjugate weight w");
    const auto& tr = *u.traj;
    FrequencySeries fs;
    fs.weight = WeightKind::conjugate_w;
    fs.traj = u.traj;
    fs.dt = tr.dt;
    fs.t_burn = t_burn > 0.0 ? t_burn : u.t_burn;
    for (int k = u.k_burn(); k < tr.count(); ++k) {
        const double t = tr.time(k);
        if (t + 1e-12 < fs.t_burn || t > tr.T - delta_end + 1e-12) continue;
        const auto& s = tr.at(k);
        const auto fr = point_frame(s);
        const auto Ju = scalar_jets(u.at(k), s);
        const auto wv = point_values(w.at(k), s);
        std::vector<double> a(s.points()), b(s.points());
        for (int p = 0; p < s.points(); ++p) {
            if (!(wv[p] > 0.0)) throw DomainError("conjugate weight must be positive");
            a[p] = fr.weight[p] * wv[p] * Ju.val[p] * Ju.val[p];
            b[p] = fr.weight[p] * wv[p] * inner(Ju.grad[p], Ju.grad[p], fr.ginv[p]);
        }
        FrequencyTerms T;
        T.I = pairwise_sum(a);
        T.D = pairwise_sum(b);
        if (!(T.I > 0.0)) throw DomainError("frequency series needs I > 0");
        fs.steps.push_back(k);
        fs.times.push_back(t);
        fs.I.push_back(T.I);
        fs.D.push_back(T.D);
        fs.S.push_back(0.0);
        fs.F.push_back(T.D / T.I);  // Dirichlet quotient
        fs.terms.push_back(T);
    }
    if (fs.size() < 3) throw StencilError("frequency series needs at least 3 stored times in its window");
    return fs;
}

// ---------------------------------------------------------------------------
// Derivative identities: centered differences against the formula sides

inline std::vector<ResidualReport> frequency_derivative_residuals(const FrequencySeries& fs) {
    if (fs.weight == WeightKind::conjugate_w) throw ConfigError("derivative identities are stated for kernel or unit weights");
    if (fs.size() < 3) throw StencilError("derivative residuals need at least 3 consecutive times");
    std::vector<ResidualReport> out(4);
    out[0].name = "I_prime";
    out[1].name = "D_prime";
    out[2].name = "S_prime";
    out[3].name = "I_second";
    std::vector<double> l2(4, 0.0);
    int nt = 0;
    const double h = fs.dt;
    for (int i = 1; i + 1 < fs.size(); ++i) {
        if (fs.steps[i + 1] - fs.steps[i - 1] != 2) throw StencilError("frequency series steps are not consecutive");
        const auto& T = fs.terms[i];
        const double fd[4] = {(fs.I[i + 1] - fs.I[i - 1]) / (2 * h), (fs.D[i + 1] - fs.D[i - 1]) / (2 * h),
                              (fs.S[i + 1] - fs.S[i - 1]) / (2 * h), (fs.I[i + 1] - 2 * fs.I[i] + fs.I[i - 1]) / (h * h)};
        const double fo[4] = {2.0 * T.D + T.S, T.Dp, T.Sp, T.Ipp};
        for (int j = 0; j < 4; ++j) {
            const double r = std::abs(fd[j] - fo[j]);
            out[j].times.push_back(fs.times[i]);
            out[j].per_time.push_back(r);
            out[j].linf = std::max(out[j].linf, r);
            out[j].scale = std::max({out[j].scale, std::abs(fd[j]), std::abs(fo[j])});
            l2[j] += r * r;
        }
        ++nt;
    }
    for (int j = 0; j < 4; ++j) out[j].finish(l2[j], nt);
    return out;
}

// max over times of (I')^2 - I int (2 Delta_f u - R u)^2 G, relative; <= 0 up to quadrature error
inline double cauchy_schwarz_excess(const FrequencySeries& fs) {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& T : fs.terms) {
        const double ip = 2.0 * T.D + T.S;
        const double sc = std::max(ip * ip, T.cs_rhs);
        worst = std::max(worst, sc > 0.0 ? (ip * ip - T.cs_rhs) / sc : 0.0);
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Corrected monotone quantities

enum class FrequencyVariant { sec_nonneg, general, conjugate_weight, unweighted };

inline FrequencyVariant parse_frequency_variant(const std::string& s) {
    if (s == "sec_nonneg") return FrequencyVariant::sec_nonneg;
    if (s == "general") return FrequencyVariant::general;
    if (s == "conjugate_weight") return FrequencyVariant::conjugate_weight;
    if (s == "unweighted") return FrequencyVariant::unweighted;
    throw ConfigError("unknown frequency variant '" + s + "'");
}

inline const char* frequency_variant_name(FrequencyVariant v) {
    switch (v) {
        case FrequencyVariant::sec_nonneg: return "sec_nonneg";
        case FrequencyVariant::general: return "general";
        case FrequencyVariant::conjugate_weight: return "conjugate_weight";
        default: return "unweighted";
    }
}

struct FrequencyParams {
    double kappa = -1.0;  // < 0: certified value
    double c_n = 1.0, C1 = 1.0, C2 = 1.0;
    CheckOptions check;
};

struct MonotonicityReport {
    std::string quantity;
    std::string variant;
    std::string direction = "nondecreasing";
    Certificate certificate;
    bool certified = false;
    std::vector<double> times, values, diffs;
    double min_diff = 0.0;  // signed so that >= 0 means monotone in the stated direction
    double scale = 0.0;
    double tolerance_used = 0.0;
    Verdict verdict = Verdict::inconclusive;
    nlohmann::json params = nlohmann::json::object();
};

inline nlohmann::json to_json(const MonotonicityReport& r) {
    return {{"quantity", r.quantity},
            {"variant", r.variant},
            {"direction", r.direction},
            {"certificate", to_json(r.certificate)},
            {"certified", r.certified},
            {"times", r.times},
            {"values", r.values},
            {"diffs", r.diffs},
            {"min_diff", r.min_diff},
            {"scale", r.scale},
            {"tolerance_used", r.tolerance_used},
            {"verdict", verdict_name(r.verdict)},
            {"params", r.params}};
}

inline void write_csv(const MonotonicityReport& r, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write " + path);
    os.precision(17);
    os << "t,value,forward_difference\n";
    for (std::size_t i = 0; i < r.times.size(); ++i)
        os << r.times[i] << "," << r.values[i] << "," << (i < r.diffs.size() ? std::to_string(r.diffs[i]) : std::string("")) << "\n";
}

inline void write_csv(const FrequencySeries& fs, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write " + path);
    os.precision(17);
    os << "t,I,D,S,F\n";
    for (int i = 0; i < fs.size(); ++i) os << fs.times[i] << "," << fs.I[i] << "," << fs.D[i] << "," << fs.S[i] << "," << fs.F[i] << "\n";
}

namespace detail {

// spatial part of the discretization size; spheres are spectral
inline double frequency_disc(const FrequencySeries& fs) {
    const auto& s = fs.traj->at(0);
    if (s.family == Family::sphere) return 0.0;
    return fs.width_sq > 0.0 ? s.h() * s.h() / fs.width_sq : s.h() * s.h();
}

inline double frequency_tolerance(const FrequencySeries& fs, const CheckOptions& o) {
    if (o.tol_override > 0.0) return o.tol_override * o.tolerance_scale;
    return std::max(1e-8, o.c_tol * (frequency_disc(fs) + fs.dt * fs.dt)) * o.tolerance_scale;
}

inline void finish_monotone(MonotonicityReport& r) {
    const double sgn = r.direction == "nondecreasing" ? 1.0 : -1.0;
    r.diffs.clear();
    r.scale = 0.0;
    for (double v : r.values) r.scale = std::max(r.scale, std::abs(v));
    r.min_diff = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < r.values.size(); ++i) {
        const double d = r.values[i + 1] - r.values[i];
        r.diffs.push_back(d);
        r.min_diff = std::min(r.min_diff, sgn * d);
    }
    if (r.diffs.empty()) r.min_diff = 0.0;
    const bool ok = r.min_diff >= -r.tolerance_used * std::max(r.scale, 1e-300);
    r.verdict = !r.certified || r.diffs.empty() ? Verdict::inconclusive : (ok ? Verdict::holds : Verdict::violated);
}

// t^p (F + Z0) nondecreasing on consecutive pairs: minimal p for fixed Z0 and minimal Z0 for fixed p.
inline double fit_min_p(const FrequencySeries& fs, double Z0) {
    double p = 0.0;
    for (int i = 0; i + 1 < fs.size(); ++i) {
        const double a = fs.F[i] + Z0, b = fs.F[i + 1] + Z0;
        if (!(a > 0.0 && b > 0.0)) return std::numeric_limits<double>::infinity();
        p = std::max(p, std::log(a / b) / std::log(fs.times[i + 1] / fs.times[i]));
    }
    return p;
}

inline double fit_min_z0(const FrequencySeries& fs, double p) {
    double z = 0.0;
    for (int i = 0; i + 1 < fs.size(); ++i) {
        const double ta = std::pow(fs.times[i], p), tb = std::pow(fs.times[i + 1], p);
        z = std::max(z, -(tb * fs.F[i + 1] - ta * fs.F[i]) / (tb - ta));
    }
    return z;
}

}  // namespace detail

inline MonotonicityReport corrected_frequency_series(const FrequencySeries& fs, FrequencyVariant variant, const FrequencyParams& prm = {}) {
    const auto& tr = *fs.traj;
    MonotonicityReport r;
    r.variant = frequency_variant_name(variant);
    r.certificate = certify(tr);
    const int n = tr.dim();
    const double kappa = prm.kappa >= 0.0 ? prm.kappa : r.certificate.kappa;
    r.tolerance_used = detail::frequency_tolerance(fs, prm.check);
    r.times = fs.times;
    r.params["kappa"] = kappa;
    r.params["n"] = n;
    r.params["weight"] = weight_name(fs.weight);
    switch (variant) {
        case FrequencyVariant::sec_nonneg: {
            if (fs.weight != WeightKind::kernel_G) throw ConfigError("sec_nonneg variant needs the kernel weight");
            r.quantity = "exp((n-2) kappa t) (1 - exp(-2 kappa t)) F";
            r.certified = r.certificate.sec_nonneg && r.certificate.ric_upper && kappa >= r.certificate.kappa * (1.0 - 1e-12);
            for (int i = 0; i < fs.size(); ++i) {
                const double t = fs.times[i];
                const double a = kappa > 0.0 ? -std::expm1(-2.0 * kappa * t) : t;  // kappa -> 0: positive multiple t
                r.values.push_back(std::exp((n - 2.0) * kappa * t) * a * fs.F[i]);
            }
            detail::finish_monotone(r);
            return r;
        }
        case FrequencyVariant::general: {
            if (fs.weight != WeightKind::kernel_G) throw ConfigError("general variant needs the kernel weight");
            r.quantity = "t^p (F + Z0)";
            const double K = sectional_bound(tr), diam = diameter_bound(tr), cn = prm.c_n;
            double Z0 = 0.0, p = 1.0;
            for (double t : fs.times) {
                const double beta = 4.0 * std::sqrt(n * K * t) + prm.C2 * (K + 1.0) * t + prm.C1 * std::sqrt(K) * diam;
                const double c1 = 0.5 / t + beta / t;
                const double c2 = cn * K * (2.0 * (c1 + cn * K) + 2.0 * (cn / t + K));
                Z0 = std::max(Z0, t * c2);
                p = std::max(p, 2.0 * t * (c1 + cn * K));
            }
            for (int i = 0; i < fs.size(); ++i) r.values.push_back(std::pow(fs.times[i], p) * (fs.F[i] + Z0));
            r.certified = true;
            detail::finish_monotone(r);
            // constants are configuration, so a failure says nothing about the estimate itself
            if (r.verdict == Verdict::violated) r.verdict = Verdict::inconclusive;
            const double p_fit = detail::fit_min_p(fs, Z0);
            const double z_fit = detail::fit_min_z0(fs, p);
            MonotonicityReport fitted = r;
            fitted.values.clear();
            if (std::isfinite(p_fit))
                for (int i = 0; i < fs.size(); ++i) fitted.values.push_back(std::pow(fs.times[i], p_fit) * (fs.F[i] + Z0));
            fitted.certified = std::isfinite(p_fit);
            detail::finish_monotone(fitted);
            r.params.update({{"K", K}, {"diam", diam}, {"c_n", cn}, {"C1", prm.C1}, {"C2", prm.C2}, {"p", p}, {"Z0", Z0},
                             {"p_fit", detail::finite_or_null(p_fit)}, {"Z0_fit", z_fit},
                             {"fitted_series_min_diff", fitted.min_diff},
                             {"fitted_series_verdict", verdict_name(fitted.verdict)}});
            return r;
        }
        case FrequencyVariant::conjugate_weight: {
            if (fs.weight != WeightKind::conjugate_w) throw ConfigError("conjugate_weight variant needs a conjugate_weight_series");
            r.quantity = "(exp(2 kappa (T-t)) - 1) exp(-sqrt(8 kappa t)) D/I";
            r.direction = "nonincreasing";
            r.certified = tr.family() == Family::sphere && kappa >= r.certificate.kappa * (1.0 - 1e-12) && kappa > 0.0;
            for (int i = 0; i < fs.size(); ++i) {
                const double t = fs.times[i];
                r.values.push_back(std::expm1(2.0 * kappa * (tr.T - t)) * std::exp(-std::sqrt(8.0 * kappa * t)) * fs.F[i]);
            }
            detail::finish_monotone(r);
            return r;
        }
        case FrequencyVariant::unweighted: {
            if (fs.weight != WeightKind::unweighted) throw ConfigError("unweighted variant needs an unweighted series");
            r.quantity = "(log I)''";
            r.certified = r.certificate.ric_nonneg;
            // values: discrete second differences of log I at interior times
            r.times.clear();
            double lo = std::numeric_limits<double>::infinity(), sc = 0.0, dec = 0.0, dec_scale = 0.0, dec_formula = 0.0;
            const double h = fs.dt;
            for (int i = 1; i + 1 < fs.size(); ++i) {
                const double l2 = (std::log(fs.I[i + 1]) - 2.0 * std::log(fs.I[i]) + std::log(fs.I[i - 1])) / (h * h);
                const auto& T = fs.terms[i];
                const double I = T.I, ip = 2.0 * T.D + T.S;
                const double rhs = I * T.q1 - T.q2 * T.q2 + I * (4.0 * T.ric_grad + 2.0 * T.ric_sq);
                dec_formula = std::max(dec_formula, std::abs(I * T.Ipp - ip * ip - rhs));
                dec_scale = std::max({dec_scale, std::abs(I * T.q1), T.q2 * T.q2});
                if (i >= 2 && i + 2 < fs.size()) {
                    // fourth-order stencil so the identity check is not limited by the time step
                    const double l4 = (-std::log(fs.I[i + 2]) + 16.0 * std::log(fs.I[i + 1]) - 30.0 * std::log(fs.I[i]) +
                                       16.0 * std::log(fs.I[i - 1]) - std::log(fs.I[i - 2])) / (12.0 * h * h);
                    dec = std::max(dec, std::abs(I * I * l4 - rhs));
                }
                r.times.push_back(fs.times[i]);
                r.values.push_back(l2);
                lo = std::min(lo, l2);
                sc = std::max({sc, std::abs(T.Ipp / I), (ip / I) * (ip / I)});
            }
            r.diffs = r.values;
            r.min_diff = r.values.empty() ? 0.0 : lo;
            r.scale = sc;
            const bool ok = r.min_diff >= -r.tolerance_used * std::max(sc, 1e-300);
            r.verdict = !r.certified || r.values.empty() ? Verdict::inconclusive : (ok ? Verdict::holds : Verdict::violated);
            const double dec_rel = dec_scale > 0.0 ? dec / dec_scale : dec;
            r.params.update({{"decomposition_residual", dec_rel},
                             {"decomposition_formula_residual", dec_scale > 0.0 ? dec_formula / dec_scale : dec_formula},
                             {"decomposition_holds", dec_rel <= r.tolerance_used && dec_formula <= 1e-8 * std::max(dec_scale, 1e-300)}});
            return r;
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Vanishing-order probe: I(t) >= (t/t1)^C I(t1) for t in [t_burn, t1]

inline Report vanishing_order_probe(const FrequencySeries& fs, double t1, double kappa = -1.0, double tol = 1e-6) {
    Report rep;
    rep.check = "vanishing_order_probe";
    const auto& tr = *fs.traj;
    if (kappa < 0.0) kappa = certify(tr).kappa;
    bool degenerate = false;
    for (double v : fs.I) degenerate = degenerate || !(v > 0.0);
    int i1 = -1;
    for (int i = 0; i < fs.size(); ++i)
        if (std::abs(fs.times[i] - t1) <= 1e-9 * std::max(1.0, t1)) i1 = i;
    if (i1 < 0) throw DomainError("t1 is not a time of the series");
    const double Tl = fs.times.back();
    const double C = kappa > 0.0 ? fs.F.back() * (-std::expm1(-2.0 * kappa * Tl)) / (2.0 * kappa) : fs.F.back() * Tl;
    double worst = std::numeric_limits<double>::infinity();
    std::vector<double> ts, lhs, bound;
    for (int i = 0; i <= i1; ++i) {
        const double b = std::log(fs.I[i1]) + C * std::log(fs.times[i] / fs.times[i1]);
        const double l = std::log(fs.I[i]);
        worst = std::min(worst, l - b);
        ts.push_back(fs.times[i]);
        lhs.push_back(fs.I[i]);
        bound.push_back(std::exp(b));
    }
    rep.verdict = Verdict::report_only;
    rep.data = {{"t1", fs.times[i1]},
                {"flagged", degenerate || worst < -tol},
                {"C", C},
                {"kappa", kappa},
                {"degenerate", degenerate},
                {"min_log_margin", worst},
                {"times", ts},
                {"I", lhs},
                {"bound", bound},
                {"tolerance_used", tol}};
    return rep;
}

}  // namespace rflab
