#pragma once
// Scenario files: JSON (comments allowed) describing geometry, flow, solutions
// and checks. Formulas use a small grammar over x, y, theta, pi, e, sin, cos, exp.

#include <cctype>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rflab/frequency.hpp"

namespace rflab {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kCodeVersion = "rflab 1.0.0";

// ---------------------------------------------------------------------------
// Expressions

class Expr {
public:
    static Expr parse(const std::string& src) {
        Expr e;
        e.src_ = src;
        std::size_t pos = 0;
        e.root_ = e.parse_sum(pos);
        e.skip(pos);
        if (pos != src.size()) throw ConfigError("formula '" + src + "': unexpected '" + src.substr(pos) + "'");
        return e;
    }

    double operator()(double x, double y, double theta) const { return eval(root_, x, y, theta); }
    const std::string& source() const { return src_; }

private:
    struct Node {
        char op;  // n number, v variable, f function, + - * / ^, u unary minus
        double num = 0.0;
        std::string name;
        int a = -1, b = -1;
    };
    std::vector<Node> nodes_;
    int root_ = -1;
    std::string src_;

    int add(Node n) {
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    void skip(std::size_t& p) const {
        while (p < src_.size() && std::isspace(static_cast<unsigned char>(src_[p]))) ++p;
    }

    int parse_sum(std::size_t& p) {
        int l = parse_prod(p);
        for (;;) {
            skip(p);
            if (p < src_.size() && (src_[p] == '+' || src_[p] == '-')) {
                const char op = src_[p++];
                const int r = parse_prod(p);
                l = add({op, 0.0, "", l, r});
            } else {
                return l;
            }
        }
    }

    int parse_prod(std::size_t& p) {
        int l = parse_unary(p);
        for (;;) {
            skip(p);
            if (p < src_.size() && (src_[p] == '*' || src_[p] == '/')) {
                const char op = src_[p++];
                const int r = parse_unary(p);
                l = add({op, 0.0, "", l, r});
            } else {
                return l;
            }
        }
    }

    int parse_unary(std::size_t& p) {
        skip(p);
        if (p < src_.size() && src_[p] == '-') {
            ++p;
            return add({'u', 0.0, "", parse_unary(p), -1});
        }
        if (p < src_.size() && src_[p] == '+') {
            ++p;
            return parse_unary(p);
        }
        return parse_pow(p);
    }

    int parse_pow(std::size_t& p) {
        const int base = parse_atom(p);
        skip(p);
        if (p < src_.size() && src_[p] == '^') {
            ++p;
            return add({'^', 0.0, "", base, parse_unary(p)});
        }
        return base;
    }

    int parse_atom(std::size_t& p) {
        skip(p);
        if (p >= src_.size()) throw ConfigError("formula '" + src_ + "': unexpected end");
        const char c = src_[p];
        if (c == '(') {
            ++p;
            const int e = parse_sum(p);
            skip(p);
            if (p >= src_.size() || src_[p] != ')') throw ConfigError("formula '" + src_ + "': missing ')'");
            ++p;
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            std::size_t used = 0;
            const double v = std::stod(src_.substr(p), &used);
            p += used;
            return add({'n', v, "", -1, -1});
        }
        // identifiers; the UTF-8 theta is accepted too
        std::string id;
        if (src_.compare(p, 2, "\xCE\xB8") == 0) {
            id = "theta";
            p += 2;
        } else {
            while (p < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[p])) || src_[p] == '_')) id += src_[p++];
        }
        if (id.empty()) throw ConfigError("formula '" + src_ + "': unexpected '" + std::string(1, c) + "'");
        if (id == "pi") return add({'n', std::numbers::pi, "", -1, -1});
        if (id == "e") return add({'n', std::numbers::e, "", -1, -1});
        if (id == "x" || id == "y" || id == "theta") return add({'v', 0.0, id, -1, -1});
        if (id == "sin" || id == "cos" || id == "exp") {
            skip(p);
            if (p >= src_.size() || src_[p] != '(') throw ConfigError("formula '" + src_ + "': " + id + " needs '('");
            ++p;
            const int arg = parse_sum(p);
            skip(p);
            if (p >= src_.size() || src_[p] != ')') throw ConfigError("formula '" + src_ + "': missing ')'");
            ++p;
            return add({'f', 0.0, id, arg, -1});
        }
        throw ConfigError("formula '" + src_ + "': unknown name '" + id + "'");
    }

    double eval(int i, double x, double y, double th) const {
        const Node& n = nodes_[i];
        switch (n.op) {
            case 'n': return n.num;
            case 'v': return n.name == "x" ? x : (n.name == "y" ? y : th);
            case 'u': return -eval(n.a, x, y, th);
            case '+': return eval(n.a, x, y, th) + eval(n.b, x, y, th);
            case '-': return eval(n.a, x, y, th) - eval(n.b, x, y, th);
            case '*': return eval(n.a, x, y, th) * eval(n.b, x, y, th);
            case '/': return eval(n.a, x, y, th) / eval(n.b, x, y, th);
            case '^': return std::pow(eval(n.a, x, y, th), eval(n.b, x, y, th));
            default: {
                const double a = eval(n.a, x, y, th);
                if (n.name == "sin") return std::sin(a);
                if (n.name == "cos") return std::cos(a);
                return std::exp(a);
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Seeded smooth fields

namespace detail {

inline double seeded_normal(std::uint64_t& s) {
    const double a = static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53;
    const double b = static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log1p(-a)) * std::cos(2.0 * std::numbers::pi * b);
}

// Trigonometric polynomial with |k|_inf <= modes, scaled to max |.| = 1 on the grid.
inline std::vector<double> random_torus_shape(int N, double period, std::uint64_t seed, int modes) {
    std::uint64_t s = seed;
    std::vector<double> f(static_cast<std::size_t>(N) * N, 0.0);
    const double h = period / N;
    for (int kx = -modes; kx <= modes; ++kx)
        for (int ky = 0; ky <= modes; ++ky) {
            if (ky == 0 && kx <= 0) continue;
            const double w = 1.0 / (1.0 + kx * kx + ky * ky);
            const double a = w * seeded_normal(s), b = w * seeded_normal(s);
            for (int j = 0; j < N; ++j)
                for (int i = 0; i < N; ++i) {
                    const double arg = 2.0 * std::numbers::pi * (kx * i * h + ky * j * h) / period;
                    f[j * N + i] += a * std::cos(arg) + b * std::sin(arg);
                }
        }
    double m = 0.0;
    for (double v : f) m = std::max(m, std::abs(v));
    if (m > 0.0)
        for (double& v : f) v /= m;
    return f;
}

}  // namespace detail

// Positive zonal data 1 + sum_{l=1..modes} a_l Y_l, scaled so sum |a_l| sup|Y_l| = amplitude < 1.
inline GridField random_zonal_positive(const MetricSnapshot& s, std::uint64_t seed, double amplitude, int modes) {
    if (!(amplitude > 0.0 && amplitude < 1.0)) throw ConfigError("random zonal amplitude must lie in (0, 1)");
    modes = std::min(modes, s.L);
    std::uint64_t st = seed;
    GridField f = s.zero_field();
    double tot = 0.0;
    for (int l = 1; l <= modes; ++l) {
        f.values[l] = detail::seeded_normal(st) / l;
        double ymax = 0.0;  // crude sup bound from the cosine form
        for (int m = 0; m <= l; ++m) ymax += std::abs(s.basis->cos_coef(l, m));
        tot += std::abs(f.values[l]) * ymax;
    }
    for (int l = 1; l <= modes; ++l) f.values[l] *= amplitude / tot;
    f.values[0] = 1.0 / s.basis->cos_coef(0, 0);
    return f;
}

// ---------------------------------------------------------------------------
// Scenario state

struct RunOptions {
    std::optional<std::uint64_t> seed;
    int threads = 1;
    double tolerance_scale = 1.0;
    bool write_files = true;
};

struct Scenario {
    nlohmann::json config;
    std::uint64_t seed = 0;
    TrajPtr traj;
    std::map<std::string, SolutionField> solutions;
    std::map<std::string, KernelApprox> kernels;
};

namespace detail {

template <class T>
T get_or(const nlohmann::json& j, const char* key, T def) {
    if (!j.contains(key) || j.at(key).is_null()) return def;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

inline const nlohmann::json& need(const nlohmann::json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError(std::string("config is missing '") + key + "'");
    return j.at(key);
}

inline std::uint64_t derive_seed(std::uint64_t base, const std::string& tag) {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char c : tag) h = (h ^ c) * 1099511628211ULL;
    std::uint64_t s = base ^ h;
    return splitmix64(s);
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
    return h;
}

inline MetricSnapshot build_geometry(const nlohmann::json& g, std::uint64_t seed) {
    const auto fam = need(g, "family").get<std::string>();
    if (fam == "round_sphere") {
        RoundSphere rs;
        rs.n = get_or(g, "n", 2);
        rs.L = get_or(g, "L", 32);
        rs.radius_sq = get_or(g, "radius_sq", 1.0);
        return MetricSnapshot::sphere(rs);
    }
    if (fam == "conformal_torus") {
        const int N = get_or(g, "N", 64);
        const double period = get_or(g, "period", 1.0);
        ConformalTorus2D c;
        if (g.contains("phi") && g.at("phi").is_string()) {
            const auto e = Expr::parse(g.at("phi").get<std::string>());
            c = ConformalTorus2D::from_function(N, period, [&](double x, double y) { return e(x, y, 0.0); });
        } else if (g.contains("phi") && g.at("phi").is_object()) {
            const auto& r = g.at("phi");
            const double amp = get_or(r, "amplitude", 0.05);
            const auto shape = random_torus_shape(N, period, get_or<std::uint64_t>(r, "seed", derive_seed(seed, "phi")), get_or(r, "modes", 2));
            c.N = N;
            c.period = period;
            c.phi.resize(shape.size());
            for (std::size_t i = 0; i < shape.size(); ++i) c.phi[i] = amp * shape[i];
        } else {
            c = ConformalTorus2D::from_function(N, period, [](double, double) { return 0.0; });
        }
        return MetricSnapshot::torus(c);
    }
    throw ConfigError("unknown geometry family '" + fam + "'");
}

inline GridField build_data(const nlohmann::json& d, const MetricSnapshot& s, std::uint64_t seed) {
    if (d.is_string() || d.is_number()) {
        const auto e = Expr::parse(d.is_string() ? d.get<std::string>() : d.dump());
        if (s.family == Family::sphere) {
            GridField f = s.zero_field();
            f.values = s.basis->project([&](double th) { return e(0.0, 0.0, th); });
            return f;
        }
        GridField f = s.zero_field();
        const double h = s.h();
        for (int p = 0; p < s.points(); ++p) f.values[p] = e((p % s.N) * h, (p / s.N) * h, 0.0);
        return f;
    }
    if (d.is_object()) {
        const double amp = get_or(d, "amplitude", 0.3);
        const int modes = get_or(d, "modes", 3);
        const auto sd = get_or<std::uint64_t>(d, "seed", seed);
        if (s.family == Family::sphere) return random_zonal_positive(s, sd, amp, modes);
        if (!(amp > 0.0 && amp < 1.0)) throw ConfigError("random data amplitude must lie in (0, 1)");
        const auto shape = random_torus_shape(s.N, s.period, sd, modes);
        GridField f = s.zero_field();
        for (int p = 0; p < s.points(); ++p) f.values[p] = 1.0 + amp * shape[p];
        return f;
    }
    throw ConfigError("data must be a formula string or a random-field object");
}

}  // namespace detail

inline Scenario build_scenario(const nlohmann::json& cfg, const RunOptions& opt = {}) {
    Scenario sc;
    sc.config = cfg;
    if (detail::get_or(cfg, "schema_version", kSchemaVersion) != kSchemaVersion) throw ConfigError("unsupported schema_version");
    sc.seed = opt.seed ? *opt.seed : detail::get_or<std::uint64_t>(cfg, "seed", 0);
    const auto s0 = detail::build_geometry(detail::need(cfg, "geometry"), sc.seed);
    const auto& fl = detail::need(cfg, "flow");
    FlowConfig fc;
    fc.T = detail::get_or(fl, "T", 0.1);
    fc.dt = detail::get_or(fl, "dt", 1e-3);
    fc.mode = parse_mode(detail::get_or<std::string>(fl, "mode", "static"));
    fc.store_every = detail::get_or(fl, "store_every", 1);
    fc.cfl_safety = detail::get_or(fl, "cfl_safety", 0.9);
    sc.traj = std::make_shared<const FlowTrajectory>(evolve_ricci_flow(s0, fc));
    const auto& tr = *sc.traj;
    if (cfg.contains("solutions")) {
        int idx = 0;
        for (const auto& sj : cfg.at("solutions")) {
            const auto name = detail::get_or<std::string>(sj, "name", "sol" + std::to_string(idx));
            const auto eq = detail::need(sj, "equation").get<std::string>();
            const auto sd = detail::derive_seed(sc.seed, "solution:" + name);
            if (sc.solutions.count(name) || sc.kernels.count(name)) throw ConfigError("duplicate solution name '" + name + "'");
            if (eq == "heat") {
                const double t0 = detail::get_or(sj, "t0", 0.0);
                const int k0 = detail::stored_index(tr, t0);
                sc.solutions.emplace(name, solve_heat_forward(sc.traj, detail::build_data(detail::need(sj, "data"), tr.at(k0), sd), t0));
            } else if (eq == "conjugate") {
                sc.solutions.emplace(name, solve_conjugate_backward(sc.traj, detail::build_data(detail::need(sj, "data"), tr.at(tr.count() - 1), sd)));
            } else if (eq == "kernel") {
                Point pole = tr.family() == Family::sphere ? sphere_point_at_angle(0.0) : torus_point(0.0, 0.0);
                if (sj.contains("pole")) {
                    const auto pv = sj.at("pole").get<std::vector<double>>();
                    if (tr.family() == Family::torus && pv.size() == 2) pole = torus_point(pv[0], pv[1]);
                    else if (tr.family() == Family::sphere && pv.size() == 1) pole = sphere_point_at_angle(pv[0]);
                    else throw ConfigError("kernel pole has the wrong number of coordinates");
                }
                auto ka = approximate_heat_kernel(sc.traj, pole, detail::get_or(sj, "t_start", -1.0));
                sc.kernels.emplace(name, std::move(ka));
            } else {
                throw ConfigError("unknown equation '" + eq + "'");
            }
            ++idx;
        }
    }
    return sc;
}

// ---------------------------------------------------------------------------
// Checks

namespace detail {

inline const SolutionField& find_solution(const Scenario& sc, const std::string& name) {
    if (auto it = sc.solutions.find(name); it != sc.solutions.end()) return it->second;
    if (auto it = sc.kernels.find(name); it != sc.kernels.end()) return it->second.sol;
    throw ConfigError("check refers to unknown solution '" + name + "'");
}

inline const KernelApprox& find_kernel(const Scenario& sc, const std::string& name) {
    if (auto it = sc.kernels.find(name); it != sc.kernels.end()) return it->second;
    throw ConfigError("check refers to unknown kernel '" + name + "'");
}

inline double kappa_of(const nlohmann::json& c, const FlowTrajectory& tr) {
    const double cert = certify(tr).kappa;
    if (!c.contains("kappa") || (c.at("kappa").is_string() && c.at("kappa").get<std::string>() == "certified")) return cert;
    if (!c.at("kappa").is_number()) throw ConfigError("kappa must be a number or \"certified\"");
    return c.at("kappa").get<double>();
}

inline std::map<std::string, double> constants_of(const nlohmann::json& c) {
    std::map<std::string, double> m;
    if (c.contains("constants"))
        for (auto it = c.at("constants").begin(); it != c.at("constants").end(); ++it) m[it.key()] = it.value().get<double>();
    return m;
}

inline CheckOptions check_options(const nlohmann::json& c, const nlohmann::json& cfg, const RunOptions& opt) {
    CheckOptions o;
    const auto tol = cfg.contains("tolerances") ? cfg.at("tolerances") : nlohmann::json::object();
    o.c_tol = get_or(c, "c_tol", get_or(tol, "c_tol", 10.0));
    o.tol_override = get_or(c, "tolerance", -1.0);
    o.t_burn = get_or(c, "t_burn", -1.0);
    o.t_max = get_or(c, "t_max", std::numeric_limits<double>::infinity());
    o.delta_end_steps = get_or(c, "delta_end_steps", 10);
    o.max_times = get_or(c, "max_times", 0);
    o.tolerance_scale = opt.tolerance_scale;
    return o;
}

// Residual reports optionally carry a threshold on linf_normalized.
inline nlohmann::json residual_entry(const std::vector<ResidualReport>& reps, const nlohmann::json& c, double tscale) {
    nlohmann::json j;
    j["residuals"] = nlohmann::json::array();
    for (const auto& r : reps) j["residuals"].push_back(to_json(r));
    if (c.contains("max_normalized")) {
        const double lim = c.at("max_normalized").get<double>() * tscale;
        bool ok = true;
        for (const auto& r : reps) ok = ok && r.linf_normalized <= lim;
        j["verdict"] = ok ? "holds" : "violated";
        j["threshold"] = lim;
    } else {
        j["verdict"] = "report_only";
    }
    return j;
}

struct CheckOutput {
    nlohmann::json entry;
    std::vector<std::pair<std::string, std::string>> csv;  // (file name, content)
};

inline std::string eigen_csv(const EigenReport& r) {
    std::ostringstream os;
    os.precision(17);
    os << "t," << r.sense << "_normalized_eigenvalue\n";
    for (std::size_t i = 0; i < r.times.size(); ++i) os << r.times[i] << "," << r.per_time[i] << "\n";
    return os.str();
}

inline std::string mono_csv(const MonotonicityReport& r) {
    std::ostringstream os;
    os.precision(17);
    os << "t,value\n";
    for (std::size_t i = 0; i < r.times.size(); ++i) os << r.times[i] << "," << r.values[i] << "\n";
    return os.str();
}

inline std::string series_csv(const FrequencySeries& fs) {
    std::ostringstream os;
    os.precision(17);
    os << "t,I,D,S,F\n";
    for (int i = 0; i < fs.size(); ++i) os << fs.times[i] << "," << fs.I[i] << "," << fs.D[i] << "," << fs.S[i] << "," << fs.F[i] << "\n";
    return os.str();
}

inline FrequencySeries series_for(const Scenario& sc, const nlohmann::json& c) {
    const auto& u = find_solution(sc, need(c, "solution").get<std::string>());
    const auto variant = get_or<std::string>(c, "variant", "");
    const double delta_end = get_or(c, "delta_end_steps", 0) * sc.traj->dt;
    if (variant == "conjugate_weight") {
        const auto& w = find_solution(sc, need(c, "weight").get<std::string>());
        return conjugate_weight_series(u, w, delta_end, get_or(c, "t_burn", -1.0));
    }
    const auto kname = get_or<std::string>(c, "kernel", "");
    if (kname.empty()) return frequency_series(u, nullptr, delta_end, get_or(c, "t_burn", -1.0));
    return frequency_series(u, &find_kernel(sc, kname), delta_end, get_or(c, "t_burn", -1.0));
}

inline CheckOutput run_check(const Scenario& sc, const nlohmann::json& c, const std::string& id, const RunOptions& opt) {
    const auto type = need(c, "type").get<std::string>();
    const auto& tr = *sc.traj;
    const auto o = check_options(c, sc.config, opt);
    CheckOutput out;
    auto& j = out.entry;
    j["type"] = type;
    if (type == "heat_lyh") {
        const auto name = need(c, "solution").get<std::string>();
        const double kappa = kappa_of(c, tr);
        const auto r = sc.kernels.count(name) ? heat_lyh_report(sc.kernels.at(name), kappa, o) : heat_lyh_report(find_solution(sc, name), kappa, o);
        j.update(to_json(r));
        out.csv.push_back({id + ".csv", eigen_csv(r)});
    } else if (type == "conjugate_lyh") {
        const auto r = conjugate_lyh_report(find_solution(sc, need(c, "solution").get<std::string>()), kappa_of(c, tr),
                                            parse_eta_variant(get_or<std::string>(c, "variant", "explicit")), o);
        j.update(to_json(r));
        out.csv.push_back({id + ".csv", eigen_csv(r)});
    } else if (type == "general_beta") {
        j.update(to_json(general_beta_report(find_solution(sc, need(c, "solution").get<std::string>()), constants_of(c), o)));
    } else if (type == "static_hamilton") {
        j.update(to_json(static_hamilton_report(find_solution(sc, need(c, "solution").get<std::string>()), constants_of(c), o)));
    } else if (type == "brendle") {
        j.update(to_json(brendle_harnack_report(tr, get_or(c, "samples", 10000), get_or<std::uint64_t>(c, "seed", derive_seed(sc.seed, "brendle:" + id)))));
    } else if (type == "heat_kernel_bounds") {
        j.update(to_json(heat_kernel_bound_report(find_kernel(sc, need(c, "kernel").get<std::string>()), o)));
    } else if (type == "ricci_flow_residual") {
        const double r = ricci_flow_residual(tr);
        j["residual"] = r;
        ResidualReport rr;
        rr.name = "ricci_flow_residual";
        rr.linf = rr.linf_normalized = r;
        rr.scale = 1.0;
        j.update(residual_entry({rr}, c, opt.tolerance_scale));
    } else if (type == "evolution_residual") {
        const auto& u = find_solution(sc, need(c, "solution").get<std::string>());
        const auto [e, d] = u.eps_delta();
        j.update(residual_entry({evolution_residual(u, e, d, get_or(c, "max_times", 24))}, c, opt.tolerance_scale));
    } else if (type == "commutator_residual") {
        const auto& u = find_solution(sc, need(c, "solution").get<std::string>());
        if (u.k_first != 0) throw ConfigError("commutator_residual needs a solution defined from t = 0");
        const double eps = u.eq == Equation::conjugate_backward ? -1.0 : 1.0;
        j.update(residual_entry({lichnerowicz_commutator_residual(u.values, tr, eps, get_or(c, "max_times", 24))}, c, opt.tolerance_scale));
    } else if (type == "classical_identities") {
        j.update(residual_entry(classical_identity_residuals(find_solution(sc, need(c, "solution").get<std::string>()), get_or(c, "max_times", 24)), c,
                                opt.tolerance_scale));
    } else if (type == "frequency_residuals") {
        const auto fs = series_for(sc, c);
        const auto reps = frequency_derivative_residuals(fs);
        j.update(residual_entry(reps, c, opt.tolerance_scale));
        // first-derivative identity: residual / (dt^2 |I'|), and with the spatial size added
        const double factor = get_or(c, "lemma_factor", 10.0) * opt.tolerance_scale;
        const double dt2 = fs.dt * fs.dt, disc = dt2 + detail::frequency_disc(fs);
        double ratio = 0.0, ratio_dt = 0.0;
        for (std::size_t i = 0; i < reps[0].per_time.size(); ++i) {
            const auto& T = fs.terms[i + 1];
            const double r = reps[0].per_time[i];
            if (r <= 1e-14 * T.I) continue;  // rounding floor, e.g. I' = 0 exactly
            const double ip = std::abs(2.0 * T.D + T.S);
            ratio = std::max(ratio, r / (disc * ip));
            ratio_dt = std::max(ratio_dt, r / (dt2 * ip));
        }
        j["first_derivative_ratio"] = ratio;
        j["first_derivative_ratio_dt_only"] = ratio_dt;
        j["first_derivative_factor"] = factor;
        j["spatial_size"] = detail::frequency_disc(fs);
        j["cauchy_schwarz_excess"] = cauchy_schwarz_excess(fs);
        if (!c.contains("max_normalized")) j["verdict"] = ratio <= factor ? "holds" : "violated";
        else if (ratio > factor) j["verdict"] = "violated";
        out.csv.push_back({id + "_series.csv", series_csv(fs)});
    } else if (type == "frequency_monotonicity") {
        const auto fs = series_for(sc, c);
        FrequencyParams prm;
        prm.kappa = c.contains("kappa") ? kappa_of(c, tr) : -1.0;
        const auto cm = constants_of(c);
        prm.c_n = constant_or(cm, "c_n");
        prm.C1 = constant_or(cm, "C1");
        prm.C2 = constant_or(cm, "C2");
        prm.check = o;
        const auto r = corrected_frequency_series(fs, parse_frequency_variant(get_or<std::string>(c, "variant", "sec_nonneg")), prm);
        j.update(to_json(r));
        out.csv.push_back({id + ".csv", mono_csv(r)});
        out.csv.push_back({id + "_series.csv", series_csv(fs)});
    } else if (type == "vanishing_order") {
        const auto fs = series_for(sc, c);
        const double t1 = get_or(c, "t1", fs.times[fs.size() / 2]);
        j.update(to_json(vanishing_order_probe(fs, t1, c.contains("kappa") ? kappa_of(c, tr) : -1.0)));
    } else {
        throw ConfigError("unknown check type '" + type + "'");
    }
    return out;
}

}  // namespace detail

struct RunResult {
    nlohmann::json report;
    nlohmann::json timings;
    int exit_code = 0;
};

inline const char* const kResidualChecks[] = {"ricci_flow_residual", "evolution_residual", "commutator_residual", "classical_identities",
                                              "frequency_residuals"};

// Runs every requested check. Hypothesis failures become inconclusive entries;
// configuration errors propagate.
inline RunResult run_scenario(const nlohmann::json& cfg, const std::string& out_dir, const RunOptions& opt = {}) {
    namespace fs = std::filesystem;
    using clock = std::chrono::steady_clock;
    set_threads(opt.threads);
    RunResult res;
    const auto t_start = clock::now();
    Scenario sc = build_scenario(cfg, opt);
    const double t_build = std::chrono::duration<double>(clock::now() - t_start).count();
    auto& rep = res.report;
    rep["schema_version"] = kSchemaVersion;
    rep["scenario"] = detail::get_or<std::string>(cfg, "name", "unnamed");
    rep["provenance"] = {{"code_version", kCodeVersion}, {"config_hash", detail::fnv1a(cfg.dump())}, {"seed", sc.seed},
                         {"tolerance_scale", opt.tolerance_scale}};
    rep["trajectory"] = {{"geometry", family_name(sc.traj->family())}, {"dim", sc.traj->dim()}, {"mode", mode_name(sc.traj->mode)},
                         {"T", sc.traj->T}, {"dt", sc.traj->dt}, {"dt_internal", sc.traj->dt_internal}, {"stored", sc.traj->count()}};
    nlohmann::json sols = nlohmann::json::object();
    for (const auto& [name, s] : sc.solutions)
        sols[name] = {{"equation", equation_name(s.eq)}, {"min_ratio", s.min_ratio}, {"positivity_violated", s.positivity_violated}};
    for (const auto& [name, k] : sc.kernels)
        sols[name] = {{"equation", "kernel"}, {"t_start", k.t_start}, {"t_burn", k.t_burn}, {"raw_mass", k.raw_mass},
                      {"min_ratio", k.sol.min_ratio}};
    rep["solutions"] = sols;
    rep["checks"] = nlohmann::json::object();
    res.timings["build_seconds"] = t_build;
    bool violated = false;
    std::vector<std::pair<std::string, std::string>> files;
    int idx = 0;
    for (const auto& c : cfg.contains("checks") ? cfg.at("checks") : nlohmann::json::array()) {
        const auto type = detail::need(c, "type").get<std::string>();
        char buf[16];
        std::snprintf(buf, sizeof buf, "%02d_", idx++);
        const auto id = detail::get_or<std::string>(c, "id", std::string(buf) + type);
        if (rep["checks"].contains(id)) throw ConfigError("duplicate check id '" + id + "'");
        const auto t0 = clock::now();
        nlohmann::json entry;
        try {
            auto out = detail::run_check(sc, c, id, opt);
            entry = std::move(out.entry);
            for (auto& f : out.csv) files.push_back(std::move(f));
        } catch (const HypothesisError& e) {
            entry = {{"type", type}, {"verdict", "inconclusive"}, {"hypothesis_error", e.what()}};
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            entry = {{"type", type}, {"verdict", "inconclusive"}, {"error", e.what()}};
        }
        res.timings["checks"][id] = std::chrono::duration<double>(clock::now() - t0).count();
        if (entry.value("verdict", std::string()) == "violated") violated = true;
        rep["checks"][id] = std::move(entry);
    }
    res.exit_code = violated ? 2 : 0;
    rep["exit_code"] = res.exit_code;
    res.timings["total_seconds"] = std::chrono::duration<double>(clock::now() - t_start).count();
    if (opt.write_files && !out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream(fs::path(out_dir) / "report.json") << rep.dump(2) << "\n";
        std::ofstream(fs::path(out_dir) / "timings.json") << res.timings.dump(2) << "\n";
        for (const auto& [name, content] : files) std::ofstream(fs::path(out_dir) / name) << content;
    }
    return res;
}

inline nlohmann::json load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config " + path);
    try {
        return nlohmann::json::parse(is, nullptr, true, true);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Refinement studies: per level the stored dt is multiplied by dt_factor. On the
// torus h halves too, and store_every doubles so the internal step keeps to the
// parabolic CFL bound (internal dt shrinks by dt_factor/2).

inline nlohmann::json refine_config(const nlohmann::json& cfg, int level, double dt_factor) {
    auto c = cfg;
    auto& g = c["geometry"];
    auto& f = c["flow"];
    const double dt = detail::get_or(f, "dt", 1e-3);
    if (g.value("family", std::string()) == "conformal_torus") {
        g["N"] = detail::get_or(g, "N", 64) << level;
        f["store_every"] = detail::get_or(f, "store_every", 1) << level;
        f["dt"] = dt * std::pow(dt_factor / 2.0, level);
    } else {
        f["dt"] = dt * std::pow(dt_factor, level);
    }
    return c;
}

inline nlohmann::json convergence_study(const nlohmann::json& cfg, int levels, const RunOptions& opt = {}, double dt_factor = 0.5) {
    if (levels < 3) throw ConfigError("convergence_study needs at least 3 levels");
    // residual checks only
    auto base = cfg;
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : cfg.contains("checks") ? cfg.at("checks") : nlohmann::json::array()) {
        const auto t = c.value("type", std::string());
        for (const char* r : kResidualChecks)
            if (t == r) checks.push_back(c);
    }
    base["checks"] = checks;
    std::map<std::string, std::vector<double>> series, scales;
    nlohmann::json lv = nlohmann::json::array();
    RunOptions o = opt;
    o.write_files = false;
    for (int l = 0; l < levels; ++l) {
        const auto c = refine_config(base, l, dt_factor);
        const auto r = run_scenario(c, "", o);
        lv.push_back({{"level", l}, {"dt", r.report["trajectory"]["dt"]}, {"N", c["geometry"].value("N", 0)}});
        for (auto it = r.report["checks"].begin(); it != r.report["checks"].end(); ++it) {
            const auto& e = it.value();
            if (e.contains("residuals"))
                for (const auto& rr : e["residuals"]) {
                    const auto key = it.key() + "/" + rr["name"].get<std::string>();
                    series[key].push_back(rr["linf"].get<double>());
                    scales[key].push_back(rr["scale"].get<double>());
                }
        }
    }
    nlohmann::json out;
    out["schema_version"] = kSchemaVersion;
    out["levels"] = lv;
    out["dt_factor"] = dt_factor;
    for (const auto& [k, v] : series) {
        nlohmann::json orders = nlohmann::json::array();
        // rounding floor: centered differences amplify it like 1/dt, so no order is meaningful
        bool exact = true;
        for (std::size_t i = 0; i < v.size(); ++i) exact = exact && v[i] < 1e-9 * std::max(1.0, scales[k][i]);
        for (std::size_t i = 0; i + 1 < v.size(); ++i)
            orders.push_back(v[i + 1] > 0.0 && v[i] > 0.0 ? nlohmann::json(std::log(v[i] / v[i + 1]) / std::log(1.0 / dt_factor))
                                                           : nlohmann::json(nullptr));
        out["residuals"][k] = {{"linf", v}, {"orders", orders}, {"exact", exact}};
    }
    return out;
}

// Two-column plot files from the time series stored in a report.
inline int export_plots(const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::ifstream is(fs::path(out_dir) / "report.json");
    if (!is) throw ConfigError("no report.json in " + out_dir);
    nlohmann::json rep;
    is >> rep;
    fs::create_directories(fs::path(out_dir) / "plots");
    int written = 0;
    auto emit = [&](const std::string& name, const nlohmann::json& xs, const nlohmann::json& ys) {
        if (!xs.is_array() || !ys.is_array() || xs.size() != ys.size() || xs.empty()) return;
        std::ofstream os(fs::path(out_dir) / "plots" / (name + ".dat"));
        os.precision(17);
        os << "# x y\n";
        for (std::size_t i = 0; i < xs.size(); ++i) os << xs[i].get<double>() << " " << ys[i].get<double>() << "\n";
        ++written;
    };
    for (auto it = rep["checks"].begin(); it != rep["checks"].end(); ++it) {
        const auto& e = it.value();
        if (e.contains("per_time")) emit(it.key(), e["times"], e["per_time"]);
        if (e.contains("values") && e.contains("times")) emit(it.key(), e["times"], e["values"]);
        if (e.contains("data") && e["data"].contains("beta_emp")) emit(it.key() + "_beta_emp", e["data"]["times"], e["data"]["beta_emp"]);
        if (e.contains("data") && e["data"].contains("bound")) {
            emit(it.key() + "_I", e["data"]["times"], e["data"]["I"]);
            emit(it.key() + "_bound", e["data"]["times"], e["data"]["bound"]);
        }
        if (e.contains("residuals"))
            for (const auto& r : e["residuals"]) emit(it.key() + "_" + r["name"].get<std::string>(), r["times"], r["per_time"]);
    }
    return written;
}

}  // namespace rflab
