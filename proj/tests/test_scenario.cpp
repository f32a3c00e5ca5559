#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "rflab/scenario.hpp"

using namespace rflab;
using nlohmann::json;

namespace {

constexpr double pi = std::numbers::pi;
namespace fs = std::filesystem;

json small_sphere() {
    return json::parse(R"J({
      "name": "small_sphere", "seed": 3,
      "geometry": {"family": "round_sphere", "n": 2, "L": 24, "radius_sq": 1.0},
      "flow": {"T": 0.2, "dt": 0.002, "mode": "exact_sphere"},
      "solutions": [
        {"name": "u", "equation": "heat", "data": {"amplitude": 0.5, "modes": 4}},
        {"name": "w", "equation": "conjugate", "data": "2 + cos(theta)"}
      ],
      "checks": [
        {"type": "heat_lyh", "solution": "u"},
        {"type": "conjugate_lyh", "solution": "w", "variant": "ancient"},
        {"type": "brendle", "samples": 50},
        {"type": "ricci_flow_residual"},
        {"type": "evolution_residual", "solution": "u"},
        {"type": "commutator_residual", "solution": "w"}
      ]})J");
}

json small_torus() {
    return json::parse(R"J({
      "name": "small_torus", "seed": 5,
      "geometry": {"family": "conformal_torus", "N": 16, "phi": {"amplitude": 0.1, "modes": 2}},
      "flow": {"T": 0.004, "dt": 0.0002, "mode": "numerical_torus"},
      "solutions": [{"name": "u", "equation": "heat", "data": {"amplitude": 0.4, "modes": 2}}],
      "checks": [
        {"type": "heat_lyh", "solution": "u"},
        {"type": "general_beta", "solution": "u"},
        {"type": "evolution_residual", "solution": "u"}
      ]})J");
}

std::string tmpdir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("rflab_test_" + name);
    fs::remove_all(d);
    return d.string();
}

}  // namespace

TEST(Expr, EvaluatesArithmeticAndFunctions) {
    EXPECT_DOUBLE_EQ(Expr::parse("1 + 2*3")(0, 0, 0), 7.0);
    EXPECT_DOUBLE_EQ(Expr::parse("-2^2")(0, 0, 0), -4.0);
    EXPECT_DOUBLE_EQ(Expr::parse("(1+2)/4")(0, 0, 0), 0.75);
    EXPECT_NEAR(Expr::parse("sin(2*pi*x)*cos(y) + exp(theta)")(0.25, 0.0, 1.0), 1.0 + std::exp(1.0), 1e-15);
    EXPECT_NEAR(Expr::parse("e")(0, 0, 0), std::exp(1.0), 1e-15);
    EXPECT_NEAR(Expr::parse("cos(θ)")(0, 0, pi), -1.0, 1e-15);
}

TEST(Expr, MalformedInputIsAConfigError) {
    EXPECT_THROW(Expr::parse("1 +"), ConfigError);
    EXPECT_THROW(Expr::parse("sin(x"), ConfigError);
    EXPECT_THROW(Expr::parse("foo(x)"), ConfigError);
    EXPECT_THROW(Expr::parse("z"), ConfigError);
    EXPECT_THROW(Expr::parse("2 3"), ConfigError);
}

TEST(RandomFields, DeterministicAndPositive) {
    const auto a = detail::random_torus_shape(16, 1.0, 99, 3);
    const auto b = detail::random_torus_shape(16, 1.0, 99, 3);
    const auto c = detail::random_torus_shape(16, 1.0, 100, 3);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    EXPECT_NEAR(m, 1.0, 1e-15);

    const auto s = MetricSnapshot::sphere(RoundSphere{3, 1.0, 24});
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto f = random_zonal_positive(s, seed, 0.9, 6);
        for (double v : point_values(f, s)) EXPECT_GT(v, 0.0);
    }
    EXPECT_THROW(random_zonal_positive(s, 1, 1.5, 3), ConfigError);
}

TEST(RunScenario, SmallSphereAllHold) {
    RunOptions opt;
    opt.write_files = false;
    const auto r = run_scenario(small_sphere(), "", opt);
    EXPECT_EQ(r.exit_code, 0);
    for (const auto& [id, e] : r.report["checks"].items()) EXPECT_NE(e["verdict"], "violated") << id;
    EXPECT_EQ(r.report["checks"]["00_heat_lyh"]["verdict"], "holds");
    EXPECT_EQ(r.report["checks"]["01_conjugate_lyh"]["verdict"], "holds");
    EXPECT_EQ(r.report["checks"]["02_brendle"]["verdict"], "holds");
    EXPECT_EQ(r.report["schema_version"], kSchemaVersion);
}

TEST(RunScenario, UncertifiedGeometryIsInconclusive) {
    RunOptions opt;
    opt.write_files = false;
    const auto r = run_scenario(small_torus(), "", opt);
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_EQ(r.report["checks"]["00_heat_lyh"]["verdict"], "inconclusive");
    EXPECT_TRUE(r.report["checks"]["00_heat_lyh"].contains("hypothesis_error"));
}

TEST(RunScenario, ReportIsDeterministic) {
    const auto d1 = tmpdir("det1"), d2 = tmpdir("det2");
    run_scenario(small_sphere(), d1);
    run_scenario(small_sphere(), d2);
    auto slurp = [](const std::string& p) {
        std::ifstream is(p);
        return std::string(std::istreambuf_iterator<char>(is), {});
    };
    const auto a = slurp(d1 + "/report.json");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(d2 + "/report.json"));
    const auto r = run_scenario(small_sphere(), "", RunOptions{1234, 1, 1.0, false});
    EXPECT_NE(r.report["provenance"]["seed"], json::parse(a)["provenance"]["seed"]);
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST(RunScenario, ConfigErrors) {
    auto bad = small_torus();
    bad["flow"]["dt"] = 0.01;  // far past the parabolic CFL bound
    EXPECT_THROW(run_scenario(bad, "", RunOptions{std::nullopt, 1, 1.0, false}), ConfigError);

    auto unknown = small_sphere();
    unknown["checks"] = json::array({{{"type", "no_such_check"}}});
    EXPECT_THROW(run_scenario(unknown, "", RunOptions{std::nullopt, 1, 1.0, false}), ConfigError);

    auto missing = small_sphere();
    missing["checks"] = json::array({{{"type", "heat_lyh"}, {"solution", "nope"}}});
    EXPECT_THROW(run_scenario(missing, "", RunOptions{std::nullopt, 1, 1.0, false}), ConfigError);

    auto geo = small_sphere();
    geo["geometry"]["family"] = "hyperbolic";
    EXPECT_THROW(run_scenario(geo, "", RunOptions{std::nullopt, 1, 1.0, false}), ConfigError);
}

TEST(RunScenario, UserThresholdViolationSetsExitCode) {
    auto c = small_torus();
    c["checks"] = json::array({{{"type", "evolution_residual"}, {"solution", "u"}, {"max_normalized", 1e-15}}});
    const auto r = run_scenario(c, "", RunOptions{std::nullopt, 1, 1.0, false});
    EXPECT_EQ(r.exit_code, 2);
}

TEST(Convergence, NeedsThreeLevels) {
    EXPECT_THROW(convergence_study(small_sphere(), 2), ConfigError);
}

TEST(Convergence, SphereResidualsAreExactOrSecondOrder) {
    const auto r = convergence_study(small_sphere(), 3);
    ASSERT_TRUE(r.contains("residuals"));
    bool saw_exact = false, saw_order = false;
    for (const auto& [name, e] : r["residuals"].items()) {
        if (e["exact"].get<bool>()) {
            saw_exact = true;
            continue;
        }
        saw_order = true;
        for (const auto& o : e["orders"]) EXPECT_NEAR(o.get<double>(), 2.0, 0.3) << name;
    }
    EXPECT_TRUE(saw_exact);  // the flow itself is closed form
    EXPECT_TRUE(saw_order);
}

TEST(ScenarioFiles, AllParse) {
    int n = 0;
    for (const auto& e : fs::directory_iterator(RFLAB_SCENARIO_DIR)) {
        if (e.path().extension() != ".json") continue;
        const auto cfg = load_config(e.path().string());
        EXPECT_TRUE(cfg.contains("geometry")) << e.path();
        EXPECT_TRUE(cfg.contains("checks")) << e.path();
        ++n;
    }
    EXPECT_GE(n, 5);
}

TEST(Cli, ExitCodes) {
    const std::string cli = RFLAB_CLI;
    const auto out = tmpdir("cli");
    const auto cfg_ok = out + "_ok.json", cfg_bad = out + "_bad.json", cfg_viol = out + "_viol.json";
    std::ofstream(cfg_ok) << small_sphere().dump();
    auto bad = small_torus();
    bad["flow"]["dt"] = 0.01;
    std::ofstream(cfg_bad) << bad.dump();
    auto viol = small_torus();
    viol["checks"] = json::array({{{"type", "evolution_residual"}, {"solution", "u"}, {"max_normalized", 1e-15}}});
    std::ofstream(cfg_viol) << viol.dump();
    auto code = [&](const std::string& args) {
        const int s = std::system((cli + " " + args + " > /dev/null 2>&1").c_str());
        return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
    };
    EXPECT_EQ(code("run --config " + cfg_ok + " --out " + out), 0);
    EXPECT_TRUE(fs::exists(out + "/report.json"));
    EXPECT_TRUE(fs::exists(out + "/timings.json"));
    EXPECT_EQ(code("export-plots --out " + out), 0);
    EXPECT_EQ(code("run --config " + cfg_viol + " --out " + out), 2);
    EXPECT_EQ(code("run --config " + cfg_bad + " --out " + out), 3);
    for (const auto& p : {cfg_ok, cfg_bad, cfg_viol}) fs::remove(p);
    fs::remove_all(out);
}
