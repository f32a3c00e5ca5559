// rflab: run scenario files, refinement studies, plot-data export.
// exit 0 all certified verdicts hold, 2 some certified check violated, 3 bad config

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "rflab/scenario.hpp"

namespace {

int run(const std::string& config, const std::string& out, const rflab::RunOptions& opt) {
    const auto cfg = rflab::load_config(config);
    const auto res = rflab::run_scenario(cfg, out, opt);
    int held = 0, bad = 0, other = 0;
    for (const auto& [id, e] : res.report["checks"].items()) {
        const auto v = e.value("verdict", std::string("?"));
        if (v == "holds") ++held;
        else if (v == "violated") ++bad;
        else ++other;
        std::cout << "  " << id << ": " << v << "\n";
    }
    std::cout << res.report["scenario"].get<std::string>() << ": " << held << " hold, " << bad << " violated, " << other
              << " other; report in " << out << "/report.json\n";
    return res.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rflab: Harnack and frequency checks along Ricci flow"};
    app.require_subcommand(1);

    std::string config, out = "rflab_out";
    std::uint64_t seed = 0;
    int threads = 1, levels = 3;
    double tscale = 1.0, dt_factor = 0.5;

    auto add_common = [&](CLI::App* sc) {
        sc->add_option("--config", config, "scenario file (JSON, comments allowed)")->required()->check(CLI::ExistingFile);
        sc->add_option("--out", out, "output directory");
        sc->add_option("--seed", seed, "override the scenario seed");
        sc->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
        sc->add_option("--tolerance-scale", tscale, "multiply every verdict tolerance")->check(CLI::PositiveNumber);
    };
    auto* run_cmd = app.add_subcommand("run", "run one scenario");
    add_common(run_cmd);
    auto* conv_cmd = app.add_subcommand("converge", "refinement study of the residual checks");
    add_common(conv_cmd);
    conv_cmd->add_option("--levels", levels, "refinement levels (>= 3)");
    conv_cmd->add_option("--dt-factor", dt_factor, "dt ratio between levels");
    auto* plot_cmd = app.add_subcommand("export-plots", "write x y plot files from an existing report");
    plot_cmd->add_option("--out", out, "directory holding report.json")->required();

    CLI11_PARSE(app, argc, argv);

    rflab::RunOptions opt;
    opt.threads = threads;
    opt.tolerance_scale = tscale;
    try {
        if (run_cmd->parsed() || conv_cmd->parsed()) {
            if (run_cmd->count("--seed") || conv_cmd->count("--seed")) opt.seed = seed;
        }
        if (run_cmd->parsed()) return run(config, out, opt);
        if (conv_cmd->parsed()) {
            const auto r = rflab::convergence_study(rflab::load_config(config), levels, opt, dt_factor);
            std::filesystem::create_directories(out);
            std::ofstream(std::filesystem::path(out) / "convergence.json") << r.dump(2) << "\n";
            for (const auto& [name, e] : r["residuals"].items()) {
                std::cout << "  " << name << ":";
                if (e["exact"].get<bool>()) std::cout << " exact";
                else
                    for (const auto& o : e["orders"]) std::cout << " " << (o.is_null() ? std::string("n/a") : std::to_string(o.get<double>()));
                std::cout << "\n";
            }
            return 0;
        }
        const int n = rflab::export_plots(out);
        std::cout << n << " plot files in " << out << "/plots\n";
        return 0;
    } catch (const rflab::Error& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 3;
    }
}
