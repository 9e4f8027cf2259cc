// Command-line front end: detect a mean shift in a series, calibrate
// thresholds, and run the AUC / rate Monte Carlo experiments.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gpshift/cli.hpp"

namespace {

gpshift::KernelSpec kernel_from_flags(const std::string& family, double sigma,
                                      double rho, double shape,
                                      const std::string& domain, int n) {
    gpshift::KernelSpec spec;
    spec.family = gpshift::parse_family(family);
    spec.sigma = sigma;
    spec.rho = rho;
    spec.shape = shape;
    spec.domain = gpshift::cli::parse_domain(domain, n);
    return spec;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mean-shift detection for Gaussian process data"};
    app.require_subcommand(1);
    app.footer("Exit codes: 0 = success (detect: no change), 2 = detect declared a "
               "change, 1 = error.");

    gpshift::cli::RunConfig cfg;
    std::string config_path;
    std::string kernel_family;
    double sigma = 1.0, rho = 0.5, shape = 0.5;
    std::string domain = "fixed";

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file (flags override it)");
        sub->add_option("--kernel", kernel_family,
                        "kernel family: matern|powexp|sqexp|triangular|"
                        "exptoeplitz|polytoeplitz|white");
        sub->add_option("--sigma", sigma, "kernel stddev scale");
        sub->add_option("--rho", rho, "kernel range");
        sub->add_option("--shape", shape, "nu (matern) / beta (powexp) / lambda (polytoeplitz)");
        sub->add_option("--domain", domain, "fixed|increasing");
        sub->add_option("--detector", cfg.detectors,
                        "glrt|glrt-general|plugin-glrt|cusum (repeatable)")
            ->delimiter(',');
        sub->add_option("--estimator", cfg.estimator,
                        "plugin estimator: grid|fixed-rho|oracle");
        sub->add_option("--rho-fixed", cfg.rho_fixed, "rho for the fixed-rho estimator");
        sub->add_option("--alpha", cfg.alpha, "window fraction in (0, 1/2)");
        sub->add_option("--delta", cfg.deltas, "false-alarm budget(s)")->delimiter(',');
        sub->add_option("--b-grid", cfg.b_grid, "jump sizes")->delimiter(',');
        sub->add_option("--n-grid", cfg.n_grid, "sample sizes (rate)")->delimiter(',');
        sub->add_option("--n", cfg.n, "sample count for simulation commands");
        sub->add_option("--seed", cfg.seed, "master RNG seed");
        sub->add_option("--t1", cfg.t1, "trials per repetition (calibrate: total trials)");
        sub->add_option("--t2", cfg.t2, "repetitions");
        sub->add_option("--target-auc", cfg.target_auc, "rate-curve AUC target");
        sub->add_option("--out", cfg.out_dir, "output directory for CSV files");
    };

    CLI::App* detect = app.add_subcommand("detect", "test one series for a mean shift");
    detect->add_option("--input", cfg.input_path, "newline-separated series")->required();
    add_common(detect);
    CLI::App* calibrate =
        app.add_subcommand("calibrate", "empirical false-alarm rate vs delta");
    add_common(calibrate);
    CLI::App* auc = app.add_subcommand("auc", "mean AUC over a jump grid");
    add_common(auc);
    CLI::App* rate = app.add_subcommand("rate", "minimal detectable jump vs n");
    add_common(rate);

    CLI11_PARSE(app, argc, argv);
    CLI::App* sub = app.get_subcommands().front();
    cfg.command = sub->get_name();

    try {
        if (!config_path.empty()) {
            // Flags override the config file: reload flag values on top.
            gpshift::cli::RunConfig file_cfg = cfg;
            gpshift::cli::load_config_file(file_cfg, config_path);
            auto keep = [&](const std::string& flag) {
                return sub->count(flag) > 0;
            };
            if (!keep("--detector") && !file_cfg.detectors.empty())
                cfg.detectors = file_cfg.detectors;
            if (!keep("--estimator")) cfg.estimator = file_cfg.estimator;
            if (!keep("--rho-fixed")) cfg.rho_fixed = file_cfg.rho_fixed;
            if (!keep("--alpha")) cfg.alpha = file_cfg.alpha;
            if (!keep("--delta")) cfg.deltas = file_cfg.deltas;
            if (!keep("--b-grid")) cfg.b_grid = file_cfg.b_grid;
            if (!keep("--n-grid")) cfg.n_grid = file_cfg.n_grid;
            if (!keep("--n")) cfg.n = file_cfg.n;
            if (!keep("--seed")) cfg.seed = file_cfg.seed;
            if (!keep("--t1")) cfg.t1 = file_cfg.t1;
            if (!keep("--t2")) cfg.t2 = file_cfg.t2;
            if (!keep("--target-auc")) cfg.target_auc = file_cfg.target_auc;
            if (!keep("--out")) cfg.out_dir = file_cfg.out_dir;
            cfg.sigma_grid = file_cfg.sigma_grid;
            cfg.rho_grid = file_cfg.rho_grid;
            if (!file_cfg.input_path.empty() && cfg.input_path.empty())
                cfg.input_path = file_cfg.input_path;
            cfg.kernels = file_cfg.kernels;
        }
        if (sub->count("--kernel") > 0 || cfg.kernels.empty()) {
            if (kernel_family.empty()) {
                if (cfg.kernels.empty()) {
                    std::cerr << "error: no kernel given (--kernel or config file)\n";
                    return 1;
                }
            } else {
                cfg.kernels = {kernel_from_flags(kernel_family, sigma, rho, shape,
                                                 domain, cfg.n)};
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }

    return gpshift::cli::run(cfg, std::cout, std::cerr);
}
