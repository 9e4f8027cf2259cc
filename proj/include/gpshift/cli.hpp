#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gpshift/detectors.hpp"
#include "gpshift/estimation.hpp"
#include "gpshift/kernels.hpp"
#include "gpshift/sim.hpp"

namespace gpshift::cli {

struct RunConfig {
    std::string command; // detect | calibrate | auc | rate
    std::string input_path;
    std::vector<KernelSpec> kernels;
    std::vector<std::string> detectors{"glrt"};
    std::string estimator = "grid"; // grid | fixed-rho | oracle
    double rho_fixed = 0.0;
    std::vector<double> sigma_grid; // empty -> the default ladder
    std::vector<double> rho_grid;
    double alpha = 0.1;
    std::vector<double> deltas{0.05};
    std::vector<double> b_grid;
    std::vector<int> n_grid;
    int n = 500;
    int t1 = 500;
    int t2 = 50;
    double target_auc = 0.9;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline Domain parse_domain(const std::string& name, int n) {
    if (name == "fixed") return Domain::fixed(n);
    if (name == "increasing") return Domain::increasing(n);
    throw UsageError("domain must be 'fixed' or 'increasing'");
}

inline void load_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file: " + path);
    nlohmann::json j;
    in >> j;
    if (j.contains("input")) cfg.input_path = j["input"].get<std::string>();
    if (j.contains("kernels")) {
        cfg.kernels.clear();
        for (const auto& k : j["kernels"]) {
            KernelSpec spec;
            spec.family = parse_family(k.at("family").get<std::string>());
            spec.sigma = k.value("sigma", 1.0);
            spec.rho = k.value("rho", 1.0);
            spec.shape = k.value("shape", 0.0);
            int n = k.value("n", cfg.n);
            spec.domain = parse_domain(k.value("domain", std::string("fixed")), n);
            cfg.kernels.push_back(spec);
        }
    }
    if (j.contains("detectors"))
        cfg.detectors = j["detectors"].get<std::vector<std::string>>();
    if (j.contains("estimator")) cfg.estimator = j["estimator"].get<std::string>();
    if (j.contains("rho_fixed")) cfg.rho_fixed = j["rho_fixed"].get<double>();
    if (j.contains("sigma_grid"))
        cfg.sigma_grid = j["sigma_grid"].get<std::vector<double>>();
    if (j.contains("rho_grid")) cfg.rho_grid = j["rho_grid"].get<std::vector<double>>();
    if (j.contains("alpha")) cfg.alpha = j["alpha"].get<double>();
    if (j.contains("delta")) {
        if (j["delta"].is_array())
            cfg.deltas = j["delta"].get<std::vector<double>>();
        else
            cfg.deltas = {j["delta"].get<double>()};
    }
    if (j.contains("b_grid")) cfg.b_grid = j["b_grid"].get<std::vector<double>>();
    if (j.contains("n_grid")) cfg.n_grid = j["n_grid"].get<std::vector<int>>();
    if (j.contains("n")) cfg.n = j["n"].get<int>();
    if (j.contains("t1")) cfg.t1 = j["t1"].get<int>();
    if (j.contains("t2")) cfg.t2 = j["t2"].get<int>();
    if (j.contains("target_auc")) cfg.target_auc = j["target_auc"].get<double>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("out")) cfg.out_dir = j["out"].get<std::string>();
}

/// Newline-separated finite reals; names the offending line on failure.
inline std::vector<double> read_series(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read input file: " + path);
    std::vector<double> x;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::size_t a = line.find_first_not_of(" \t\r");
        if (a == std::string::npos) continue; // blank line
        std::size_t b = line.find_last_not_of(" \t\r");
        std::string tok = line.substr(a, b - a + 1);
        char* end = nullptr;
        double v = std::strtod(tok.c_str(), &end);
        if (end != tok.c_str() + tok.size() || !std::isfinite(v))
            throw UsageError("input line " + std::to_string(line_no) +
                             " is not a finite number: '" + tok + "'");
        x.push_back(v);
    }
    return x;
}

inline void dump_series(const std::filesystem::path& path,
                        std::span<const double> x) {
    std::string s;
    for (double v : x) {
        s += detail::fmt_full(v);
        s += '\n';
    }
    detail::write_atomic(path, s);
}

inline EstimatorChoice make_estimator(const RunConfig& cfg, const KernelSpec& kernel) {
    if (cfg.estimator == "oracle")
        return EstimatorChoice::oracle(kernel.sigma, kernel.rho);
    if (cfg.estimator == "grid")
        return EstimatorChoice::grid_mle(
            cfg.sigma_grid.empty() ? default_sigma_grid() : cfg.sigma_grid,
            cfg.rho_grid.empty() ? default_rho_grid() : cfg.rho_grid);
    if (cfg.estimator == "fixed-rho") {
        if (!(cfg.rho_fixed > 0))
            throw UsageError("estimator fixed-rho requires rho_fixed > 0");
        return EstimatorChoice::fixed_rho(cfg.rho_fixed);
    }
    throw UsageError("unknown estimator: " + cfg.estimator);
}

inline DetectorSpec make_detector(const RunConfig& cfg, const std::string& name,
                                  const KernelSpec& kernel) {
    DetectorSpec d;
    d.kind = parse_detector(name);
    if (d.kind == DetectorKind::PluginGlrt) d.estimator = make_estimator(cfg, kernel);
    if (d.kind == DetectorKind::Cusum &&
        kernel.domain.kind == DomainKind::Increasing)
        d.f0_hint = toeplitz_generator_at(kernel, 0.0); // known-kernel long-run variance
    return d;
}

inline nlohmann::json detection_json(const DetectionResult& res,
                                     const std::string& detector, int n) {
    return nlohmann::json{{"statistic", res.statistic}, {"t_hat", res.t_hat},
                          {"threshold", res.threshold}, {"reject", res.reject},
                          {"b_hat", res.b_hat},         {"detector", detector},
                          {"n", n}};
}

/// detect: exit 0 = no change, 2 = change declared, 1 = error.
inline int cmd_detect(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        if (cfg.input_path.empty()) throw UsageError("detect requires --input");
        if (cfg.kernels.empty()) throw UsageError("detect requires a kernel");
        if (cfg.detectors.empty()) throw UsageError("detect requires a detector");
        std::vector<double> x = read_series(cfg.input_path);
        int n = static_cast<int>(x.size());
        if (n < 10) throw UsageError("input series must have at least 10 values");

        KernelSpec kernel = cfg.kernels.front();
        kernel.domain.n = n;
        validate(kernel);
        ChangeWindow window = ChangeWindow::make(n, cfg.alpha);
        double delta = cfg.deltas.front();
        const std::string& name = cfg.detectors.front();
        DetectorSpec d = make_detector(cfg, name, kernel);

        nlohmann::json j;
        if (d.kind == DetectorKind::PluginGlrt) {
            PluginResult res = plugin_glrt(x, kernel, window, delta, d.estimator);
            j = detection_json(res.detection, name, n);
            j["fit"] = {{"sigma_hat", res.fit.sigma_hat},
                        {"rho_hat", res.fit.rho_hat},
                        {"loglik", res.fit.loglik},
                        {"microergodic", res.fit.microergodic}};
        } else {
            ScoreEngine engine(kernel, window, delta, d);
            j = detection_json(engine.detect(x), name, n);
        }
        out << j.dump() << '\n';
        return j["reject"].get<bool>() ? 2 : 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

/// calibrate: empirical H0 rejection rate per delta, CSV on stdout.
inline int cmd_calibrate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        if (cfg.kernels.empty()) throw UsageError("calibrate requires a kernel");
        if (cfg.t1 < 1) throw UsageError("calibrate requires trials (t1) >= 1");
        KernelSpec kernel = cfg.kernels.front();
        if (kernel.domain.n != cfg.n) kernel.domain.n = cfg.n;
        validate(kernel);
        DetectorSpec d = make_detector(cfg, cfg.detectors.front(), kernel);
        std::string csv = "delta,empirical_rate,trials\n";
        for (double delta : cfg.deltas) {
            double rate =
                run_calibration(kernel, d, cfg.alpha, delta, cfg.t1, cfg.seed);
            csv += detail::fmt_full(delta);
            csv += ',';
            csv += detail::fmt_full(rate);
            csv += ',';
            csv += std::to_string(cfg.t1);
            csv += '\n';
        }
        out << csv;
        if (cfg.out_dir != ".")
            detail::write_atomic(std::filesystem::path(cfg.out_dir) / "calibrate.csv",
                                 csv);
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

/// auc: one row per (kernel, detector, b); detectors share each draw.
inline int cmd_auc(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        if (cfg.kernels.empty()) throw UsageError("auc requires at least one kernel");
        if (cfg.b_grid.empty()) throw UsageError("auc requires a nonempty --b-grid");
        if (cfg.detectors.empty()) throw UsageError("auc requires a detector");

        std::vector<AucRow> rows;
        for (std::size_t ki = 0; ki < cfg.kernels.size(); ++ki) {
            KernelSpec kernel = cfg.kernels[ki];
            if (kernel.domain.n <= 1) kernel.domain.n = cfg.n;
            validate(kernel);
            std::vector<DetectorSpec> dets;
            for (const auto& name : cfg.detectors)
                dets.push_back(make_detector(cfg, name, kernel));
            for (std::size_t bi = 0; bi < cfg.b_grid.size(); ++bi) {
                TrialConfig tc;
                tc.spec = kernel;
                tc.n = kernel.domain.n;
                tc.alpha = cfg.alpha;
                tc.b = cfg.b_grid[bi];
                tc.t1 = cfg.t1;
                tc.t2 = cfg.t2;
                tc.seed = stream_seed(cfg.seed, ki); // shared draws across b and detectors
                std::vector<AucSummary> summaries = run_auc_experiment_multi(tc, dets);
                for (std::size_t di = 0; di < dets.size(); ++di) {
                    AucRow row;
                    row.detector = dets[di].name();
                    row.spec = kernel;
                    row.b = tc.b;
                    row.alpha = cfg.alpha;
                    row.mean_auc = summaries[di].mean_auc;
                    row.stderr_auc = summaries[di].stderr_auc;
                    rows.push_back(row);
                }
            }
        }
        std::filesystem::path out_path =
            std::filesystem::path(cfg.out_dir) / "auc.csv";
        write_auc_csv(out_path, rows);
        out << "wrote " << out_path.string() << '\n';
        out << "detector      family        n     b        mean_auc  stderr\n";
        for (const auto& r : rows) {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%-13s %-13s %-5d %-8.4g %-9.4f %.4f\n",
                          r.detector.c_str(), family_name(r.spec.family),
                          r.spec.domain.n, r.b, r.mean_auc, r.stderr_auc);
            out << buf;
        }
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

/// rate: minimal detectable jump per n, one row per (kernel, detector, n).
inline int cmd_rate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        if (cfg.kernels.empty()) throw UsageError("rate requires at least one kernel");
        if (cfg.n_grid.empty()) throw UsageError("rate requires a nonempty --n-grid");
        if (cfg.detectors.empty()) throw UsageError("rate requires a detector");

        std::vector<RateRow> rows;
        for (std::size_t ki = 0; ki < cfg.kernels.size(); ++ki) {
            KernelSpec kernel = cfg.kernels[ki];
            kernel.domain.n = cfg.n_grid.front();
            validate(kernel);
            for (const auto& name : cfg.detectors) {
                DetectorSpec d = make_detector(cfg, name, kernel);
                std::vector<RatePoint> pts =
                    rate_curve(kernel, d, cfg.n_grid, cfg.target_auc, cfg.alpha,
                               cfg.t1, cfg.t2, stream_seed(cfg.seed, ki));
                for (const auto& pt : pts) {
                    RateRow row;
                    row.detector = d.name();
                    row.spec = kernel;
                    row.point = pt;
                    rows.push_back(row);
                }
            }
        }
        std::filesystem::path out_path =
            std::filesystem::path(cfg.out_dir) / "rate.csv";
        write_rate_csv(out_path, rows);
        out << "wrote " << out_path.string() << '\n';
        for (const auto& r : rows) {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%-13s %-13s n=%-5d b_min=%-10.5g%s\n",
                          r.detector.c_str(), family_name(r.spec.family), r.point.n,
                          r.point.b_min, r.point.saturated ? " (saturated)" : "");
            out << buf;
        }
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

inline int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    if (cfg.command == "detect") return cmd_detect(cfg, out, err);
    if (cfg.command == "calibrate") return cmd_calibrate(cfg, out, err);
    if (cfg.command == "auc") return cmd_auc(cfg, out, err);
    if (cfg.command == "rate") return cmd_rate(cfg, out, err);
    err << "error: unknown command '" << cfg.command << "'\n";
    return 1;
}

} // namespace gpshift::cli
