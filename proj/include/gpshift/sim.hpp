#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "gpshift/covariance.hpp"
#include "gpshift/detectors.hpp"
#include "gpshift/estimation.hpp"
#include "gpshift/kernels.hpp"

namespace gpshift {

// ---------------------------------------------------------------------------
// Seeding. One master seed spawns per-repetition engines through SplitMix64,
// so repetitions stay independent and reproducible under any scheduling.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t s = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
    std::uint64_t a = splitmix64(s);
    (void)splitmix64(s);
    return a ^ splitmix64(s);
}

// ---------------------------------------------------------------------------
// Trial generation
// ---------------------------------------------------------------------------

struct TrialConfig {
    KernelSpec spec;
    int n = 500;
    double alpha = 0.1;
    double b = 0.0;
    int t1 = 500;
    int t2 = 50;
    std::uint64_t seed = 0;
};

inline void validate(const TrialConfig& cfg) {
    validate(cfg.spec);
    if (cfg.n != cfg.spec.domain.n)
        throw std::invalid_argument("trial: n disagrees with the kernel domain");
    if (cfg.t1 < 2) throw std::invalid_argument("trial: t1 must be >= 2");
    if (cfg.t2 < 1) throw std::invalid_argument("trial: t2 must be >= 1");
    if (!(cfg.b >= 0)) throw std::invalid_argument("trial: b must be >= 0");
}

struct Trial {
    bool h1 = false;
    int t_true = 0; // meaningful only under h1
    std::vector<double> x;
};

/// One labeled draw: fair-coin hypothesis, H1 shifts the mean by (b/2) zeta_t
/// with t uniform over the window.
inline Trial gen_trial(const TrialConfig& cfg, const CovOperator& cov,
                       const ChangeWindow& window, std::mt19937_64& rng) {
    Trial trial;
    trial.h1 = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
    std::normal_distribution<double> normal;
    std::vector<double> z(static_cast<std::size_t>(cfg.n));
    for (double& v : z) v = normal(rng);
    trial.x = cov.sample_chol(z);
    if (trial.h1) {
        trial.t_true =
            std::uniform_int_distribution<int>(window.t_min, window.t_max)(rng);
        double half = cfg.b / 2.0;
        for (int i = 0; i < cfg.n; ++i)
            trial.x[static_cast<std::size_t>(i)] += i < trial.t_true ? -half : half;
    }
    return trial;
}

inline Trial gen_trial(const TrialConfig& cfg, std::mt19937_64& rng) {
    validate(cfg);
    CovOperator cov = build_cov(cfg.spec);
    ChangeWindow window = ChangeWindow::make(cfg.n, cfg.alpha);
    return gen_trial(cfg, cov, window, rng);
}

// ---------------------------------------------------------------------------
// ROC / AUC
// ---------------------------------------------------------------------------

struct RocCurve {
    std::vector<std::pair<double, double>> points; // (false alarm, power)
    double auc = 0.0;
};

/// Threshold sweep over the pooled scores; tied scores collapse to a single
/// sweep point, which makes the trapezoidal area equal to the Mann-Whitney
/// pair-counting statistic.
inline RocCurve roc_auc(std::span<const double> scores_h0,
                        std::span<const double> scores_h1) {
    if (scores_h0.empty() || scores_h1.empty())
        throw std::invalid_argument("roc_auc: both score lists must be nonempty");
    std::vector<std::pair<double, int>> pooled;
    pooled.reserve(scores_h0.size() + scores_h1.size());
    for (double s : scores_h0) pooled.emplace_back(s, 0);
    for (double s : scores_h1) pooled.emplace_back(s, 1);
    std::sort(pooled.begin(), pooled.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    RocCurve roc;
    roc.points.emplace_back(0.0, 0.0);
    double n0 = static_cast<double>(scores_h0.size());
    double n1 = static_cast<double>(scores_h1.size());
    std::size_t fp = 0, tp = 0;
    double auc = 0.0;
    double prev_fpr = 0.0, prev_tpr = 0.0;
    for (std::size_t i = 0; i < pooled.size(); ++i) {
        if (pooled[i].second == 0) ++fp; else ++tp;
        bool boundary =
            i + 1 == pooled.size() || pooled[i + 1].first != pooled[i].first;
        if (!boundary) continue;
        double fpr = fp / n0;
        double tpr = tp / n1;
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        roc.points.emplace_back(fpr, tpr);
        prev_fpr = fpr;
        prev_tpr = tpr;
    }
    roc.auc = auc;
    return roc;
}

// ---------------------------------------------------------------------------
// Detectors as reusable scoring engines
// ---------------------------------------------------------------------------

enum class DetectorKind { Glrt, GlrtGeneral, PluginGlrt, Cusum };

struct DetectorSpec {
    DetectorKind kind = DetectorKind::Glrt;
    EstimatorChoice estimator; // plugin-glrt only
    std::optional<double> f0_hint; // cusum, increasing domain only

    std::string name() const {
        switch (kind) {
            case DetectorKind::Glrt: return "glrt";
            case DetectorKind::GlrtGeneral: return "glrt-general";
            case DetectorKind::PluginGlrt: return "plugin-glrt";
            case DetectorKind::Cusum: return "cusum";
        }
        return "?";
    }
};

inline DetectorKind parse_detector(const std::string& name) {
    if (name == "glrt") return DetectorKind::Glrt;
    if (name == "glrt-general") return DetectorKind::GlrtGeneral;
    if (name == "plugin-glrt") return DetectorKind::PluginGlrt;
    if (name == "cusum") return DetectorKind::Cusum;
    throw std::invalid_argument("unknown detector: " + name);
}

/// Per-experiment scorer. Known-covariance detectors factor Sigma once;
/// the plug-in detector keeps per-rho scan state (the GLRT score under
/// sigma^2 C(rho) is the unit-variance score divided by sigma^2, so only the
/// fitted rho selects a factorization). Thread-safe for concurrent score().
class ScoreEngine {
public:
    ScoreEngine(const KernelSpec& spec, const ChangeWindow& window, double delta,
                DetectorSpec detector)
        : spec_(spec), window_(window), delta_(delta), detector_(std::move(detector)) {
        switch (detector_.kind) {
            case DetectorKind::Glrt:
            case DetectorKind::GlrtGeneral:
                cov_ = std::make_shared<CovOperator>(build_cov(spec_));
                scan_ = std::make_shared<GlrtScan>(*cov_, window_);
                break;
            case DetectorKind::Cusum:
                break;
            case DetectorKind::PluginGlrt:
                init_plugin();
                break;
        }
    }

    const DetectorSpec& detector() const noexcept { return detector_; }

    double score(std::span<const double> x) const { return detect(x).statistic; }

    DetectionResult detect(std::span<const double> x) const {
        switch (detector_.kind) {
            case DetectorKind::Glrt:
                return scan_->score(x, delta_);
            case DetectorKind::GlrtGeneral:
                return scan_->score_general(x, delta_);
            case DetectorKind::Cusum:
                return cusum(x, window_, delta_, spec_.domain.kind, detector_.f0_hint);
            case DetectorKind::PluginGlrt:
                return detect_plugin(x);
        }
        throw std::logic_error("unreachable");
    }

private:
    struct FullState {
        CovOperator cov;
        GlrtScan scan; // binds to the member above; FullState never moves

        FullState(CovOperator c, const ChangeWindow& w)
            : cov(std::move(c)), scan(cov, w) {}
    };

    struct RhoState {
        double rho = 0.0;
        std::unique_ptr<CovOperator> burn_corr; // unit-variance prefix block
        // full-size unit-variance operator + scan, built on first use
        mutable std::shared_ptr<const FullState> full;
    };

    void init_plugin() {
        int m = static_cast<int>(std::floor(window_.alpha * window_.n + 1e-9));
        if (m < 10)
            throw std::invalid_argument("plugin-glrt: burn-in needs at least 10 samples");
        burn_m_ = m;
        const auto& est = detector_.estimator;
        if (est.kind == EstimatorChoice::Kind::Oracle) {
            KernelSpec fitted = spec_;
            fitted.sigma = est.oracle_sigma;
            fitted.rho = est.oracle_rho;
            validate(fitted);
            cov_ = std::make_shared<CovOperator>(build_cov(fitted));
            scan_ = std::make_shared<GlrtScan>(*cov_, window_);
            return;
        }
        std::vector<double> rhos = est.kind == EstimatorChoice::Kind::FixedRho
                                       ? std::vector<double>{est.rho_fixed}
                                       : est.rho_grid;
        sigmas_ = est.sigma_grid;
        std::sort(sigmas_.begin(), sigmas_.end());
        std::sort(rhos.begin(), rhos.end());
        for (double rho : rhos) {
            KernelSpec unit = spec_;
            unit.sigma = 1.0;
            unit.rho = rho;
            RhoState st;
            st.rho = rho;
            try {
                st.burn_corr = std::make_unique<CovOperator>(
                    CovOperator::from_spec_prefix(unit, burn_m_));
            } catch (const conditioning_error&) {
                st.burn_corr = nullptr;
            }
            rho_states_.push_back(std::move(st));
        }
    }

    const FullState& full_state(const RhoState& st) const {
        {
            std::lock_guard<std::mutex> lock(cache_mutex_);
            if (st.full) return *st.full;
        }
        KernelSpec unit = spec_;
        unit.sigma = 1.0;
        unit.rho = st.rho;
        auto built = std::make_shared<const FullState>(build_cov(unit), window_);
        std::lock_guard<std::mutex> lock(cache_mutex_);
        if (!st.full) st.full = std::move(built);
        return *st.full;
    }

    DetectionResult detect_plugin(std::span<const double> x) const {
        if (scan_) { // oracle estimator
            return scan_->score(x, delta_);
        }
        auto burn = x.subspan(0, static_cast<std::size_t>(burn_m_));
        const auto& est = detector_.estimator;

        double best_ll = 0.0;
        double best_sigma = 0.0;
        const RhoState* best_rho = nullptr;
        if (est.kind == EstimatorChoice::Kind::FixedRho) {
            const RhoState& st = rho_states_.front();
            if (!st.burn_corr)
                throw estimation_error("plugin-glrt: burn-in block failed to factor");
            double sigma2 = st.burn_corr->quad_form(burn) / burn_m_;
            if (!(sigma2 > 0))
                throw estimation_error("plugin-glrt: degenerate fit (sigma_hat = 0)");
            best_sigma = std::sqrt(sigma2);
            best_rho = &st;
        } else {
            constexpr double log2pi = 1.8378770664093454836;
            std::vector<double> quads(rho_states_.size());
            for (std::size_t i = 0; i < rho_states_.size(); ++i)
                quads[i] = rho_states_[i].burn_corr
                               ? rho_states_[i].burn_corr->quad_form(burn)
                               : 0.0;
            bool found = false;
            for (double sigma : sigmas_) {
                for (std::size_t i = 0; i < rho_states_.size(); ++i) {
                    if (!rho_states_[i].burn_corr) continue;
                    double ll = -0.5 * (burn_m_ * log2pi +
                                        2.0 * burn_m_ * std::log(sigma) +
                                        rho_states_[i].burn_corr->log_det() +
                                        quads[i] / (sigma * sigma));
                    if (!found || ll > best_ll) {
                        found = true;
                        best_ll = ll;
                        best_sigma = sigma;
                        best_rho = &rho_states_[i];
                    }
                }
            }
            if (!found)
                throw estimation_error("plugin-glrt: every grid point failed to factor");
        }

        const FullState& state = full_state(*best_rho);
        DetectionResult res = state.scan.score(x, delta_);
        double s2 = best_sigma * best_sigma;
        res.statistic /= s2;
        for (double& v : res.per_t_scores) v /= s2;
        res.reject = res.statistic >= res.threshold;
        return res;
    }

    KernelSpec spec_;
    ChangeWindow window_;
    double delta_;
    DetectorSpec detector_;

    std::shared_ptr<CovOperator> cov_;
    std::shared_ptr<GlrtScan> scan_;

    // plug-in state
    int burn_m_ = 0;
    std::vector<double> sigmas_;
    std::vector<RhoState> rho_states_;
    mutable std::mutex cache_mutex_;
};

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

struct AucSummary {
    double mean_auc = 0.0;
    double stderr_auc = 0.0;
    std::vector<double> per_rep;
};

namespace detail {

inline AucSummary summarize(std::vector<double> per_rep) {
    AucSummary s;
    s.per_rep = std::move(per_rep);
    double mean = 0.0;
    for (double a : s.per_rep) mean += a;
    mean /= static_cast<double>(s.per_rep.size());
    s.mean_auc = mean;
    if (s.per_rep.size() > 1) {
        double ss = 0.0;
        for (double a : s.per_rep) ss += (a - mean) * (a - mean);
        s.stderr_auc = std::sqrt(ss / (static_cast<double>(s.per_rep.size()) - 1.0) /
                                 static_cast<double>(s.per_rep.size()));
    }
    return s;
}

template <typename Fn>
void parallel_reps(int t2, Fn&& body) {
    unsigned hw = std::thread::hardware_concurrency();
    int n_threads = std::max(1, std::min<int>(t2, hw == 0 ? 1 : static_cast<int>(hw)));
    if (n_threads == 1) {
        for (int r = 0; r < t2; ++r) body(r);
        return;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_threads));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int tid = 0; tid < n_threads; ++tid)
        pool.emplace_back([&, tid] {
            try {
                for (int r = tid; r < t2; r += n_threads) body(r);
            } catch (...) {
                errors[static_cast<std::size_t>(tid)] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace detail

/// T2 repetitions of T1 labeled trials; every detector scores the same draws
/// (the raw statistic, not the thresholded decision). Order-independent and
/// bit-reproducible for a fixed seed.
inline std::vector<AucSummary> run_auc_experiment_multi(
    const TrialConfig& cfg, std::span<const DetectorSpec> detectors) {
    validate(cfg);
    if (detectors.empty())
        throw std::invalid_argument("auc: need at least one detector");
    ChangeWindow window = ChangeWindow::make(cfg.n, cfg.alpha);
    CovOperator sample_cov = build_cov(cfg.spec);
    std::vector<std::unique_ptr<ScoreEngine>> engines;
    for (const auto& d : detectors)
        engines.push_back(std::make_unique<ScoreEngine>(cfg.spec, window, 0.05, d));

    std::vector<std::vector<double>> per_rep(detectors.size(),
                                             std::vector<double>(cfg.t2));
    detail::parallel_reps(cfg.t2, [&](int rep) {
        std::mt19937_64 rng(stream_seed(cfg.seed, static_cast<std::uint64_t>(rep)));
        std::vector<std::vector<double>> h0(detectors.size()), h1(detectors.size());
        for (int l = 0; l < cfg.t1; ++l) {
            Trial trial = gen_trial(cfg, sample_cov, window, rng);
            for (std::size_t d = 0; d < engines.size(); ++d) {
                double s = engines[d]->score(trial.x);
                (trial.h1 ? h1[d] : h0[d]).push_back(s);
            }
        }
        for (std::size_t d = 0; d < engines.size(); ++d)
            per_rep[d][static_cast<std::size_t>(rep)] = roc_auc(h0[d], h1[d]).auc;
    });

    std::vector<AucSummary> out;
    out.reserve(detectors.size());
    for (auto& v : per_rep) out.push_back(detail::summarize(std::move(v)));
    return out;
}

inline AucSummary run_auc_experiment(const TrialConfig& cfg,
                                     const DetectorSpec& detector) {
    return run_auc_experiment_multi(cfg, std::span<const DetectorSpec>(&detector, 1))
        .front();
}

/// Empirical H0 rejection rate at the detector's own threshold.
inline double run_calibration(const KernelSpec& spec, const DetectorSpec& detector,
                              double alpha, double delta, int trials,
                              std::uint64_t seed) {
    validate(spec);
    if (trials < 1) throw std::invalid_argument("calibrate: trials must be >= 1");
    int n = spec.domain.n;
    ChangeWindow window = ChangeWindow::make(n, alpha);
    CovOperator sample_cov = build_cov(spec);
    ScoreEngine engine(spec, window, delta, detector);

    int chunk = 64;
    int n_chunks = (trials + chunk - 1) / chunk;
    std::vector<int> rejected(static_cast<std::size_t>(n_chunks), 0);
    detail::parallel_reps(n_chunks, [&](int c) {
        std::mt19937_64 rng(stream_seed(seed, static_cast<std::uint64_t>(c)));
        std::normal_distribution<double> normal;
        int count = std::min(chunk, trials - c * chunk);
        for (int i = 0; i < count; ++i) {
            std::vector<double> z(static_cast<std::size_t>(n));
            for (double& v : z) v = normal(rng);
            std::vector<double> x = sample_cov.sample_chol(z);
            if (engine.detect(x).reject) ++rejected[static_cast<std::size_t>(c)];
        }
    });
    int total = 0;
    for (int r : rejected) total += r;
    return static_cast<double>(total) / trials;
}

// ---------------------------------------------------------------------------
// Rate curves: minimal detectable jump vs n
// ---------------------------------------------------------------------------

struct RatePoint {
    int n = 0;
    double b_min = 0.0;
    bool saturated = false;
};

/// Smallest b reaching the target mean AUC, by bisection in log b over
/// [0.01, 10] (8 iterations). Every AUC evaluation reuses the same seed, so
/// the search sees a common-random-numbers response curve.
inline std::vector<RatePoint> rate_curve(const KernelSpec& family,
                                         const DetectorSpec& detector,
                                         std::span<const int> n_list,
                                         double target_auc, double alpha,
                                         int t1, int t2, std::uint64_t seed) {
    if (!(target_auc > 0.5 && target_auc < 1.0))
        throw std::invalid_argument("rate_curve: target_auc must be in (0.5, 1)");
    for (std::size_t i = 1; i < n_list.size(); ++i)
        if (n_list[i] <= n_list[i - 1])
            throw std::invalid_argument("rate_curve: n_list must be ascending");

    std::vector<RatePoint> out;
    for (int n : n_list) {
        TrialConfig cfg;
        cfg.spec = family;
        cfg.spec.domain.n = n;
        cfg.n = n;
        cfg.alpha = alpha;
        cfg.t1 = t1;
        cfg.t2 = t2;
        cfg.seed = seed;
        auto auc_at = [&](double b) {
            cfg.b = b;
            return run_auc_experiment(cfg, detector).mean_auc;
        };
        double lo = 0.01, hi = 10.0;
        RatePoint pt;
        pt.n = n;
        if (auc_at(hi) < target_auc) {
            pt.b_min = hi;
            pt.saturated = true;
        } else if (auc_at(lo) >= target_auc) {
            pt.b_min = lo;
            pt.saturated = true;
        } else {
            for (int it = 0; it < 8; ++it) {
                double mid = std::sqrt(lo * hi);
                (auc_at(mid) >= target_auc ? hi : lo) = mid;
            }
            pt.b_min = hi;
        }
        out.push_back(pt);
    }
    return out;
}

/// Least-squares slope of log(b_min) against log(n).
inline double fit_loglog_slope(std::span<const RatePoint> pts) {
    if (pts.size() < 2) throw std::invalid_argument("slope: need >= 2 points");
    double mx = 0.0, my = 0.0;
    for (const auto& p : pts) {
        mx += std::log(static_cast<double>(p.n));
        my += std::log(p.b_min);
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double sxy = 0.0, sxx = 0.0;
    for (const auto& p : pts) {
        double dx = std::log(static_cast<double>(p.n)) - mx;
        sxy += dx * (std::log(p.b_min) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

// ---------------------------------------------------------------------------
// CSV emission (atomic write, full float precision)
// ---------------------------------------------------------------------------

struct AucRow {
    std::string detector;
    KernelSpec spec;
    double b = 0.0;
    double alpha = 0.0;
    double mean_auc = 0.0;
    double stderr_auc = 0.0;
};

struct RateRow {
    std::string detector;
    KernelSpec spec;
    RatePoint point;
};

namespace detail {

inline std::string fmt_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_atomic(const std::filesystem::path& path,
                         const std::string& contents) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << contents;
    }
    std::filesystem::rename(tmp, path);
}

} // namespace detail

inline void write_auc_csv(const std::filesystem::path& path,
                          std::span<const AucRow> rows) {
    std::string s = "detector,family,nu_or_beta,sigma,rho,n,alpha,b,mean_auc,stderr\n";
    for (const auto& r : rows) {
        s += r.detector;
        s += ',';
        s += family_name(r.spec.family);
        s += ',';
        s += detail::fmt_full(r.spec.shape);
        s += ',';
        s += detail::fmt_full(r.spec.sigma);
        s += ',';
        s += detail::fmt_full(r.spec.rho);
        s += ',';
        s += std::to_string(r.spec.domain.n);
        s += ',';
        s += detail::fmt_full(r.alpha);
        s += ',';
        s += detail::fmt_full(r.b);
        s += ',';
        s += detail::fmt_full(r.mean_auc);
        s += ',';
        s += detail::fmt_full(r.stderr_auc);
        s += '\n';
    }
    detail::write_atomic(path, s);
}

inline void write_rate_csv(const std::filesystem::path& path,
                           std::span<const RateRow> rows) {
    std::string s = "detector,family,shape,n,b_min,saturated\n";
    for (const auto& r : rows) {
        s += r.detector;
        s += ',';
        s += family_name(r.spec.family);
        s += ',';
        s += detail::fmt_full(r.spec.shape);
        s += ',';
        s += std::to_string(r.point.n);
        s += ',';
        s += detail::fmt_full(r.point.b_min);
        s += ',';
        s += r.point.saturated ? "1" : "0";
        s += '\n';
    }
    detail::write_atomic(path, s);
}

} // namespace gpshift
