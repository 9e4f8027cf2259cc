#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "gpshift/common.hpp"
#include "gpshift/covariance.hpp"
#include "gpshift/estimation.hpp"
#include "gpshift/kernels.hpp"
#include "gpshift/numeric.hpp"

namespace gpshift {

/// Candidate change times: t with t AND n-t beyond the alpha*n margin,
/// realized as the closed integer interval [ceil(alpha n), floor((1-alpha) n)].
/// A change at t means samples 1..t carry the pre-change mean (sign -1).
struct ChangeWindow {
    int n = 0;
    double alpha = 0.0;
    int t_min = 0;
    int t_max = 0;

    static ChangeWindow make(int n, double alpha) {
        if (n < 2) throw std::invalid_argument("window: n must be >= 2");
        if (!(alpha > 0.0 && alpha < 0.5))
            throw std::invalid_argument("window: alpha must be in (0, 1/2)");
        ChangeWindow w;
        w.n = n;
        w.alpha = alpha;
        w.t_min = static_cast<int>(std::ceil(alpha * n - 1e-9));
        w.t_max = static_cast<int>(std::floor((1.0 - alpha) * n + 1e-9));
        if (w.t_min < 1) w.t_min = 1;
        if (w.t_max > n - 1) w.t_max = n - 1;
        if (w.t_min > w.t_max)
            throw std::invalid_argument("window: empty candidate set");
        return w;
    }

    int size() const noexcept { return t_max - t_min + 1; }
};

struct DetectionResult {
    double statistic = 0.0;
    int t_hat = 0;
    double threshold = 0.0;
    bool reject = false;
    double b_hat = 0.0;
    std::vector<double> per_t_scores; // indexed t - t_min
};

/// R_{n,delta} = 1 + 2[log(2n(1-2a)/delta) + sqrt(log(2n(1-2a)/delta))].
inline double threshold_glrt(int n, double alpha, double delta) {
    if (n < 2) throw std::invalid_argument("threshold: n must be >= 2");
    if (!(alpha > 0.0 && alpha < 0.5))
        throw std::invalid_argument("threshold: alpha must be in (0, 1/2)");
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("threshold: delta must be in (0, 1)");
    double lg = std::log(2.0 * n * (1.0 - 2.0 * alpha) / delta);
    if (lg < 0.0) {
        if (lg < -1e-12)
            throw std::invalid_argument("threshold: requires n(1-2 alpha) >= delta/2");
        lg = 0.0;
    }
    return 1.0 + 2.0 * (lg + std::sqrt(lg));
}

/// Critical value for max |U_t|, before the 1/sqrt(n) normalization.
inline double threshold_cusum_raw(int n, double alpha, double delta) {
    return std::sqrt(n * threshold_glrt(n, alpha, delta));
}

/// Squared-normalized CUSUM critical value; identical to the GLRT threshold
/// in both domains (increasing-domain variance inflation is applied by the
/// cusum detector itself through f0_hint).
inline double threshold_cusum(int n, double alpha, double delta,
                              DomainKind /*domain*/ = DomainKind::Fixed) {
    return threshold_glrt(n, alpha, delta);
}

/// Limit of var(U*_t) under a flat spectrum at segment fraction beta:
/// G_beta(w) = [(1-b) sinc(bw/2) - b sinc((1-b)w/2)]^2
///             + 4 b (1-b) sinc(bw/2) sinc((1-b)w/2) sin^2(w/2),
/// so G_beta(0) = (1-2b)^2 and sup_w G_beta <= 1.
inline double gbeta(double omega, double beta) {
    if (!(beta > 0.0 && beta < 1.0))
        throw std::invalid_argument("gbeta: beta must be in (0, 1)");
    double s1 = sinc(beta * omega / 2.0);
    double s2 = sinc((1.0 - beta) * omega / 2.0);
    double d = (1.0 - beta) * s1 - beta * s2;
    double sw = std::sin(omega / 2.0);
    return d * d + 4.0 * beta * (1.0 - beta) * s1 * s2 * sw * sw;
}

/// Shared per-covariance scan state for the GLRT family. Precomputes
/// q_t = zeta_t^T Sigma^{-1} zeta_t over the window (one unit-vector solve
/// per step) plus the all-ones projections needed when the grand mean is
/// unknown, so scoring a series costs one solve and an O(n) sweep.
class GlrtScan {
public:
    GlrtScan(const CovOperator& cov, const ChangeWindow& window)
        : cov_(&cov), window_(window) {
        int n = cov.n();
        if (n != window.n) throw std::invalid_argument("glrt: window/cov size mismatch");

        std::vector<double> ones(static_cast<std::size_t>(n), 1.0);
        std::vector<double> w = cov.solve(ones);
        one_w_ = 0.0;
        for (double v : w) one_w_ += v;
        zeta_w_.resize(static_cast<std::size_t>(window.size()));
        double prefix = 0.0;
        {
            int idx = 0;
            double total = one_w_;
            for (int t = 1; t <= window.t_max; ++t) {
                prefix += w[static_cast<std::size_t>(t - 1)];
                if (t >= window.t_min)
                    zeta_w_[static_cast<std::size_t>(idx++)] = total - 2.0 * prefix;
            }
        }

        // q_{t+1} = q_t - 4 c^T zeta_t + 4 c_t with c = Sigma^{-1} e_t.
        q_.resize(static_cast<std::size_t>(window.size()));
        std::vector<double> zeta = zeta_vec(n, window.t_min);
        std::vector<double> z = cov.solve(zeta);
        double q = 0.0;
        for (int i = 0; i < n; ++i)
            q += zeta[static_cast<std::size_t>(i)] * z[static_cast<std::size_t>(i)];
        q_[0] = q;
        std::vector<double> unit(static_cast<std::size_t>(n), 0.0);
        for (int t = window.t_min + 1; t <= window.t_max; ++t) {
            int flip = t - 1; // 0-based entry that moves to the pre-change side
            unit[static_cast<std::size_t>(flip)] = 1.0;
            std::vector<double> c = cov.solve(unit);
            unit[static_cast<std::size_t>(flip)] = 0.0;
            double dot = 0.0;
            for (int i = 0; i < n; ++i)
                dot += (i < flip ? -1.0 : 1.0) * c[static_cast<std::size_t>(i)];
            q += -4.0 * dot + 4.0 * c[static_cast<std::size_t>(flip)];
            q_[static_cast<std::size_t>(t - window.t_min)] = q;
        }
    }

    const ChangeWindow& window() const noexcept { return window_; }

    /// GLRT with known zero grand mean: max_t (zeta_t^T Y)^2 / q_t.
    DetectionResult score(std::span<const double> x, double delta) const {
        return score_impl(x, delta, false);
    }

    /// General GLRT (mean profiled out): scores use zeta_t - B1(t) 1.
    DetectionResult score_general(std::span<const double> x, double delta) const {
        return score_impl(x, delta, true);
    }

private:
    static std::vector<double> zeta_vec(int n, int t) {
        std::vector<double> z(static_cast<std::size_t>(n), 1.0);
        for (int i = 0; i < t; ++i) z[static_cast<std::size_t>(i)] = -1.0;
        return z;
    }

    DetectionResult score_impl(std::span<const double> x, double delta,
                               bool general) const {
        int n = window_.n;
        if (static_cast<int>(x.size()) != n)
            throw std::invalid_argument("glrt: series length mismatch");
        std::vector<double> y = cov_->solve(x);
        double total_y = 0.0;
        for (double v : y) total_y += v;

        DetectionResult res;
        res.threshold = threshold_glrt(n, window_.alpha, delta);
        res.per_t_scores.resize(static_cast<std::size_t>(window_.size()));

        double prefix = 0.0;
        for (int t = 1; t < window_.t_min; ++t)
            prefix += y[static_cast<std::size_t>(t - 1)];

        double best = -1.0;
        int best_t = window_.t_min;
        double best_num = 0.0, best_den = 1.0;
        for (int t = window_.t_min; t <= window_.t_max; ++t) {
            prefix += y[static_cast<std::size_t>(t - 1)];
            double s = total_y - 2.0 * prefix; // zeta_t^T Y
            std::size_t k = static_cast<std::size_t>(t - window_.t_min);
            double num, den;
            if (general) {
                double b1 = zeta_w_[k] / one_w_;
                den = q_[k] - zeta_w_[k] * zeta_w_[k] / one_w_; // B2(t)
                if (!(den > 0.0))
                    throw std::invalid_argument("glrt: degenerate window (B2 <= 0)");
                num = s - b1 * total_y;
            } else {
                num = s;
                den = q_[k];
            }
            double sc = num * num / den;
            res.per_t_scores[k] = sc;
            if (sc > best) { // ties keep the smallest t
                best = sc;
                best_t = t;
                best_num = num;
                best_den = den;
            }
        }
        res.statistic = best;
        res.t_hat = best_t;
        res.b_hat = 2.0 * best_num / best_den; // inner maximizer over b
        res.reject = res.statistic >= res.threshold;
        return res;
    }

    const CovOperator* cov_;
    ChangeWindow window_;
    std::vector<double> q_;      // zeta_t^T Sigma^{-1} zeta_t
    std::vector<double> zeta_w_; // zeta_t^T Sigma^{-1} 1
    double one_w_ = 0.0;         // 1^T Sigma^{-1} 1
};

inline DetectionResult glrt(std::span<const double> x, const CovOperator& cov,
                            const ChangeWindow& window, double delta) {
    return GlrtScan(cov, window).score(x, delta);
}

inline DetectionResult glrt_general(std::span<const double> x,
                                    const CovOperator& cov,
                                    const ChangeWindow& window, double delta) {
    return GlrtScan(cov, window).score_general(x, delta);
}

/// CUSUM scan. Both domains report the squared-normalized statistic; the
/// fixed domain divides U_t^2 by n (Var U_t grows like n there), the
/// increasing domain compares U_t^2 directly and inflates the threshold by
/// (1 + 0.1) f(0) when a long-run variance hint is supplied.
inline DetectionResult cusum(std::span<const double> x, const ChangeWindow& window,
                             double delta, DomainKind domain,
                             std::optional<double> f0_hint = std::nullopt) {
    int n = window.n;
    if (static_cast<int>(x.size()) != n)
        throw std::invalid_argument("cusum: series length mismatch");

    DetectionResult res;
    res.threshold = threshold_cusum(n, window.alpha, delta, domain);
    if (domain == DomainKind::Increasing && f0_hint)
        res.threshold *= 1.1 * *f0_hint;
    res.per_t_scores.resize(static_cast<std::size_t>(window.size()));

    double total = 0.0;
    for (double v : x) total += v;
    double norm = domain == DomainKind::Fixed ? 1.0 / n : 1.0;

    double prefix = 0.0;
    for (int t = 1; t < window.t_min; ++t) prefix += x[static_cast<std::size_t>(t - 1)];

    double best = -1.0;
    int best_t = window.t_min;
    double best_diff = 0.0;
    for (int t = window.t_min; t <= window.t_max; ++t) {
        prefix += x[static_cast<std::size_t>(t - 1)];
        double diff = (total - prefix) / (n - t) - prefix / t;
        double u = std::sqrt(static_cast<double>(t) * (n - t) / n) * diff;
        double sc = u * u * norm;
        res.per_t_scores[static_cast<std::size_t>(t - window.t_min)] = sc;
        if (sc > best) {
            best = sc;
            best_t = t;
            best_diff = diff;
        }
    }
    res.statistic = best;
    res.t_hat = best_t;
    res.b_hat = best_diff;
    res.reject = res.statistic >= res.threshold;
    return res;
}

struct PluginResult {
    DetectionResult detection;
    FitResult fit;
};

/// Plug-in GLRT: fit (sigma, rho) on the burn-in prefix X_1..X_{floor(alpha n)}
/// only, rebuild the covariance at the fitted parameters, and run the GLRT
/// with the unchanged threshold formula.
inline PluginResult plugin_glrt(std::span<const double> x,
                                const KernelSpec& spec_family,
                                const ChangeWindow& window, double delta,
                                const EstimatorChoice& estimator) {
    validate(spec_family);
    int n = window.n;
    if (static_cast<int>(x.size()) != n)
        throw std::invalid_argument("plugin_glrt: series length mismatch");
    if (spec_family.domain.n != n)
        throw std::invalid_argument("plugin_glrt: spec/window size mismatch");
    int m = static_cast<int>(std::floor(window.alpha * n + 1e-9));
    if (m < 10)
        throw std::invalid_argument("plugin_glrt: burn-in needs at least 10 samples");
    std::span<const double> burn = x.subspan(0, static_cast<std::size_t>(m));

    PluginResult out;
    KernelSpec fitted = spec_family;
    switch (estimator.kind) {
        case EstimatorChoice::Kind::Oracle:
            fitted.sigma = estimator.oracle_sigma;
            fitted.rho = estimator.oracle_rho;
            validate(fitted);
            out.fit.sigma_hat = fitted.sigma;
            out.fit.rho_hat = fitted.rho;
            out.fit.loglik = gaussian_loglik(burn, fitted);
            out.fit.microergodic = microergodic_of(fitted, fitted.sigma, fitted.rho);
            break;
        case EstimatorChoice::Kind::GridMle:
            out.fit = fit_grid_mle(burn, spec_family, estimator.sigma_grid,
                                   estimator.rho_grid);
            fitted.sigma = out.fit.sigma_hat;
            fitted.rho = out.fit.rho_hat;
            break;
        case EstimatorChoice::Kind::FixedRho:
            out.fit = fit_fixed_rho(burn, spec_family, estimator.rho_fixed);
            fitted.sigma = out.fit.sigma_hat;
            fitted.rho = out.fit.rho_hat;
            break;
    }
    CovOperator cov = build_cov(fitted);
    out.detection = glrt(x, cov, window, delta);
    return out;
}

} // namespace gpshift
