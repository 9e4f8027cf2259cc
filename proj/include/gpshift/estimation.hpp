#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "gpshift/common.hpp"
#include "gpshift/covariance.hpp"
#include "gpshift/kernels.hpp"

namespace gpshift {

struct FitResult {
    double sigma_hat = 0.0;
    double rho_hat = 0.0;
    double loglik = 0.0;
    /// sigma_hat * rho_hat^{-nu} for Matern (the combination that stays
    /// estimable under infill sampling); sigma_hat for other families.
    double microergodic = 0.0;
};

struct EstimatorChoice {
    enum class Kind { GridMle, FixedRho, Oracle };

    Kind kind = Kind::Oracle;
    std::vector<double> sigma_grid;
    std::vector<double> rho_grid;
    double rho_fixed = 0.0;
    double oracle_sigma = 0.0;
    double oracle_rho = 0.0;

    static EstimatorChoice grid_mle(std::vector<double> sigmas,
                                    std::vector<double> rhos) {
        if (sigmas.empty() || rhos.empty())
            throw std::invalid_argument("estimator: grid must be nonempty");
        for (double s : sigmas)
            if (!(s > 0)) throw std::invalid_argument("estimator: grid sigmas must be > 0");
        for (double r : rhos)
            if (!(r > 0)) throw std::invalid_argument("estimator: grid rhos must be > 0");
        EstimatorChoice e;
        e.kind = Kind::GridMle;
        e.sigma_grid = std::move(sigmas);
        e.rho_grid = std::move(rhos);
        return e;
    }

    static EstimatorChoice fixed_rho(double rho) {
        if (!(rho > 0)) throw std::invalid_argument("estimator: rho_fixed must be > 0");
        EstimatorChoice e;
        e.kind = Kind::FixedRho;
        e.rho_fixed = rho;
        return e;
    }

    static EstimatorChoice oracle(double sigma, double rho) {
        EstimatorChoice e;
        e.kind = Kind::Oracle;
        e.oracle_sigma = sigma;
        e.oracle_rho = rho;
        return e;
    }
};

/// sigma ladder {0.2, 0.4, ..., 2.0}.
inline std::vector<double> default_sigma_grid() {
    std::vector<double> g;
    for (int i = 1; i <= 10; ++i) g.push_back(0.2 * i);
    return g;
}

/// rho ladder {1/4.0, 1/3.9, ..., 1/0.1}, ascending (40 values).
inline std::vector<double> default_rho_grid() {
    std::vector<double> g;
    for (int i = 0; i < 40; ++i) g.push_back(1.0 / (4.0 - 0.1 * i));
    return g;
}

inline double microergodic_of(const KernelSpec& spec, double sigma, double rho) {
    if (spec.family == Family::Matern) return sigma * std::pow(rho, -spec.shape);
    return sigma;
}

/// Zero-mean Gaussian log-likelihood of a burn-in prefix. The prefix sits on
/// the spec's original grid, so fixed-domain lags keep the full-sample n.
inline double gaussian_loglik(std::span<const double> x_burn,
                              const KernelSpec& spec) {
    int m = static_cast<int>(x_burn.size());
    if (m < 2) throw std::invalid_argument("gaussian_loglik: need at least 2 samples");
    CovOperator cov = CovOperator::from_spec_prefix(spec, m);
    constexpr double log2pi = 1.8378770664093454836;
    return -0.5 * (m * log2pi + cov.log_det() + cov.quad_form(x_burn));
}

namespace detail {

struct RhoProfile {
    double rho;
    double log_det_corr; // log det of the unit-variance correlation block
    double quad_corr;    // x^T C(rho)^{-1} x
};

inline RhoProfile profile_rho(std::span<const double> x_burn,
                              const KernelSpec& base, double rho) {
    KernelSpec unit = base;
    unit.sigma = 1.0;
    unit.rho = rho;
    CovOperator corr = CovOperator::from_spec_prefix(unit, static_cast<int>(x_burn.size()));
    return {rho, corr.log_det(), corr.quad_form(x_burn)};
}

// loglik at (sigma, rho) assembled from the unit-variance profile:
// log det(sigma^2 C) = m log sigma^2 + log det C, quad form scales by 1/sigma^2.
inline double loglik_from_profile(const RhoProfile& p, double sigma, int m) {
    constexpr double log2pi = 1.8378770664093454836;
    return -0.5 * (m * log2pi + 2.0 * m * std::log(sigma) + p.log_det_corr +
                   p.quad_corr / (sigma * sigma));
}

} // namespace detail

/// Brute-force grid MLE over (sigma, rho) with the family and shape held
/// fixed. Ties break toward smaller sigma, then smaller rho.
inline FitResult fit_grid_mle(std::span<const double> x_burn,
                              const KernelSpec& base,
                              std::span<const double> sigma_grid,
                              std::span<const double> rho_grid) {
    if (sigma_grid.empty() || rho_grid.empty())
        throw std::invalid_argument("fit_grid_mle: empty grid");
    int m = static_cast<int>(x_burn.size());
    if (m < 2) throw std::invalid_argument("fit_grid_mle: need at least 2 samples");

    std::vector<detail::RhoProfile> profiles;
    profiles.reserve(rho_grid.size());
    int failures = 0;
    for (double rho : rho_grid) {
        try {
            profiles.push_back(detail::profile_rho(x_burn, base, rho));
        } catch (const conditioning_error&) {
            profiles.push_back({rho, std::numeric_limits<double>::quiet_NaN(), 0.0});
            ++failures;
        }
    }
    if (failures == static_cast<int>(rho_grid.size()))
        throw estimation_error("fit_grid_mle: every grid point failed to factor");

    FitResult best;
    double best_ll = -std::numeric_limits<double>::infinity();
    bool found = false;
    std::vector<double> sigmas(sigma_grid.begin(), sigma_grid.end());
    std::sort(sigmas.begin(), sigmas.end());
    for (double sigma : sigmas) {
        for (const auto& p : profiles) {
            if (std::isnan(p.log_det_corr)) continue;
            double ll = detail::loglik_from_profile(p, sigma, m);
            if (!found || ll > best_ll) {
                found = true;
                best_ll = ll;
                best.sigma_hat = sigma;
                best.rho_hat = p.rho;
            }
        }
    }
    best.loglik = best_ll;
    best.microergodic = microergodic_of(base, best.sigma_hat, best.rho_hat);
    return best;
}

/// Profile MLE with the range fixed: sigma_hat^2 = x^T C(rho)^{-1} x / m.
inline FitResult fit_fixed_rho(std::span<const double> x_burn,
                               const KernelSpec& base, double rho_fixed) {
    if (!(rho_fixed > 0)) throw std::invalid_argument("fit_fixed_rho: rho must be > 0");
    int m = static_cast<int>(x_burn.size());
    if (m < 2) throw std::invalid_argument("fit_fixed_rho: need at least 2 samples");
    detail::RhoProfile p = detail::profile_rho(x_burn, base, rho_fixed);
    double sigma2 = p.quad_corr / m;
    if (!(sigma2 > 0))
        throw estimation_error(
            "fit_fixed_rho: degenerate fit (sigma_hat = 0 gives a singular plug-in)");
    FitResult fit;
    fit.sigma_hat = std::sqrt(sigma2);
    fit.rho_hat = rho_fixed;
    fit.loglik = detail::loglik_from_profile(p, fit.sigma_hat, m);
    fit.microergodic = microergodic_of(base, fit.sigma_hat, fit.rho_hat);
    return fit;
}

} // namespace gpshift
