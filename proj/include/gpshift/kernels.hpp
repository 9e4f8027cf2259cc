#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "gpshift/common.hpp"
#include "gpshift/numeric.hpp"

namespace gpshift {

enum class Family {
    Matern,
    PoweredExponential,
    SquaredExponential,
    Triangular,
    ExpToeplitz,
    PolyToeplitz,
    White, // nugget kernel, sigma^2 * 1(r == 0); valid in both domains
};

enum class DomainKind { Fixed, Increasing };

/// Sampling layout: Fixed = n regular samples of [0,1] (lags r/n),
/// Increasing = unit-spaced samples 1..n (integer lags).
struct Domain {
    DomainKind kind = DomainKind::Fixed;
    int n = 0;

    static Domain fixed(int n) { return {DomainKind::Fixed, n}; }
    static Domain increasing(int n) { return {DomainKind::Increasing, n}; }
};

/// Stationary covariance family with scale sigma (stddev), range rho and a
/// family-specific shape parameter (nu for Matern, beta for powered
/// exponential, lambda for PolyToeplitz; ignored otherwise).
struct KernelSpec {
    Family family = Family::Matern;
    double sigma = 1.0;
    double rho = 1.0;
    double shape = 0.0;
    Domain domain;
};

inline const char* family_name(Family f) {
    switch (f) {
        case Family::Matern: return "matern";
        case Family::PoweredExponential: return "powexp";
        case Family::SquaredExponential: return "sqexp";
        case Family::Triangular: return "triangular";
        case Family::ExpToeplitz: return "exptoeplitz";
        case Family::PolyToeplitz: return "polytoeplitz";
        case Family::White: return "white";
    }
    return "?";
}

inline Family parse_family(const std::string& name) {
    if (name == "matern") return Family::Matern;
    if (name == "powexp") return Family::PoweredExponential;
    if (name == "sqexp" || name == "gaussian") return Family::SquaredExponential;
    if (name == "triangular") return Family::Triangular;
    if (name == "exptoeplitz") return Family::ExpToeplitz;
    if (name == "polytoeplitz") return Family::PolyToeplitz;
    if (name == "white") return Family::White;
    throw std::invalid_argument("unknown kernel family: " + name);
}

inline bool has_shape(Family f) {
    return f == Family::Matern || f == Family::PoweredExponential ||
           f == Family::PolyToeplitz;
}

inline void validate(const KernelSpec& spec) {
    if (!(spec.sigma > 0) || !std::isfinite(spec.sigma))
        throw std::invalid_argument("kernel: sigma must be > 0");
    if (spec.family != Family::White &&
        (!(spec.rho > 0) || !std::isfinite(spec.rho)))
        throw std::invalid_argument("kernel: rho must be > 0");
    switch (spec.family) {
        case Family::Matern:
            if (!(spec.shape > 0)) throw std::invalid_argument("matern: nu must be > 0");
            break;
        case Family::PoweredExponential:
            if (!(spec.shape > 0 && spec.shape < 2))
                throw std::invalid_argument("powexp: beta must be in (0,2)");
            break;
        case Family::PolyToeplitz:
            if (!(spec.shape > 0))
                throw std::invalid_argument("polytoeplitz: lambda must be > 0");
            break;
        default:
            break;
    }
    if (spec.domain.n < 1) throw std::invalid_argument("kernel: domain n must be >= 1");
    bool toeplitz_only =
        spec.family == Family::ExpToeplitz || spec.family == Family::PolyToeplitz;
    if (spec.domain.kind == DomainKind::Fixed && toeplitz_only)
        throw std::invalid_argument(
            "kernel: Toeplitz families are increasing-domain only");
}

inline KernelSpec make_kernel(Family family, double sigma, double rho,
                              double shape, Domain domain) {
    KernelSpec spec{family, sigma, rho, shape, domain};
    validate(spec);
    return spec;
}

namespace detail {

// Matern correlation M_nu(x) with K(r) = sigma^2 M_nu(|r|/rho). This is the
// inverse transform (with the 1/(2pi) Bochner factor) of the spectral density
// sqrt(4 pi) Gamma(nu+1/2)/Gamma(nu) rho^{-2nu} (1/rho^2 + w^2)^{-(nu+1/2)},
// so M_nu(0) = 1 exactly and nu = 1/2 reduces to exp(-x).
inline double matern_corr(double nu, double x) {
    if (x <= 0) return 1.0;
    if (nu == 0.5) return std::exp(-x);
    if (nu == 1.5) return (1.0 + x) * std::exp(-x);
    if (nu == 2.5) return (1.0 + x + x * x / 3.0) * std::exp(-x);
    if (x > 705.0) return 0.0; // exp underflow region
    double bessel = std::cyl_bessel_k(nu, x);
    if (!std::isfinite(bessel)) return x < 1e-8 ? 1.0 : 0.0;
    return std::pow(2.0, 1.0 - nu) / std::tgamma(nu) * std::pow(x, nu) * bessel;
}

} // namespace detail

/// Covariance K(lag); symmetric, K(0) = sigma^2 for every family.
inline double eval_cov(const KernelSpec& spec, double lag) {
    validate(spec);
    if (!std::isfinite(lag)) throw std::invalid_argument("eval_cov: lag must be finite");
    double r = std::abs(lag);
    double s2 = spec.sigma * spec.sigma;
    switch (spec.family) {
        case Family::Matern:
            return s2 * detail::matern_corr(spec.shape, r / spec.rho);
        case Family::PoweredExponential:
            return s2 * std::exp(-std::pow(r / spec.rho, spec.shape));
        case Family::SquaredExponential: {
            double u = r / spec.rho;
            return s2 * std::exp(-0.5 * u * u);
        }
        case Family::Triangular:
            return s2 * std::max(0.0, 1.0 - r / spec.rho);
        case Family::ExpToeplitz:
            return s2 * std::exp(-r / spec.rho);
        case Family::PolyToeplitz:
            return s2 * std::pow(1.0 + r / spec.rho, -(1.0 + spec.shape));
        case Family::White:
            return r == 0.0 ? s2 : 0.0;
    }
    return 0.0;
}

/// Spectral density K_hat(omega) on R, convention K_hat = int K(r) e^{-j w r} dr.
/// Defined for the continuous-lag families only.
inline double eval_spectral(const KernelSpec& spec, double omega) {
    validate(spec);
    double s2 = spec.sigma * spec.sigma;
    double rho = spec.rho;
    switch (spec.family) {
        case Family::Matern: {
            double nu = spec.shape;
            double c = std::sqrt(4.0 * M_PI) * std::tgamma(nu + 0.5) /
                       std::tgamma(nu) * s2 * std::pow(rho, -2.0 * nu);
            return c * std::pow(1.0 / (rho * rho) + omega * omega, -(nu + 0.5));
        }
        case Family::PoweredExponential: {
            double beta = spec.shape;
            if (beta == 1.0) // exponential kernel, closed form
                return 2.0 * s2 * rho / (1.0 + rho * rho * omega * omega);
            auto k = [&](double r) { return std::exp(-std::pow(r / rho, beta)); };
            return 2.0 * s2 * cosine_transform(k, omega, rho);
        }
        case Family::SquaredExponential: {
            double u = rho * omega;
            return rho * s2 * std::sqrt(2.0 * M_PI) * std::exp(-0.5 * u * u);
        }
        case Family::Triangular: {
            double s = sinc(rho * omega / 2.0);
            return rho * s2 / 2.0 * s * s;
        }
        default:
            throw unsupported_operation(
                "eval_spectral: no spectral density on R for family " +
                std::string(family_name(spec.family)) +
                " (see toeplitz_generator_at)");
    }
}

/// Autocovariance sequence f_0..f_{n-1} at integer lags (increasing domain).
inline std::vector<double> toeplitz_cov_seq(const KernelSpec& spec, int n) {
    validate(spec);
    if (spec.domain.kind != DomainKind::Increasing)
        throw unsupported_operation("toeplitz_cov_seq: requires an increasing-domain spec");
    if (n < 1) throw std::invalid_argument("toeplitz_cov_seq: n must be >= 1");
    std::vector<double> f(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) f[static_cast<std::size_t>(k)] = eval_cov(spec, k);
    return f;
}

/// Toeplitz generator f(omega) = sum_m f_m e^{-j m omega} on [-pi, pi].
/// Closed form for ExpToeplitz/White; otherwise a truncated Fourier series
/// with an integral tail correction at omega = 0 (where the slowly decaying
/// PolyToeplitz sequence needs it; f(0) is the long-run variance).
inline double toeplitz_generator_at(const KernelSpec& spec, double omega) {
    validate(spec);
    if (spec.domain.kind != DomainKind::Increasing)
        throw unsupported_operation("toeplitz_generator_at: requires an increasing-domain spec");
    double s2 = spec.sigma * spec.sigma;
    if (spec.family == Family::White) return s2;
    if (spec.family == Family::ExpToeplitz) {
        double a = std::exp(-1.0 / spec.rho);
        return s2 * (1.0 - a * a) / (1.0 - 2.0 * a * std::cos(omega) + a * a);
    }
    const int cap = 2'000'000;
    double acc = eval_cov(spec, 0.0);
    int m = 1;
    for (; m <= cap; ++m) {
        double fm = eval_cov(spec, m);
        acc += 2.0 * fm * std::cos(m * omega);
        if (std::abs(fm) < 1e-14 * s2) return acc;
    }
    if (spec.family == Family::PolyToeplitz && omega == 0.0) {
        // Euler-Maclaurin midpoint tail: sum_{k>m} (1+k/rho)^{-(1+lambda)}
        double lam = spec.shape;
        acc += 2.0 * s2 * spec.rho / lam *
               std::pow(1.0 + (m + 0.5) / spec.rho, -lam);
    }
    return acc;
}

} // namespace gpshift
