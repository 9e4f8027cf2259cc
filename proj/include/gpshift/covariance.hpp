#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "gpshift/common.hpp"
#include "gpshift/kernels.hpp"

namespace gpshift {

/// Factored n x n symmetric Toeplitz covariance. Stores the generating
/// autocovariance row plus a dense lower Cholesky factor; every contact with
/// Sigma^{-1} goes through triangular solves, no inverse is ever formed.
/// Immutable after construction, safe to share across threads.
class CovOperator {
public:
    static CovOperator from_first_row(std::vector<double> first_row) {
        return CovOperator(std::move(first_row));
    }

    /// Leading m x m block of the covariance the spec induces on its full
    /// grid. Fixed domain: entry (r,s) = K((r-s)/n) with the spec's own n,
    /// so a burn-in prefix keeps the original lag scale.
    static CovOperator from_spec_prefix(const KernelSpec& spec, int m) {
        validate(spec);
        if (m < 2) throw std::invalid_argument("covariance: order must be >= 2");
        if (m > spec.domain.n)
            throw std::invalid_argument("covariance: prefix larger than domain");
        std::vector<double> row(static_cast<std::size_t>(m));
        if (spec.domain.kind == DomainKind::Fixed) {
            double n = spec.domain.n;
            for (int k = 0; k < m; ++k)
                row[static_cast<std::size_t>(k)] = eval_cov(spec, k / n);
        } else {
            row = toeplitz_cov_seq(spec, m);
        }
        return CovOperator(std::move(row));
    }

    int n() const noexcept { return n_; }
    const std::vector<double>& first_row() const noexcept { return first_row_; }
    /// Row-major dense lower factor (upper part zero-filled).
    const std::vector<double>& chol_lower() const noexcept { return chol_; }
    double log_det() const noexcept { return log_det_; }
    bool jittered() const noexcept { return jittered_; }

    /// Sigma v (Toeplitz matvec on the stored row).
    std::vector<double> apply(std::span<const double> v) const {
        check_len(v);
        std::vector<double> out(static_cast<std::size_t>(n_), 0.0);
        for (int i = 0; i < n_; ++i) {
            double acc = 0.0;
            for (int j = 0; j < n_; ++j)
                acc += first_row_[static_cast<std::size_t>(std::abs(i - j))] *
                       v[static_cast<std::size_t>(j)];
            out[static_cast<std::size_t>(i)] = acc;
        }
        return out;
    }

    /// Sigma^{-1} rhs via the two triangular solves.
    std::vector<double> solve(std::span<const double> rhs) const {
        check_len(rhs);
        std::vector<double> y(rhs.begin(), rhs.end());
        solve_in_place(y);
        return y;
    }

    void solve_in_place(std::vector<double>& y) const {
        if (static_cast<int>(y.size()) != n_)
            throw std::invalid_argument("covariance: length mismatch");
        const double* L = chol_.data();
        const std::size_t n = static_cast<std::size_t>(n_);
        for (std::size_t i = 0; i < n; ++i) { // L z = y
            double acc = y[i];
            const double* Li = L + i * n;
            for (std::size_t k = 0; k < i; ++k) acc -= Li[k] * y[k];
            y[i] = acc / Li[i];
        }
        for (std::size_t ii = n; ii-- > 0;) { // L^T x = z
            double acc = y[ii];
            for (std::size_t k = ii + 1; k < n; ++k) acc -= L[k * n + ii] * y[k];
            y[ii] = acc / L[ii * n + ii];
        }
    }

    /// v^T Sigma^{-1} v >= 0 (computed as |L^{-1} v|^2, one forward solve).
    double quad_form(std::span<const double> v) const {
        check_len(v);
        const double* L = chol_.data();
        const std::size_t n = static_cast<std::size_t>(n_);
        std::vector<double> z(v.begin(), v.end());
        double acc_sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double acc = z[i];
            const double* Li = L + i * n;
            for (std::size_t k = 0; k < i; ++k) acc -= Li[k] * z[k];
            z[i] = acc / Li[i];
            acc_sq += z[i] * z[i];
        }
        return acc_sq;
    }

    /// L z: one sample of N(0, Sigma) from a standard normal draw z.
    std::vector<double> sample_chol(std::span<const double> z) const {
        check_len(z);
        const double* L = chol_.data();
        const std::size_t n = static_cast<std::size_t>(n_);
        std::vector<double> x(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            const double* Li = L + i * n;
            for (std::size_t k = 0; k <= i; ++k) acc += Li[k] * z[k];
            x[i] = acc;
        }
        return x;
    }

    /// tau(M, S, S') = 1_S^T M 1_{S'} / sqrt(|S| |S'|) with M = Sigma or
    /// Sigma^{-1}. Index sets are 0-based subsets of {0..n-1}.
    double tau(bool use_inverse, std::span<const int> s,
               std::span<const int> s_prime) const {
        if (s.empty() || s_prime.empty())
            throw std::invalid_argument("tau: index sets must be nonempty");
        std::vector<double> ind(static_cast<std::size_t>(n_), 0.0);
        for (int j : s_prime) {
            if (j < 0 || j >= n_) throw std::invalid_argument("tau: index out of range");
            ind[static_cast<std::size_t>(j)] = 1.0;
        }
        std::vector<double> m1 = use_inverse ? solve(ind) : apply(ind);
        double acc = 0.0;
        for (int i : s) {
            if (i < 0 || i >= n_) throw std::invalid_argument("tau: index out of range");
            acc += m1[static_cast<std::size_t>(i)];
        }
        return acc / std::sqrt(static_cast<double>(s.size()) *
                               static_cast<double>(s_prime.size()));
    }

private:
    explicit CovOperator(std::vector<double> first_row)
        : n_(static_cast<int>(first_row.size())), first_row_(std::move(first_row)) {
        if (n_ < 2) throw std::invalid_argument("covariance: order must be >= 2");
        // Smooth kernels at large n go numerically singular; retry once with
        // a flagged diagonal jitter before giving up.
        int pivot = factor(0.0);
        if (pivot >= 0) {
            jittered_ = true;
            pivot = factor(1e-10 * first_row_[0]);
            if (pivot >= 0)
                throw conditioning_error(
                    "covariance: matrix not positive definite at pivot " +
                        std::to_string(pivot),
                    pivot);
        }
    }

    // Dense lower Cholesky of the Toeplitz realization; returns the failing
    // pivot or -1 on success.
    int factor(double jitter) {
        const std::size_t n = static_cast<std::size_t>(n_);
        chol_.assign(n * n, 0.0);
        double* L = chol_.data();
        log_det_ = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double d = first_row_[0] + jitter;
            const double* Lj = L + j * n;
            for (std::size_t k = 0; k < j; ++k) d -= Lj[k] * Lj[k];
            if (!(d > 0.0) || !std::isfinite(d)) return static_cast<int>(j);
            double ljj = std::sqrt(d);
            L[j * n + j] = ljj;
            log_det_ += 2.0 * std::log(ljj);
            for (std::size_t i = j + 1; i < n; ++i) {
                double acc = first_row_[i - j];
                const double* Li = L + i * n;
                for (std::size_t k = 0; k < j; ++k) acc -= Li[k] * Lj[k];
                L[i * n + j] = acc / ljj;
            }
        }
        return -1;
    }

    void check_len(std::span<const double> v) const {
        if (static_cast<int>(v.size()) != n_)
            throw std::invalid_argument("covariance: length mismatch");
    }

    int n_;
    std::vector<double> first_row_;
    std::vector<double> chol_;
    double log_det_ = 0.0;
    bool jittered_ = false;
};

/// Build and factor Sigma_n from a kernel spec (n taken from the domain).
inline CovOperator build_cov(const KernelSpec& spec) {
    return CovOperator::from_spec_prefix(spec, spec.domain.n);
}

} // namespace gpshift
