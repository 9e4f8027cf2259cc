#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace gpshift {

/// Unnormalized sinc: sin(x)/x with sinc(0) = 1.
inline double sinc(double x) {
    double ax = std::abs(x);
    if (ax < 1e-4) {
        double x2 = x * x;
        return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
    }
    return std::sin(x) / x;
}

namespace detail {

// 7-point Gauss-Legendre nodes/weights on [-1, 1].
inline constexpr double kGl7Nodes[7] = {
    -0.9491079123427585, -0.7415311855993945, -0.4058451513773972,
    0.0,
    0.4058451513773972, 0.7415311855993945, 0.9491079123427585};
inline constexpr double kGl7Weights[7] = {
    0.1294849661688697, 0.2797053914892766, 0.3818300505051189,
    0.4179591836734694,
    0.3818300505051189, 0.2797053914892766, 0.1294849661688697};

template <typename F>
double gauss7(F&& f, double a, double b) {
    double mid = 0.5 * (a + b);
    double half = 0.5 * (b - a);
    double acc = 0.0;
    for (int i = 0; i < 7; ++i)
        acc += kGl7Weights[i] * f(mid + half * kGl7Nodes[i]);
    return acc * half;
}

// [0, b] with panels geometrically refined toward 0, for integrands whose
// higher derivatives blow up at the origin (powered-exponential kernels).
template <typename F>
double gauss7_graded(F&& f, double b) {
    double acc = 0.0;
    double hi = b;
    for (int j = 0; j < 48 && hi > 0.0; ++j) {
        double lo = j == 47 ? 0.0 : hi * 0.5;
        acc += gauss7(f, lo, hi);
        hi = lo;
    }
    return acc;
}

} // namespace detail

/// Cosine transform I(omega) = integral_0^inf f(r) cos(omega r) dr for a
/// nonnegative decaying envelope f. For omega > 0 the integral is summed over
/// half-periods of the cosine; the alternating tail is accelerated by
/// iterated averaging of the partial sums, which handles slowly decaying
/// envelopes (powered-exponential with small beta) without a huge cutoff.
template <typename F>
double cosine_transform(F&& f, double omega, double tail_scale = 1.0,
                        double tol = 1e-12) {
    omega = std::abs(omega);
    if (omega < 1e-12) {
        // No oscillation: panel integration until the envelope dies off.
        double h = tail_scale;
        double total = detail::gauss7_graded(f, h);
        double a = h;
        for (int k = 0; k < 100000; ++k) {
            double piece = detail::gauss7(f, a, a + h);
            total += piece;
            a += h;
            if (k > 4 && std::abs(piece) < tol * (std::abs(total) + tol)) break;
        }
        return total;
    }

    const double half = M_PI / omega;
    // Subpanels fine enough for the envelope, not just the oscillation.
    int nsub = 1;
    if (half > tail_scale / 8.0)
        nsub = static_cast<int>(std::min(4096.0, std::ceil(half / (tail_scale / 8.0))));
    const std::size_t max_panels = 400000;
    const std::size_t window = 48; // partial sums kept for averaging
    std::vector<double> partial;
    partial.reserve(window);
    double sum = 0.0;
    double prev_extrap = 0.0;
    auto g = [&](double r) { return f(r) * std::cos(omega * r); };
    for (std::size_t k = 0; k < max_panels; ++k) {
        double a = static_cast<double>(k) * half;
        double block = 0.0;
        double step = half / nsub;
        for (int s = 0; s < nsub; ++s) {
            if (k == 0 && s == 0)
                block += detail::gauss7_graded(g, step);
            else
                block += detail::gauss7(g, a + s * step, a + (s + 1) * step);
        }
        sum += block;
        if (partial.size() == window) partial.erase(partial.begin());
        partial.push_back(sum);
        if (k + 1 >= window && (k % 16 == 15)) {
            // Iterated mean of the trailing partial sums: each averaging
            // level kills one order of the alternating remainder.
            std::vector<double> row = partial;
            while (row.size() > 1) {
                for (std::size_t i = 0; i + 1 < row.size(); ++i)
                    row[i] = 0.5 * (row[i] + row[i + 1]);
                row.pop_back();
            }
            double extrap = row[0];
            if (k + 1 > window &&
                std::abs(extrap - prev_extrap) < tol * (std::abs(extrap) + tol))
                return extrap;
            prev_extrap = extrap;
        }
    }
    return prev_extrap;
}

} // namespace gpshift
