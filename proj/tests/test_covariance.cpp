#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "gpshift/covariance.hpp"
#include "gpshift/kernels.hpp"

using namespace gpshift;

namespace {

std::vector<int> range_set(int lo, int hi) { // [lo, hi)
    std::vector<int> s(static_cast<std::size_t>(hi - lo));
    std::iota(s.begin(), s.end(), lo);
    return s;
}

std::vector<double> white_row(int n, double var = 1.0) {
    std::vector<double> r(static_cast<std::size_t>(n), 0.0);
    r[0] = var;
    return r;
}

} // namespace

TEST(BuildCov, FixedDomainLagScaling) {
    auto spec = make_kernel(Family::PoweredExponential, 1.0, 0.5, 1.0, Domain::fixed(3));
    CovOperator cov = build_cov(spec);
    ASSERT_EQ(cov.n(), 3);
    EXPECT_DOUBLE_EQ(cov.first_row()[0], 1.0);
    EXPECT_NEAR(cov.first_row()[1], std::exp(-2.0 / 3.0), 1e-15);
    EXPECT_NEAR(cov.first_row()[2], std::exp(-4.0 / 3.0), 1e-15);
}

TEST(BuildCov, ExpToeplitzLogDet) {
    auto spec = make_kernel(Family::ExpToeplitz, 1.0, 2.0, 0.0, Domain::increasing(2));
    CovOperator cov = build_cov(spec);
    double a = std::exp(-0.5);
    EXPECT_NEAR(cov.first_row()[1], a, 1e-15);
    EXPECT_NEAR(cov.log_det(), std::log(1.0 - a * a), 1e-12);
}

TEST(BuildCov, RejectsOrderOne) {
    auto spec = make_kernel(Family::ExpToeplitz, 1.0, 2.0, 0.0, Domain::increasing(1));
    EXPECT_THROW(build_cov(spec), std::invalid_argument);
}

TEST(BuildCov, EveryFamilyFactorsAtDeskScale) {
    std::vector<KernelSpec> specs = {
        make_kernel(Family::Matern, 1.0, 0.5, 0.5, Domain::fixed(200)),
        make_kernel(Family::Matern, 1.0, 0.5, 1.5, Domain::fixed(200)),
        make_kernel(Family::PoweredExponential, 1.0, 0.5, 0.5, Domain::fixed(200)),
        make_kernel(Family::SquaredExponential, 1.0, 0.5, 0.0, Domain::fixed(200)),
        make_kernel(Family::Triangular, 1.0, 0.5, 0.0, Domain::fixed(200)),
        make_kernel(Family::ExpToeplitz, 1.0, 2.0, 0.0, Domain::increasing(200)),
        make_kernel(Family::PolyToeplitz, 1.0, 2.0, 0.5, Domain::increasing(200)),
        make_kernel(Family::White, 1.0, 1.0, 0.0, Domain::fixed(200)),
    };
    for (const auto& s : specs) EXPECT_NO_THROW(build_cov(s)) << family_name(s.family);
}

TEST(BuildCov, FactorProductResidualBounded) {
    // ||L L^T - Sigma||_inf <= 1e-8 * f0, including the flagged-jitter path.
    std::vector<KernelSpec> specs = {
        make_kernel(Family::Matern, 1.3, 0.5, 0.5, Domain::fixed(300)),
        make_kernel(Family::SquaredExponential, 1.0, 0.5, 0.0, Domain::fixed(300)),
        make_kernel(Family::ExpToeplitz, 2.0, 2.0, 0.0, Domain::increasing(300)),
    };
    for (const auto& s : specs) {
        CovOperator cov = build_cov(s);
        int n = cov.n();
        const auto& L = cov.chol_lower();
        double worst = 0.0;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j <= i; ++j) {
                double acc = 0.0;
                for (int k = 0; k <= j; ++k)
                    acc += L[static_cast<std::size_t>(i) * n + k] *
                           L[static_cast<std::size_t>(j) * n + k];
                worst = std::max(
                    worst, std::abs(acc - cov.first_row()[static_cast<std::size_t>(i - j)]));
            }
        }
        EXPECT_LE(worst, 1e-8 * cov.first_row()[0]) << family_name(s.family);
        double ld = 0.0;
        for (int i = 0; i < n; ++i)
            ld += 2.0 * std::log(L[static_cast<std::size_t>(i) * n + i]);
        EXPECT_NEAR(cov.log_det(), ld, 1e-9 * std::abs(ld));
    }
}

TEST(BuildCov, JitterFlaggedForSmoothKernelAtScale) {
    auto smooth = make_kernel(Family::SquaredExponential, 1.0, 0.5, 0.0, Domain::fixed(500));
    EXPECT_TRUE(build_cov(smooth).jittered());
    auto rough = make_kernel(Family::Matern, 1.0, 0.5, 0.5, Domain::fixed(500));
    EXPECT_FALSE(build_cov(rough).jittered());
}

TEST(BuildCov, ConditioningErrorCarriesPivot) {
    // [[1, 2], [2, 1]] is indefinite; jitter cannot rescue it.
    try {
        CovOperator::from_first_row({1.0, 2.0});
        FAIL() << "expected conditioning_error";
    } catch (const conditioning_error& e) {
        EXPECT_EQ(e.pivot(), 1);
    }
}

TEST(Solve, IdentityAndZero) {
    CovOperator eye = CovOperator::from_first_row(white_row(4));
    std::vector<double> e1 = {1, 0, 0, 0};
    EXPECT_EQ(eye.solve(e1), e1);
    std::vector<double> zero(4, 0.0);
    EXPECT_EQ(eye.solve(zero), zero);
    EXPECT_THROW(eye.solve(std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST(Solve, ExpToeplitzTwoByTwoAnalytic) {
    auto spec = make_kernel(Family::ExpToeplitz, 1.0, 2.0, 0.0, Domain::increasing(2));
    CovOperator cov = build_cov(spec);
    double a = std::exp(-0.5);
    std::vector<double> y = cov.solve(std::vector<double>{1.0, 0.0});
    EXPECT_NEAR(y[0], 1.0 / (1.0 - a * a), 1e-12);
    EXPECT_NEAR(y[1], -a / (1.0 - a * a), 1e-12);
}

TEST(Solve, ResidualSmall) {
    auto spec = make_kernel(Family::Matern, 1.0, 0.5, 1.5, Domain::fixed(200));
    CovOperator cov = build_cov(spec);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    std::vector<double> rhs(200);
    for (double& v : rhs) v = nd(rng);
    std::vector<double> back = cov.apply(cov.solve(rhs));
    double rhs_max = 0.0, err = 0.0;
    for (std::size_t i = 0; i < rhs.size(); ++i) {
        rhs_max = std::max(rhs_max, std::abs(rhs[i]));
        err = std::max(err, std::abs(back[i] - rhs[i]));
    }
    EXPECT_LE(err, 1e-8 * rhs_max);
}

TEST(QuadForm, SignVectorOnIdentityEqualsN) {
    int n = 64;
    CovOperator eye = CovOperator::from_first_row(white_row(n));
    std::vector<double> zeta(static_cast<std::size_t>(n), 1.0);
    for (int i = 0; i < n / 3; ++i) zeta[static_cast<std::size_t>(i)] = -1.0;
    EXPECT_NEAR(eye.quad_form(zeta), n, 1e-12);
    std::vector<double> zero(static_cast<std::size_t>(n), 0.0);
    EXPECT_DOUBLE_EQ(eye.quad_form(zero), 0.0);
}

TEST(QuadForm, MatchesSolveRoute) {
    auto spec = make_kernel(Family::PolyToeplitz, 1.0, 2.0, 0.5, Domain::increasing(150));
    CovOperator cov = build_cov(spec);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd;
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> v(150);
        for (double& x : v) x = nd(rng);
        std::vector<double> y = cov.solve(v);
        double via_solve = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) via_solve += v[i] * y[i];
        double qf = cov.quad_form(v);
        EXPECT_NEAR(qf, via_solve, 1e-10 * std::abs(qf));
    }
}

TEST(QuadForm, KantorovichInequality) {
    // v^T Sigma^{-1} v >= |v|_2^4 / (v^T Sigma v) on 1000 random (spec, v).
    std::mt19937_64 rng(17);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<int> n_draw(8, 48);
    for (int rep = 0; rep < 1000; ++rep) {
        int n = n_draw(rng);
        KernelSpec spec;
        switch (rep % 5) {
            case 0:
                spec = make_kernel(Family::Matern, 0.5 + unif(rng), 0.2 + unif(rng),
                                   0.5 + unif(rng), Domain::fixed(n));
                break;
            case 1:
                spec = make_kernel(Family::PoweredExponential, 0.5 + unif(rng),
                                   0.2 + unif(rng), 0.3 + 1.4 * unif(rng),
                                   Domain::fixed(n));
                break;
            case 2:
                spec = make_kernel(Family::Triangular, 0.5 + unif(rng), 0.2 + unif(rng),
                                   0.0, Domain::fixed(n));
                break;
            case 3:
                spec = make_kernel(Family::ExpToeplitz, 0.5 + unif(rng),
                                   0.5 + 3.0 * unif(rng), 0.0, Domain::increasing(n));
                break;
            default:
                spec = make_kernel(Family::PolyToeplitz, 0.5 + unif(rng),
                                   0.5 + 3.0 * unif(rng), 0.2 + unif(rng),
                                   Domain::increasing(n));
                break;
        }
        CovOperator cov = build_cov(spec);
        std::vector<double> v(static_cast<std::size_t>(n));
        for (double& x : v) x = nd(rng);
        double norm2 = 0.0;
        for (double x : v) norm2 += x * x;
        std::vector<double> sv = cov.apply(v);
        double v_sigma_v = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) v_sigma_v += v[i] * sv[i];
        double lhs = cov.quad_form(v);
        double rhs = norm2 * norm2 / v_sigma_v;
        EXPECT_GE(lhs, rhs * (1.0 - 1e-10)) << family_name(spec.family) << " n=" << n;
    }
}

TEST(Tau, IdentityAndScaledIdentity) {
    int n = 32;
    CovOperator eye = CovOperator::from_first_row(white_row(n));
    auto all = range_set(0, n);
    EXPECT_NEAR(eye.tau(false, all, all), 1.0, 1e-12);
    EXPECT_NEAR(eye.tau(true, all, all), 1.0, 1e-12);
    CovOperator scaled = CovOperator::from_first_row(white_row(n, 4.0));
    EXPECT_NEAR(scaled.tau(true, all, all), 0.25, 1e-12);
    EXPECT_THROW(eye.tau(true, {}, all), std::invalid_argument);
}

TEST(Tau, ExpToeplitzApproachesInverseLongRunVariance) {
    // tau(Sigma^{-1}, {1..n}) -> 1/f(0) = (1-a)/(1+a), monotone closer in n.
    double a = std::exp(-0.5);
    double limit = (1.0 - a) / (1.0 + a);
    double err_prev = 1e9;
    for (int n : {100, 500}) {
        auto spec = make_kernel(Family::ExpToeplitz, 1.0, 2.0, 0.0, Domain::increasing(n));
        CovOperator cov = build_cov(spec);
        auto all = range_set(0, n);
        double err = std::abs(cov.tau(true, all, all) - limit);
        EXPECT_LT(err, err_prev);
        err_prev = err;
    }
    EXPECT_LT(err_prev, 0.05);
}

TEST(Tau, CrossBlockDecay) {
    // |tau(Sigma^{-1}, {1..t}, {t+1..n})| at t = n/2 shrinks as n doubles.
    double prev = 1e9;
    for (int n : {100, 200, 400}) {
        auto spec = make_kernel(Family::PolyToeplitz, 1.0, 2.0, 0.5, Domain::increasing(n));
        CovOperator cov = build_cov(spec);
        double cur = std::abs(cov.tau(true, range_set(0, n / 2), range_set(n / 2, n)));
        EXPECT_LT(cur, prev) << n;
        prev = cur;
    }
}

TEST(InverseEntries, PolyToeplitzDecaySlope) {
    // log-log slope of max_{|r-s|=d} |Sigma^{-1}(r,s)| over d in [10, 100]
    // must be at most -(1+lambda) + 0.3.
    const int n = 300;
    const double lambda = 0.5;
    auto spec = make_kernel(Family::PolyToeplitz, 1.0, 2.0, lambda, Domain::increasing(n));
    CovOperator cov = build_cov(spec);
    std::vector<std::vector<double>> columns;
    columns.reserve(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        std::vector<double> e(static_cast<std::size_t>(n), 0.0);
        e[static_cast<std::size_t>(j)] = 1.0;
        columns.push_back(cov.solve(e));
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int count = 0;
    for (int d = 10; d <= 100; ++d) {
        double mx = 0.0;
        for (int r = 0; r + d < n; ++r)
            mx = std::max(mx, std::abs(columns[static_cast<std::size_t>(r)]
                                              [static_cast<std::size_t>(r + d)]));
        double lx = std::log(static_cast<double>(d)), ly = std::log(mx);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++count;
    }
    double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
    EXPECT_LE(slope, -(1.0 + lambda) + 0.3);
}

TEST(SampleChol, DegenerateAndIdentity) {
    int n = 16;
    CovOperator eye = CovOperator::from_first_row(white_row(n));
    std::vector<double> zero(static_cast<std::size_t>(n), 0.0);
    EXPECT_EQ(eye.sample_chol(zero), zero);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    std::vector<double> z(static_cast<std::size_t>(n));
    for (double& v : z) v = nd(rng);
    EXPECT_EQ(eye.sample_chol(z), z);
}

TEST(SampleChol, EmpiricalCovarianceConverges) {
    const int n = 50, draws = 20000;
    auto spec = make_kernel(Family::ExpToeplitz, 1.0, 2.0, 0.0, Domain::increasing(n));
    CovOperator cov = build_cov(spec);
    std::mt19937_64 rng(99);
    std::normal_distribution<double> nd;
    double acc01 = 0.0;
    std::vector<double> z(static_cast<std::size_t>(n));
    for (int k = 0; k < draws; ++k) {
        for (double& v : z) v = nd(rng);
        std::vector<double> x = cov.sample_chol(z);
        acc01 += x[0] * x[1];
    }
    EXPECT_NEAR(acc01 / draws, std::exp(-0.5), 0.02);
}
