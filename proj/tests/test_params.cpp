#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "sortcycle/params.hpp"
#include "sortcycle/quadrature.hpp"
#include "sortcycle/rng.hpp"
#include "sortcycle/stats.hpp"

using namespace sortcycle;

TEST(Params, BaselineIsValid) {
    const ModelParams m = baseline_params();
    EXPECT_DOUBLE_EQ(m.alpha, 0.3);
    EXPECT_DOUBLE_EQ(m.gamma, 0.6);
    EXPECT_DOUBLE_EQ(m.xi, 9.0);
    EXPECT_DOUBLE_EQ(m.psi, 0.4022);
    EXPECT_DOUBLE_EQ(m.lambda_theta, 2.6160);
    EXPECT_DOUBLE_EQ(m.lambda_x, 0.8681);
    EXPECT_DOUBLE_EQ(m.sigma1, 0.2293);
    EXPECT_NO_THROW(validate(m));
}

TEST(Params, RejectsDecreasingReturnsViolation) {
    ModelParams m;
    m.alpha = 0.5;
    m.gamma = 0.5;
    EXPECT_THROW(validate(m), DomainError);
}

TEST(Params, RejectsPsiOutsideUnitInterval) {
    ModelParams m;
    m.psi = 1.2;
    EXPECT_THROW(validate(m), DomainError);
    m.psi = -0.1;
    EXPECT_THROW(validate(m), DomainError);
}

TEST(Params, RejectsEachBadField) {
    auto bad = [](auto mutate) {
        ModelParams m;
        mutate(m);
        return m;
    };
    EXPECT_THROW(validate(bad([](ModelParams& m) { m.xi = 1.0; })), DomainError);
    EXPECT_THROW(validate(bad([](ModelParams& m) { m.lambda_x = 0.0; })), DomainError);
    EXPECT_THROW(validate(bad([](ModelParams& m) { m.lambda_theta = -1.0; })), DomainError);
    EXPECT_THROW(validate(bad([](ModelParams& m) { m.sigma1 = -0.1; })), DomainError);
    EXPECT_THROW(validate(bad([](ModelParams& m) { m.beta = 1.0; })), DomainError);
    EXPECT_THROW(validate(bad([](ModelParams& m) { m.delta = 1.5; })), DomainError);
    EXPECT_THROW(validate(bad([](ModelParams& m) { m.alpha = NAN; })), DomainError);
}

TEST(Params, DerivedConstants) {
    const ValidatedParams p = validate(baseline_params());
    EXPECT_NEAR(p.kappa(), 8.0 / 9.0, 1e-15);
    EXPECT_NEAR(p.drs_denominator(), 1.0 + 0.1 * 8.0, 1e-15);
    EXPECT_NEAR(p.eta_Q(), 9.0 / 1.8, 1e-14);
}

TEST(Chain, StationaryDistributionSolvesBalance) {
    const MarkovChain2 c = baseline_chain();
    const auto pi = stationary_distribution(c);
    // pi P = pi written as the 2x2 system, solved by Cramer's rule
    const double a = c.p_stay_low - 1.0, b = 1.0 - c.p_stay_high;
    const double low = b / (b - a);
    EXPECT_NEAR(pi[0], low, 1e-12);
    EXPECT_NEAR(pi[1], 1.0 - low, 1e-12);
    EXPECT_NEAR(pi[0], 0.9313, 5e-5);
    EXPECT_NEAR(pi[1], 0.0687, 5e-5);
    EXPECT_NEAR(pi[0] * c.transition(0, 0) + pi[1] * c.transition(1, 0), pi[0], 1e-15);
}

TEST(Chain, DegenerateCases) {
    MarkovChain2 c;
    c.p_stay_low = 1.0;
    c.p_stay_high = 0.0;
    auto pi = stationary_distribution(c);
    EXPECT_DOUBLE_EQ(pi[0], 1.0);
    EXPECT_DOUBLE_EQ(pi[1], 0.0);
    c.p_stay_low = c.p_stay_high = 0.5;
    pi = stationary_distribution(c);
    EXPECT_DOUBLE_EQ(pi[0], 0.5);
    EXPECT_DOUBLE_EQ(pi[1], 0.5);
}

TEST(Chain, NextFollowsUniform) {
    const MarkovChain2 c = baseline_chain();
    EXPECT_EQ(c.next(0, 0.5), 0);
    EXPECT_EQ(c.next(0, 0.99), 1);
    EXPECT_EQ(c.next(1, 0.5), 1);
    EXPECT_EQ(c.next(1, 0.7), 0);
    MarkovChain2 bad;
    bad.p_stay_low = 1.1;
    EXPECT_THROW(validate_chain(bad), DomainError);
}

TEST(ThetaProcess, Validation) {
    EXPECT_NO_THROW(validate_process(ThetaRedrawProcess{}));
    ThetaRedrawProcess bad;
    bad.lambda_high = 3.0;
    EXPECT_THROW(validate_process(bad), InvalidProcess);
    ThetaRedrawProcess iid;
    iid.rho = 0.0;
    iid.lambda_high = 50.0;
    EXPECT_NO_THROW(validate_process(iid));
    LogVolProcess lv;
    lv.rho1 = 1.0;
    EXPECT_THROW(validate_process(lv), InvalidProcess);
}

TEST(Rng, CounterStreamsAreReproducibleAndDistinct) {
    const CounterRng a(7, 1), b(7, 1), c(7, 2), d(8, 1);
    for (std::uint64_t i = 0; i < 100; ++i) {
        EXPECT_EQ(a.bits(i), b.bits(i));
        EXPECT_NE(a.bits(i), c.bits(i));
        EXPECT_NE(a.bits(i), d.bits(i));
        const double u = a.uniform(i);
        EXPECT_GT(u, 0.0);
        EXPECT_LT(u, 1.0);
    }
    std::set<std::uint64_t> seeds;
    for (std::uint64_t i = 0; i < 1000; ++i) seeds.insert(derive_seed(1, "x", i));
    seeds.insert(derive_seed(1, "y", 0));
    EXPECT_EQ(seeds.size(), 1001u);
}

TEST(Rng, InverseNormalMatchesErfc) {
    for (double p : {1e-10, 1e-4, 0.02, 0.3, 0.5, 0.77, 0.999, 1 - 1e-9}) {
        const double x = inverse_normal_cdf(p);
        EXPECT_NEAR(0.5 * std::erfc(-x / std::sqrt(2.0)), p, 1e-14 + 1e-12 * p);
    }
}

TEST(Rng, MomentsOfDraws) {
    const CounterRng r(3, 9);
    const std::size_t n = 200000;
    double sn = 0, sn2 = 0, se = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = r.normal(i);
        sn += z;
        sn2 += z * z;
        se += r.exponential(i + n, 2.0);
    }
    EXPECT_NEAR(sn / n, 0.0, 0.01);
    EXPECT_NEAR(sn2 / n, 1.0, 0.015);
    EXPECT_NEAR(se / n, 0.5, 0.005);
}

TEST(Stats, VarianceAndHill) {
    const std::vector<double> y{1, 2, 3, 4};
    const auto v = stats::variance(y);
    EXPECT_DOUBLE_EQ(v.mean, 2.5);
    EXPECT_DOUBLE_EQ(v.variance, 1.25);
    // exact exponential quantiles: the Hill estimator on log values of a Pareto
    // sample equals the mean excess of the exponential
    std::vector<double> logs;
    const std::size_t n = 100000;
    for (std::size_t i = 0; i < n; ++i) logs.push_back(-std::log(1.0 - (i + 0.5) / n) / 3.0);
    EXPECT_NEAR(stats::hill_tail_index(logs, 1000), 3.0, 0.05);
    EXPECT_LT(stats::ks_distance_exponential(logs, 3.0), 1e-4);
    // sup of exp(-3x) - exp(-3.3x) is attained at x = log(1.1) / 0.3
    const double x = std::log(1.1) / 0.3;
    EXPECT_NEAR(stats::ks_distance_exponential(logs, 3.3), std::exp(-3.0 * x) - std::exp(-3.3 * x), 1e-4);
}

TEST(Quadrature, AdaptiveAndHermite) {
    const double v = quad::integrate([](double x) { return std::exp(x); }, 0.0, 1.0);
    EXPECT_NEAR(v, std::exp(1.0) - 1.0, 1e-14);
    const auto rule = quad::gauss_hermite(40);
    // E[e^{sZ}] = e^{s^2/2}
    const double s = 0.7;
    const double m = quad::normal_expectation([](double x) { return std::exp(x); }, s, rule);
    EXPECT_NEAR(m, std::exp(0.5 * s * s), 1e-13);
    const double w = std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0);
    EXPECT_GT(w, 0.0);
}
