#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "sortcycle/dynamics.hpp"

using namespace sortcycle;

namespace {

const ValidatedParams kBase = validate(baseline_params());

// One policy solve shared by the baseline tests.
const Economy& baseline_economy() {
    static const Economy econ(kBase, baseline_chain());
    return econ;
}
const Policy& baseline_policy() {
    static const Policy pol = solve_policy(baseline_economy());
    return pol;
}

}  // namespace

TEST(SteadyState, EulerAndResourceConditions) {
    for (double z : {0.0, 0.3984}) {
        const SteadyState ss = steady_state(kBase, z);
        EXPECT_NEAR(kBase->beta * (ss.R + 1.0 - kBase->delta), 1.0, 1e-12);
        const StaticEquilibrium eq = solve_static(kBase, baseline_shock(kBase, z), ss.K);
        EXPECT_NEAR(ss.C, eq.Y_l + eq.Y_k + eq.Y_d - kBase->delta * ss.K, 1e-10 * ss.C);
    }
    EXPECT_GT(steady_state(kBase, 0.0).K, steady_state(kBase, 0.3984).K);
}

TEST(Policy, OffGridEulerResiduals) {
    const Economy& econ = baseline_economy();
    const Policy& pol = baseline_policy();
    std::vector<double> res;
    const double lo = std::log(pol.K_min()), hi = std::log(pol.K_max());
    for (int s = 0; s < 2; ++s)
        for (int i = 0; i < 997; ++i) {
            const double K = std::exp(lo + (hi - lo) * (i + 0.5) / 997.0);
            res.push_back(std::fabs(euler_residual(econ, pol, s, K)));
        }
    std::sort(res.begin(), res.end());
    EXPECT_LT(res[static_cast<std::size_t>(0.99 * res.size())], 1e-5);
}

TEST(Policy, ThreadCountDoesNotChangePolicy) {
    GridSpec g;
    g.nodes = 60;
    g.threads = 1;
    const Policy a = solve_policy(baseline_economy(), g);
    g.threads = 4;
    const Policy b = solve_policy(baseline_economy(), g);
    EXPECT_EQ(a.C[0], b.C[0]);
    EXPECT_EQ(a.C[1], b.C[1]);
    EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Simulate, BudgetIdentityEveryPeriod) {
    const Economy& econ = baseline_economy();
    const SimulationPath path = simulate(econ, baseline_policy(), 3000, 100, 42);
    for (const auto& r : path.periods) {
        const double lhs = r.C + r.K_next;
        const double rhs = (1.0 - kBase->delta) * r.K + r.income;
        ASSERT_LE(std::fabs(lhs - rhs), 1e-10 * rhs);
    }
    const SimulationSummary s = summarize(path);
    EXPECT_EQ(s.periods, 2900u);
    EXPECT_GT(s.share_high_state, 0.02);
    EXPECT_LT(s.share_high_state, 0.15);
}

TEST(Simulate, DegenerateChainConvergesToSteadyState) {
    MarkovChain2 frozen = baseline_chain();
    frozen.p_stay_low = 1.0;
    const Economy econ(kBase, frozen);
    const Policy pol = solve_policy(econ);
    const double K_star = steady_state(kBase, 0.0).K;
    const SimulationPath path = simulate(econ, pol, 501, 0, 1, 0.8 * K_star);
    EXPECT_NEAR(path.periods.back().K / K_star, 1.0, 1e-3);
    for (const auto& r : path.periods) ASSERT_EQ(r.state, 0);
}

TEST(Simulate, SteadyStateIsAbsorbing) {
    MarkovChain2 frozen = baseline_chain();
    frozen.p_stay_low = 1.0;
    const Economy econ(kBase, frozen);
    const Policy pol = solve_policy(econ);
    const double K_star = steady_state(kBase, 0.0).K;
    const SimulationPath path = simulate(econ, pol, 200, 0, 1, K_star);
    const auto& first = path.periods.front();
    for (const auto& r : path.periods) {
        ASSERT_NEAR(r.K / K_star, 1.0, 1e-4);
        ASSERT_NEAR(r.Y / first.Y, 1.0, 1e-4);
        ASSERT_EQ(r.var_log_tfpq, first.var_log_tfpq);
        ASSERT_NEAR(r.labor_share, first.labor_share, 1e-14);
    }
}

TEST(Simulate, Preconditions) {
    const Economy& econ = baseline_economy();
    const Policy& pol = baseline_policy();
    EXPECT_THROW(simulate(econ, pol, 50, 100, 1), DomainError);
    EXPECT_THROW(simulate(econ, pol, 10, 0, 1, 10.0 * pol.K_max()), GridExit);
    try {
        simulate(econ, pol, 10, 0, 1, 10.0 * pol.K_max());
    } catch (const GridExit& e) {
        EXPECT_EQ(e.period(), 0u);
    }
}

TEST(Simulate, SameSeedSamePath) {
    const SimulationPath a = simulate(baseline_economy(), baseline_policy(), 500, 0, 9);
    const SimulationPath b = simulate(baseline_economy(), baseline_policy(), 500, 0, 9);
    for (std::size_t t = 0; t < a.periods.size(); ++t) ASSERT_EQ(a.periods[t].K, b.periods[t].K);
}

TEST(Irf, NoShockMeansNoResponse) {
    MarkovChain2 flat = baseline_chain();
    flat.z_high = 0.0;
    const Economy econ(kBase, flat);
    GridSpec g;
    g.nodes = 80;
    const Policy pol = solve_policy(econ, g);
    IRFConfig cfg;
    cfg.horizon = 10;
    cfg.n_sims = 50;
    cfg.ergodic_length = 500;
    const IRFResult r = impulse_response(econ, pol, cfg, 3);
    for (const auto* v : {&r.log_Y, &r.measured_tfp, &r.var_log_wage, &r.var_log_tfpq, &r.var_log_tfpr, &r.log_K})
        for (double x : *v) ASSERT_EQ(x, 0.0);
}

TEST(Irf, ImpactSigns) {
    IRFConfig cfg;
    cfg.horizon = 20;
    cfg.n_sims = 1000;
    const IRFResult r = impulse_response(baseline_economy(), baseline_policy(), cfg, 5);
    EXPECT_LT(r.log_Y[0], -0.05);
    EXPECT_LT(r.measured_tfp[0], 0.0);
    EXPECT_GT(r.var_log_tfpq[0], 0.0);
    EXPECT_GT(r.var_log_tfpr[0], 0.0);
    EXPECT_LT(r.var_log_wage[0], 0.0);
    EXPECT_EQ(r.log_K[0], 0.0);
    // capital falls after the shock and the response decays
    EXPECT_LT(r.log_K[3], 0.0);
    EXPECT_GT(r.log_Y[20], r.log_Y[0]);
}

TEST(Irf, ThreadCountDoesNotChangeResponse) {
    IRFConfig cfg;
    cfg.horizon = 5;
    cfg.n_sims = 200;
    cfg.ergodic_length = 2000;
    cfg.threads = 1;
    const IRFResult a = impulse_response(baseline_economy(), baseline_policy(), cfg, 8);
    cfg.threads = 3;
    const IRFResult b = impulse_response(baseline_economy(), baseline_policy(), cfg, 8);
    EXPECT_EQ(a.log_Y, b.log_Y);
    EXPECT_EQ(a.log_K, b.log_K);
}

TEST(ShockPath, ConstantVolatilityWithoutInnovations) {
    LogVolProcess lv;
    lv.sigma_l = 0.0;
    lv.sigma_k = 0.0;
    lv.has_sigma2 = true;
    lv.log_center2 = std::log(0.05);
    const auto path = generate_shock_path(lv, baseline_shock(kBase, 0.0), 100, 1);
    for (const auto& s : path) {
        ASSERT_NEAR(s.sigma1_t, 0.2293, 1e-15);
        ASSERT_NEAR(s.sigma2_t, 0.05, 1e-15);
    }
}

TEST(ShockPath, LogVolatilityIsStationaryAr1) {
    LogVolProcess lv;
    lv.rho1 = 0.5;
    lv.sigma_l = 0.2;
    const auto path = generate_shock_path(lv, baseline_shock(kBase, 0.0), 100000, 2);
    double m = 0, v = 0;
    for (const auto& s : path) m += std::log(s.sigma1_t) - lv.log_center1;
    m /= path.size();
    for (const auto& s : path) v += std::pow(std::log(s.sigma1_t) - lv.log_center1 - m, 2);
    v /= path.size();
    EXPECT_NEAR(m, 0.0, 0.01);
    EXPECT_NEAR(v, 0.04 / (1 - 0.25), 0.004);
}

TEST(ShockPath, ChainVisitsStatesAtErgodicFrequencies) {
    const auto path = generate_shock_path(baseline_chain(), baseline_shock(kBase, 0.0), 200000, 4);
    double high = 0;
    for (const auto& s : path) high += s.z > 0.0;
    EXPECT_NEAR(high / path.size(), stationary_distribution(baseline_chain())[1], 0.01);
    ThetaRedrawProcess bad;
    bad.lambda_high = 3.0;
    EXPECT_THROW(generate_shock_path(bad, baseline_shock(kBase, 0.0), 10, 1), InvalidProcess);
}
