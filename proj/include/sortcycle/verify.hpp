#pragma once

// Independent oracles. Nothing here calls the closed-form coefficient block:
// firms are re-solved from their first-order conditions given the claimed
// prices (w0, R, Y, lambda_t), and market clearing is checked by quadrature.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "sortcycle/dynamics.hpp"
#include "sortcycle/errors.hpp"
#include "sortcycle/firms.hpp"
#include "sortcycle/parallel.hpp"
#include "sortcycle/params.hpp"
#include "sortcycle/quadrature.hpp"
#include "sortcycle/rng.hpp"
#include "sortcycle/statics.hpp"
#include "sortcycle/stats.hpp"

namespace sortcycle::verify {

struct Check {
    std::string name;
    double statistic = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    bool negative_control = false;  // passes when the check detects the planted error
};

struct VerificationReport {
    std::vector<Check> checks;

    bool overall() const {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
    }
    /// statistic <= tolerance passes
    void at_most(std::string name, double statistic, double tolerance) {
        checks.push_back({std::move(name), statistic, tolerance, statistic <= tolerance, false});
    }
    /// negative control: statistic > tolerance passes
    void detects(std::string name, double statistic, double tolerance) {
        checks.push_back({std::move(name), statistic, tolerance, statistic > tolerance, true});
    }
    void sort() {
        std::stable_sort(checks.begin(), checks.end(), [](const Check& a, const Check& b) { return a.name < b.name; });
    }
};

/// Prices a firm takes as given.
struct Prices {
    double Y = 1.0;
    double R = 1.0;
    double w0 = 1.0;
    double lambda_t = 1.0;
    double A = 1.0;
};

inline Prices prices_of(const StaticEquilibrium& eq) { return {eq.Y, eq.R, eq.w0, eq.lambda_t, eq.shock.A}; }

struct IndependentFirm {
    double x = 0.0;  // worker type hired
    double log_w = 0.0;
    double log_Q = 0.0;
    double log_k = 0.0;
    double log_l = 0.0;
    double log_P = 0.0;
    double log_tau1 = 0.0;
    double log_tau2 = 0.0;
};

/// Solves the two first-order conditions with production and demand
/// substituted in. With revenue P Q = Y^{1/xi} Q^{kappa} both conditions are
/// linear in (log k, log l, log Q).
inline IndependentFirm solve_firm(const ModelParams& m, const AggregateShockState& s, const Prices& pr,
                                  double theta, double eps1, double eps2, double mu_slope_factor = 1.0) {
    IndependentFirm f;
    const double kappa = 1.0 - 1.0 / m.xi;
    f.x = mu_slope_factor * pr.lambda_t / m.lambda_x * theta;
    f.log_w = std::log(pr.w0) + (m.psi / m.gamma) * std::pow(m.lambda_x / pr.lambda_t, 1.0 - m.psi) * f.x;
    const double type_term = std::pow(f.x, m.psi) * std::pow(theta, 1.0 - m.psi);
    f.log_tau1 = s.z * theta + eps1;
    f.log_tau2 = eps2;
    const double logY = std::log(pr.Y);
    const double cl = std::log(m.gamma * kappa) + logY / m.xi - f.log_tau1 - f.log_w;
    const double ck = std::log(m.alpha * kappa) + logY / m.xi - f.log_tau2 - std::log(pr.R);
    f.log_Q = (std::log(pr.A) + type_term + m.alpha * ck + m.gamma * cl) / (1.0 - kappa * (m.alpha + m.gamma));
    f.log_l = cl + kappa * f.log_Q;
    f.log_k = ck + kappa * f.log_Q;
    f.log_P = (logY - f.log_Q) / m.xi;
    return f;
}

/// Residuals of a closed-form firm outcome against its defining conditions,
/// each as an absolute log difference (relative error to first order).
struct FocResiduals {
    double labor = 0.0;
    double capital = 0.0;
    double production = 0.0;
    double demand = 0.0;      // demand curve and constant markup
    double sorting = 0.0;     // optimality of the hired worker type
    double independent = 0.0; // distance to solve_firm

    double max() const { return std::max({labor, capital, production, demand, sorting, independent}); }
};

inline FocResiduals foc_residuals(const StaticEquilibrium& eq, const FirmOutcome& f) {
    const ModelParams& m = eq.params;
    const double theta = f.draw.theta;
    const double kappa = 1.0 - 1.0 / m.xi;
    const double x = f.matched_x;
    const double slope = (m.psi / m.gamma) * std::pow(m.lambda_x / eq.lambda_t, 1.0 - m.psi);
    const double log_w = std::log(eq.w0) + slope * x;
    FocResiduals r;
    r.labor = std::fabs(std::log(f.tau1) + log_w + std::log(f.l) - std::log(m.gamma * f.chi * f.Q));
    r.capital = std::fabs(std::log(f.tau2) + std::log(eq.R) + std::log(f.k) - std::log(m.alpha * f.chi * f.Q));
    r.production = std::fabs(std::log(f.Q) - (std::log(eq.shock.A) + std::pow(x, m.psi) * std::pow(theta, 1.0 - m.psi) +
                                              m.alpha * std::log(f.k) + m.gamma * std::log(f.l)));
    r.demand = std::max(std::fabs(std::log(f.Q) - (-m.xi * std::log(f.P) + std::log(eq.Y))),
                        std::fabs(std::log(f.P) - (std::log(f.chi) - std::log(kappa))));
    // d/dx [x^psi theta^{1-psi} - gamma log w(x)] = 0 at the hired type
    if (theta > 0.0 && m.psi > 0.0 && m.psi < 1.0) {
        const double marginal = m.psi * std::pow(theta / x, 1.0 - m.psi);
        r.sorting = std::fabs(std::log(marginal) - std::log(m.gamma * slope));
    }
    const IndependentFirm ind = solve_firm(m, eq.shock, prices_of(eq), theta, f.draw.eps1, f.draw.eps2);
    r.independent = std::max({std::fabs(ind.log_Q - std::log(f.Q)), std::fabs(ind.log_k - std::log(f.k)),
                              std::fabs(ind.log_l - std::log(f.l))});
    return r;
}

/// Random valid parameter and shock draws for property sweeps. Draws that
/// violate the capital-demand guard are rejected and redrawn.
struct RandomCase {
    ModelParams params;
    AggregateShockState shock;
    double K = 1.0;
};

inline RandomCase random_case(std::uint64_t seed, std::uint64_t index) {
    const CounterRng rng(derive_seed(seed, "random-case", index), 0);
    std::uint64_t c = 0;
    auto U = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(c++); };
    for (int attempt = 0; attempt < 1000; ++attempt) {
        ModelParams m;
        m.alpha = U(0.1, 0.45);
        m.gamma = U(0.2, 0.95 - m.alpha);
        m.xi = U(1.5, 12.0);
        m.psi = U(0.05, 0.95);
        m.lambda_x = U(0.3, 3.0);
        m.lambda_theta = U(1.0, 6.0);
        m.sigma1 = U(0.0, 0.4);
        m.sigma2 = U(0.0, 0.3);
        RandomCase rc;
        rc.params = m;
        rc.shock = {U(0.0, 1.0), U(0.5, 2.0), m.lambda_theta, m.sigma1, m.sigma2};
        rc.K = U(0.5, 5.0);
        try {
            const ValidatedParams p = validate(m);
            const double lam = solve_lambda(p, rc.shock);
            (void)coefficients(p, rc.shock, lam);
            return rc;
        } catch (const DomainError&) {
        }
    }
    throw DomainError("random_case: no valid draw");
}

/// G written from the fixed-point condition eta_l(lambda) = lambda_theta - lambda
/// with eta_l assembled from the firm's optimal labor rule.
inline double job_gap(const ModelParams& m, const AggregateShockState& s, double lambda) {
    const double kappa = 1.0 - 1.0 / m.xi;
    const double eta_q = m.xi / (1.0 + (1.0 - m.alpha - m.gamma) * (m.xi - 1.0));
    const double r = std::pow(lambda / m.lambda_x, m.psi);
    const double eta_q_theta = -m.gamma * s.z + (1.0 - m.psi) * r;
    const double eta_l = kappa * eta_q * eta_q_theta - s.z - (m.psi / m.gamma) * r;
    return eta_l + lambda - s.lambda_theta_t;
}

/// Number of sign changes of job_gap on n points spanning [0, upper]. Exact
/// zeros are skipped; a scan ending on a zero counts it as one change.
inline std::size_t sign_changes(const ModelParams& m, const AggregateShockState& s, double upper, std::size_t n) {
    std::size_t changes = 0;
    double prev = job_gap(m, s, 0.0);
    double v = prev;
    for (std::size_t i = 1; i <= n; ++i) {
        v = job_gap(m, s, upper * static_cast<double>(i) / static_cast<double>(n));
        if (v == 0.0) continue;
        if (prev != 0.0 && (v > 0.0) != (prev > 0.0)) ++changes;
        prev = v;
    }
    if (v == 0.0) ++changes;
    return changes;
}

namespace detail {

inline const quad::GaussHermiteRule& hermite64() {
    static const quad::GaussHermiteRule rule = quad::gauss_hermite(64);
    return rule;
}

/// E over (eps1, eps2) of g(eps1, eps2).
template <class G>
double over_shocks(G&& g, const AggregateShockState& s) {
    const auto& rule = hermite64();
    return quad::normal_expectation(
        [&](double e1) { return quad::normal_expectation([&](double e2) { return g(e1, e2); }, s.sigma2_t, rule); },
        s.sigma1_t, rule);
}

}  // namespace detail

struct JobDensityResult {
    double mass = 0.0;
    double shape_cv = 0.0;
};

/// Employment-weighted density of job types f(h) = E_eps[l(h, eps)] lambda_theta e^{-lambda_theta h}.
/// Checks its mass and that f(h) e^{lambda_t h} is flat.
inline JobDensityResult check_job_density(const ModelParams& m, const AggregateShockState& s, const Prices& pr) {
    auto inner = [&](double h) {
        return detail::over_shocks([&](double e1, double e2) { return std::exp(solve_firm(m, s, pr, h, e1, e2).log_l); },
                                   s);
    };
    const double top = 40.0 / pr.lambda_t;
    auto f = [&](double h) { return inner(h) * s.lambda_theta_t * std::exp(-s.lambda_theta_t * h); };
    JobDensityResult r;
    r.mass = quad::integrate(f, 0.0, top, 1e-13);
    std::vector<double> shape;
    for (int k = 0; k < 20; ++k) {
        const double h = top * k / 19.0;
        shape.push_back(inner(h) * s.lambda_theta_t * std::exp((pr.lambda_t - s.lambda_theta_t) * h));
    }
    double mean = 0.0, var = 0.0;
    for (double v : shape) mean += v / 20.0;
    for (double v : shape) var += (v - mean) * (v - mean) / 20.0;
    r.shape_cv = std::sqrt(var) / mean;
    return r;
}

inline JobDensityResult check_job_density(const StaticEquilibrium& eq) {
    return check_job_density(eq.params, eq.shock, prices_of(eq));
}

/// Integral over types and wedge shocks of exp(log_g(firm)). Everything is
/// combined in the exponent so large firms cannot overflow. log_g is linear
/// in theta at fixed shocks; the decay rate of the integrand is read off the
/// independent solver and the range is cut where the tail is below e^{-60}.
template <class LogG>
double integrate_firms(const ModelParams& m, const AggregateShockState& s, const Prices& pr, LogG&& log_g) {
    const double log_rate = std::log(s.lambda_theta_t);
    auto at = [&](double theta) { return log_g(solve_firm(m, s, pr, theta, 0.0, 0.0)); };
    const double decay = s.lambda_theta_t - (at(1.0) - at(0.0));
    if (!(decay > 0.0)) return std::numeric_limits<double>::infinity();
    auto f = [&](double theta) {
        return detail::over_shocks(
            [&](double e1, double e2) {
                return std::exp(log_g(solve_firm(m, s, pr, theta, e1, e2)) + log_rate - s.lambda_theta_t * theta);
            },
            s);
    };
    return quad::integrate(f, 0.0, 60.0 / decay, 1e-13);
}

/// Expectation of a function with at most polynomial growth in theta.
template <class G>
double expect_firms(const ModelParams& m, const AggregateShockState& s, const Prices& pr, G&& g) {
    auto f = [&](double theta) {
        return detail::over_shocks([&](double e1, double e2) { return g(solve_firm(m, s, pr, theta, e1, e2)); }, s) *
               s.lambda_theta_t * std::exp(-s.lambda_theta_t * theta);
    };
    return quad::integrate(f, 0.0, 80.0 / s.lambda_theta_t, 1e-13);
}

/// Final-good aggregator with unit price: integral of P^{1 - xi} is one.
inline double check_goods_market(const ModelParams& m, const AggregateShockState& s, const Prices& pr) {
    const double v =
        integrate_firms(m, s, pr, [&](const IndependentFirm& f) { return (1.0 - m.xi) * f.log_P; });
    return std::fabs(v - 1.0);
}

inline double check_goods_market(const StaticEquilibrium& eq) {
    return check_goods_market(eq.params, eq.shock, prices_of(eq));
}

/// Relative gap between capital demand and the stock K.
inline double check_capital_market(const ModelParams& m, const AggregateShockState& s, const Prices& pr, double K) {
    const double v = integrate_firms(m, s, pr, [](const IndependentFirm& f) { return f.log_k; });
    return std::fabs(v / K - 1.0);
}

inline double check_capital_market(const StaticEquilibrium& eq) {
    return check_capital_market(eq.params, eq.shock, prices_of(eq), eq.K);
}

/// Worker density against the density of the jobs they are matched to, at
/// each x, for the map mu(x) = slope_factor (lambda_x / lambda_t) x.
inline double check_worker_clearing(const StaticEquilibrium& eq, const std::vector<double>& xs,
                                    double slope_factor = 1.0) {
    const double lx = eq.params.lambda_x, lt = eq.lambda_t;
    const double slope = slope_factor * lx / lt;
    double worst = 0.0;
    for (double x : xs)
        worst = std::max(worst, std::fabs(lx * std::exp(-lx * x) - lt * slope * std::exp(-lt * slope * x)));
    return worst;
}

/// Cross-sectional variance of log TFPR by quadrature, with prices from the
/// independent firm solver.
inline double quadrature_var_log_tfpr(const StaticEquilibrium& eq) {
    const ModelParams& m = eq.params;
    const Prices pr = prices_of(eq);
    auto log_tfpr = [&](const IndependentFirm& f) {
        // log TFPQ = log Q - log A - alpha log k - gamma log l
        return f.log_P + f.log_Q - std::log(eq.shock.A) - (m.alpha * f.log_k + m.gamma * f.log_l);
    };
    const double mean = expect_firms(m, eq.shock, pr, log_tfpr);
    const double second = expect_firms(m, eq.shock, pr, [&](const IndependentFirm& f) {
        const double v = log_tfpr(f) - mean;
        return v * v;
    });
    return second;
}

/// Revenue and its split by quadrature: wages received, capital rents, and
/// profits after wedge-inclusive factor costs.
struct FactorShares {
    double revenue = 0.0;
    double labor = 0.0;
    double capital = 0.0;
    double profits = 0.0;
};

inline FactorShares factor_income_quadrature(const StaticEquilibrium& eq) {
    const ModelParams& m = eq.params;
    const Prices pr = prices_of(eq);
    const double log_R = std::log(eq.R);
    FactorShares r;
    r.revenue = integrate_firms(m, eq.shock, pr, [](const IndependentFirm& f) { return f.log_P + f.log_Q; });
    r.labor = integrate_firms(m, eq.shock, pr, [](const IndependentFirm& f) { return f.log_w + f.log_l; });
    r.capital = integrate_firms(m, eq.shock, pr, [&](const IndependentFirm& f) { return log_R + f.log_k; });
    const double labor_cost =
        integrate_firms(m, eq.shock, pr, [](const IndependentFirm& f) { return f.log_tau1 + f.log_w + f.log_l; });
    const double capital_cost =
        integrate_firms(m, eq.shock, pr, [&](const IndependentFirm& f) { return f.log_tau2 + log_R + f.log_k; });
    r.profits = r.revenue - labor_cost - capital_cost;
    return r;
}

struct ComparativeStaticsResult {
    std::size_t points = 0;
    std::size_t lambda_increasing_in_z = 0;  // violation counts
    std::size_t wage_variance_decreasing_in_z = 0;
    std::size_t tfpq_variance_increasing_in_z = 0;
    std::size_t tfpr_variance_increasing_in_z = 0;
    std::size_t tfpr_loading_positive = 0;
    std::size_t a_neutrality = 0;
    std::size_t sigma_neutrality = 0;
    std::size_t tfpq_variance_decreasing_in_lambda_theta = 0;
    std::size_t tfpr_variance_decreasing_in_lambda_theta = 0;
    std::size_t wage_variance_increasing_as_lambda_theta_falls = 0;
    std::size_t s_decreasing_in_lambda_theta = 0;
    // Same quantity with the match term squared inside the bracket; not a
    // pass criterion, reported for comparison.
    std::size_t squared_term_s_not_decreasing = 0;

    std::size_t total_violations() const {
        return lambda_increasing_in_z + wage_variance_decreasing_in_z + tfpq_variance_increasing_in_z +
               tfpr_variance_increasing_in_z + tfpr_loading_positive + a_neutrality + sigma_neutrality +
               tfpq_variance_decreasing_in_lambda_theta + tfpr_variance_decreasing_in_lambda_theta +
               wage_variance_increasing_as_lambda_theta_falls + s_decreasing_in_lambda_theta;
    }
};

/// Comparative statics at n_points random parameter draws, each on a grid of
/// z values and a grid of lambda_theta values.
inline ComparativeStaticsResult proposition_suite(std::size_t n_points, std::size_t grid, std::uint64_t seed,
                                           unsigned threads = 1) {
    std::vector<ComparativeStaticsResult> parts(n_points);
    parallel_for(n_points, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            ComparativeStaticsResult& r = parts[i];
            r.points = 1;
            const RandomCase rc = random_case(seed, i);
            const ValidatedParams p = validate(rc.params);
            const ModelParams& m = rc.params;
            const double D = 1.0 + (1.0 - m.alpha - m.gamma) * (m.xi - 1.0);
            const double e = 1.0 - (1.0 - m.psi) / D;
            const double mz = m.gamma / D;

            // z grid
            double prev_lambda = 0.0;
            DispersionMoments prev{};
            for (std::size_t k = 0; k < grid; ++k) {
                AggregateShockState s = rc.shock;
                s.z = 1.5 * static_cast<double>(k) / static_cast<double>(grid - 1);
                const double lam = solve_lambda(p, s);
                const DispersionMoments dm = analytic_moments(p, s, lam);
                const SortingTerms st = sorting_terms(p, s, lam);
                if (!(tfpr_type_loading(st, m.xi) > 0.0)) ++r.tfpr_loading_positive;
                for (double A : {0.5, 2.0}) {
                    AggregateShockState sa = s;
                    sa.A = A;
                    if (solve_lambda(p, sa) != lam) ++r.a_neutrality;
                }
                for (double s1 : {0.0, 0.3})
                    for (double s2 : {0.0, 0.3}) {
                        AggregateShockState ss = s;
                        ss.sigma1_t = s1;
                        ss.sigma2_t = s2;
                        if (solve_lambda(p, ss) != lam) ++r.sigma_neutrality;
                    }
                if (k > 0) {
                    if (!(lam > prev_lambda)) ++r.lambda_increasing_in_z;
                    if (!(dm.var_log_wage < prev.var_log_wage)) ++r.wage_variance_decreasing_in_z;
                    if (!(dm.var_log_tfpq > prev.var_log_tfpq)) ++r.tfpq_variance_increasing_in_z;
                    if (!(dm.var_log_tfpr > prev.var_log_tfpr)) ++r.tfpr_variance_increasing_in_z;
                }
                prev_lambda = lam;
                prev = dm;
            }

            // lambda_theta grid at the drawn z
            double prev_s = 0.0, prev_s2 = 0.0;
            for (std::size_t k = 0; k < grid; ++k) {
                AggregateShockState s = rc.shock;
                s.lambda_theta_t = m.lambda_theta * (0.5 + 1.5 * static_cast<double>(k) / static_cast<double>(grid - 1));
                const double lam = solve_lambda(p, s);
                const DispersionMoments dm = analytic_moments(p, s, lam);
                const double r1 = std::pow(lam / m.lambda_x, m.psi);
                const double S = std::pow((e * r1 + mz * s.z) / s.lambda_theta_t, 2.0);
                const double S2 = std::pow((e * r1 * r1 + mz * s.z) / s.lambda_theta_t, 2.0);
                if (k > 0) {
                    if (!(dm.var_log_tfpq < prev.var_log_tfpq)) ++r.tfpq_variance_decreasing_in_lambda_theta;
                    if (!(dm.var_log_tfpr < prev.var_log_tfpr)) ++r.tfpr_variance_decreasing_in_lambda_theta;
                    if (!(dm.var_log_wage < prev.var_log_wage)) ++r.wage_variance_increasing_as_lambda_theta_falls;
                    if (!(S < prev_s)) ++r.s_decreasing_in_lambda_theta;
                    if (!(S2 < prev_s2)) ++r.squared_term_s_not_decreasing;
                }
                prev = dm;
                prev_s = S;
                prev_s2 = S2;
            }
        }
    });
    ComparativeStaticsResult total;
    for (const auto& r : parts) {
        total.points += r.points;
        total.lambda_increasing_in_z += r.lambda_increasing_in_z;
        total.wage_variance_decreasing_in_z += r.wage_variance_decreasing_in_z;
        total.tfpq_variance_increasing_in_z += r.tfpq_variance_increasing_in_z;
        total.tfpr_variance_increasing_in_z += r.tfpr_variance_increasing_in_z;
        total.tfpr_loading_positive += r.tfpr_loading_positive;
        total.a_neutrality += r.a_neutrality;
        total.sigma_neutrality += r.sigma_neutrality;
        total.tfpq_variance_decreasing_in_lambda_theta += r.tfpq_variance_decreasing_in_lambda_theta;
        total.tfpr_variance_decreasing_in_lambda_theta += r.tfpr_variance_decreasing_in_lambda_theta;
        total.wage_variance_increasing_as_lambda_theta_falls += r.wage_variance_increasing_as_lambda_theta_falls;
        total.s_decreasing_in_lambda_theta += r.s_decreasing_in_lambda_theta;
        total.squared_term_s_not_decreasing += r.squared_term_s_not_decreasing;
    }
    return total;
}

struct ThetaCheckResult {
    std::vector<std::size_t> checkpoints;
    std::vector<double> rates;
    std::vector<double> ks_sqrt_n;
    std::size_t passes = 0;
    bool pass = false;
};

inline constexpr double kKsCritical = 1.95;

/// Simulates n firm types under the redraw law
///   theta' = rho theta             with probability p = rho lambda' / lambda
///   theta' = rho theta + Exp(lambda') otherwise,
/// with lambda following the process chain, and compares the cross-section
/// with Exp(lambda_t) at five checkpoints.
inline ThetaCheckResult theta_process_check(const ThetaRedrawProcess& proc, std::size_t n, std::size_t T,
                                            std::uint64_t seed, unsigned threads = 1) {
    validate_process(proc);
    if (n == 0 || T < 5) throw DomainError("theta_process_check: need n >= 1 and T >= 5");
    std::vector<int> state(T + 1, 0);
    const CounterRng chain_rng(seed, hash_label("theta-rate"));
    for (std::size_t t = 0; t < T; ++t) state[t + 1] = proc.next(state[t], chain_rng.uniform(t));

    ThetaCheckResult r;
    for (std::size_t k = 1; k <= 5; ++k) r.checkpoints.push_back(k * T / 5);
    std::vector<std::vector<double>> snap(5, std::vector<double>(n));
    parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const CounterRng rng(derive_seed(seed, "theta-firm", i), 0);
            double theta = rng.exponential(0, proc.rate(state[0]));
            std::size_t next_cp = 0;
            for (std::size_t t = 0; t < T; ++t) {
                const double now = proc.rate(state[t]), next = proc.rate(state[t + 1]);
                const double keep = proc.rho * next / now;
                theta *= proc.rho;
                if (!(rng.uniform(2 * t + 1) < keep)) theta += rng.exponential(2 * t + 2, next);
                if (next_cp < 5 && t + 1 == r.checkpoints[next_cp]) snap[next_cp++][i] = theta;
            }
        }
    });
    for (std::size_t k = 0; k < 5; ++k) {
        const double rate = proc.rate(state[r.checkpoints[k]]);
        const double stat = stats::ks_distance_exponential(snap[k], rate) * std::sqrt(static_cast<double>(n));
        r.rates.push_back(rate);
        r.ks_sqrt_n.push_back(stat);
        if (stat < kKsCritical) ++r.passes;
    }
    r.pass = r.passes >= 4;
    return r;
}

struct FocSuiteResult {
    FocResiduals worst;
    std::size_t firms = 0;
};

/// Closed-form firm outcomes under n_eq random equilibria, n_firms draws each.
inline FocSuiteResult foc_suite(std::size_t n_eq, std::size_t n_firms, std::uint64_t seed, unsigned threads = 1) {
    std::vector<FocResiduals> worst(n_eq);
    parallel_for(n_eq, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t e = begin; e < end; ++e) {
            const RandomCase rc = random_case(seed, 100000 + e);
            const ValidatedParams p = validate(rc.params);
            const StaticEquilibrium eq = solve_static(p, rc.shock, rc.K);
            const std::uint64_t firm_seed = derive_seed(seed, "foc-firms", e);
            FocResiduals& w = worst[e];
            for (std::size_t i = 0; i < n_firms; ++i) {
                const FocResiduals r = foc_residuals(eq, firm_outcome(eq, firm_draw(rc.shock, firm_seed, i)));
                w.labor = std::max(w.labor, r.labor);
                w.capital = std::max(w.capital, r.capital);
                w.production = std::max(w.production, r.production);
                w.demand = std::max(w.demand, r.demand);
                w.sorting = std::max(w.sorting, r.sorting);
                w.independent = std::max(w.independent, r.independent);
            }
        }
    });
    FocSuiteResult out;
    out.firms = n_eq * n_firms;
    for (const auto& w : worst) {
        out.worst.labor = std::max(out.worst.labor, w.labor);
        out.worst.capital = std::max(out.worst.capital, w.capital);
        out.worst.production = std::max(out.worst.production, w.production);
        out.worst.demand = std::max(out.worst.demand, w.demand);
        out.worst.sorting = std::max(out.worst.sorting, w.sorting);
        out.worst.independent = std::max(out.worst.independent, w.independent);
    }
    return out;
}

struct FixedPointResult {
    double worst_scaled_residual = 0.0;  // |G| / (1e-12 max(1, lambda_theta))
    std::size_t draws_without_single_sign_change = 0;
    std::size_t draws = 0;
};

/// solve_lambda residuals and a sign-change scan of the independent gap
/// function on the solver's bracket.
inline FixedPointResult fixed_point_suite(std::size_t n_draws, std::size_t scan_points, std::uint64_t seed) {
    FixedPointResult r;
    r.draws = n_draws;
    for (std::size_t i = 0; i < n_draws; ++i) {
        const RandomCase rc = random_case(seed, 200000 + i);
        const ValidatedParams p = validate(rc.params);
        const double lam = solve_lambda(p, rc.shock);
        const double scale = 1e-12 * std::max(1.0, rc.shock.lambda_theta_t);
        r.worst_scaled_residual = std::max(r.worst_scaled_residual, std::fabs(job_gap(rc.params, rc.shock, lam)) / scale);
        const JobEquation g = job_equation(p, rc.shock);
        double upper = g.rhs + std::fabs(g.b) * std::pow(1.0 + g.rhs / rc.params.lambda_x, rc.params.psi) + 1.0;
        upper = std::max(upper, 2.0 * lam);
        if (sign_changes(rc.params, rc.shock, upper, scan_points) != 1) ++r.draws_without_single_sign_change;
    }
    return r;
}

struct VerifyConfig {
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::size_t fixed_point_draws = 1000;
    std::size_t scan_points = 10000;
    std::size_t foc_equilibria = 20;
    std::size_t foc_firms = 500;
    std::size_t proposition_points = 100;
    std::size_t proposition_grid = 20;
    std::size_t theta_firms = 100000;
    std::size_t theta_periods = 50;
};

inline const char* state_name(int s) { return s == 0 ? "z_low" : "z_high"; }

/// Market-clearing checks for one equilibrium, plus negative controls.
inline void market_checks(VerificationReport& rep, const StaticEquilibrium& eq, const std::string& tag,
                          std::uint64_t seed) {
    const JobDensityResult jd = check_job_density(eq);
    rep.at_most("job_density.mass." + tag, std::fabs(jd.mass - 1.0), 1e-8);
    rep.at_most("job_density.shape_cv." + tag, jd.shape_cv, 1e-8);
    rep.at_most("goods_market." + tag, check_goods_market(eq), 1e-8);
    rep.at_most("capital_market." + tag, check_capital_market(eq), 1e-8);
    std::vector<double> xs{0.0};
    const CounterRng rng(seed, hash_label("worker-clearing"));
    for (std::uint64_t i = 0; i < 20; ++i) xs.push_back(rng.exponential(i, eq.params.lambda_x));
    rep.at_most("worker_clearing." + tag, check_worker_clearing(eq, xs), 1e-12);
    rep.at_most("tfpr_variance_quadrature." + tag,
                std::fabs(quadrature_var_log_tfpr(eq) / analytic_moments(eq).var_log_tfpr - 1.0), 1e-8);

    const FactorShares fs = factor_income_quadrature(eq);
    rep.at_most("income.revenue_equals_output." + tag, std::fabs(fs.revenue / eq.Y - 1.0), 1e-8);
    rep.at_most("income.labor." + tag, std::fabs(fs.labor / eq.Y_l - 1.0), 1e-8);
    rep.at_most("income.capital." + tag, std::fabs(fs.capital / eq.Y_k - 1.0), 1e-8);
    rep.at_most("income.profits." + tag, std::fabs(fs.profits / eq.Y_d - 1.0), 1e-8);

    Prices wrong_lambda = prices_of(eq);
    wrong_lambda.lambda_t *= 1.01;
    rep.detects("negative_control.job_density_lambda." + tag,
                check_job_density(eq.params, eq.shock, wrong_lambda).shape_cv, 1e-3);
    Prices wrong_q = prices_of(eq);
    wrong_q.Y = eq.M * eq.Q_bar * 1.01;  // Q_bar scaled, Y = M Q_bar
    rep.detects("negative_control.goods_market_q_bar." + tag, check_goods_market(eq.params, eq.shock, wrong_q), 1e-6);
    Prices wrong_r = prices_of(eq);
    wrong_r.R *= 1.01;
    rep.detects("negative_control.capital_market_r." + tag,
                check_capital_market(eq.params, eq.shock, wrong_r, eq.K), 1e-6);
    rep.detects("negative_control.worker_clearing_slope." + tag, check_worker_clearing(eq, xs, 1.01), 1e-6);
}

/// Full verification battery at the given parameters and chain. Market
/// checks run at each state's steady-state capital.
inline VerificationReport run_verification(const ValidatedParams& p, const MarkovChain2& chain,
                                           const VerifyConfig& cfg) {
    VerificationReport rep;
    for (int s = 0; s < 2; ++s) {
        const double z = chain.level(s);
        const double K = steady_state(p, z).K;
        market_checks(rep, solve_static(p, baseline_shock(p, z), K), state_name(s), cfg.seed);
    }

    const FixedPointResult fp = fixed_point_suite(cfg.fixed_point_draws, cfg.scan_points, cfg.seed);
    rep.at_most("fixed_point.scaled_residual", fp.worst_scaled_residual, 1.0);
    rep.at_most("fixed_point.sign_change_failures", static_cast<double>(fp.draws_without_single_sign_change), 0.0);

    const FocSuiteResult foc = foc_suite(cfg.foc_equilibria, cfg.foc_firms, cfg.seed, cfg.threads);
    rep.at_most("firm_foc.labor", foc.worst.labor, 1e-9);
    rep.at_most("firm_foc.capital", foc.worst.capital, 1e-9);
    rep.at_most("firm_foc.production", foc.worst.production, 1e-9);
    rep.at_most("firm_foc.demand_markup", foc.worst.demand, 1e-9);
    rep.at_most("firm_foc.sorting", foc.worst.sorting, 1e-9);
    rep.at_most("firm_foc.independent_solution", foc.worst.independent, 1e-9);

    const ComparativeStaticsResult pr = proposition_suite(cfg.proposition_points, cfg.proposition_grid, cfg.seed, cfg.threads);
    auto prop = [&](const char* name, std::size_t v) { rep.at_most(std::string("comparative_statics.") + name, double(v), 0.0); };
    prop("lambda_increasing_in_z", pr.lambda_increasing_in_z);
    prop("wage_variance_decreasing_in_z", pr.wage_variance_decreasing_in_z);
    prop("tfpq_variance_increasing_in_z", pr.tfpq_variance_increasing_in_z);
    prop("tfpr_variance_increasing_in_z", pr.tfpr_variance_increasing_in_z);
    prop("tfpr_loading_positive", pr.tfpr_loading_positive);
    prop("a_neutrality", pr.a_neutrality);
    prop("sigma_neutrality", pr.sigma_neutrality);
    prop("tfpq_variance_decreasing_in_lambda_theta", pr.tfpq_variance_decreasing_in_lambda_theta);
    prop("tfpr_variance_decreasing_in_lambda_theta", pr.tfpr_variance_decreasing_in_lambda_theta);
    prop("wage_variance_increasing_as_lambda_theta_falls", pr.wage_variance_increasing_as_lambda_theta_falls);
    prop("s_decreasing_in_lambda_theta", pr.s_decreasing_in_lambda_theta);

    const ThetaCheckResult th = theta_process_check(ThetaRedrawProcess{}, cfg.theta_firms, cfg.theta_periods,
                                                    derive_seed(cfg.seed, "theta-check"), cfg.threads);
    rep.checks.push_back({"theta_process.ks_checkpoints_passed", double(th.passes), 4.0, th.pass, false});
    bool rejected = false;
    try {
        ThetaRedrawProcess bad;
        bad.lambda_high = 3.0;  // above lambda_low / rho
        validate_process(bad);
    } catch (const InvalidProcess&) {
        rejected = true;
    }
    rep.checks.push_back({"negative_control.theta_process_invalid", rejected ? 1.0 : 0.0, 0.0, rejected, true});

    rep.sort();
    return rep;
}

}  // namespace sortcycle::verify
