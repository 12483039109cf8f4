#pragma once

// Within-period equilibrium: the job-distribution rate, the firm-level
// coefficient block, and the closed-form aggregate prices and quantities.
// Powers are taken in log space; exponents beyond +-700 raise NonFinite.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sortcycle/errors.hpp"
#include "sortcycle/params.hpp"

namespace sortcycle {

namespace detail {
inline double checked_exp(double log_value, const char* what) {
    if (!std::isfinite(log_value) || std::fabs(log_value) > 700.0)
        throw NonFinite(std::string("non-finite or overflowing ") + what);
    return std::exp(log_value);
}
inline double checked_log(double value, const char* what) {
    if (!std::isfinite(value) || value <= 0.0)
        throw NonFinite(std::string("non-positive or non-finite ") + what);
    return std::log(value);
}
}  // namespace detail

/// G(lambda) = b (lambda/lambda_x)^psi + lambda - (d z + lambda_theta).
struct JobEquation {
    double b = 0.0;
    double d = 0.0;
    double rhs = 0.0;  // d z + lambda_theta
    double psi = 0.0;
    double lambda_x = 1.0;

    double match_term(double lambda) const { return psi == 0.0 ? 1.0 : std::pow(lambda / lambda_x, psi); }
    double operator()(double lambda) const { return b * match_term(lambda) + lambda - rhs; }
    double derivative(double lambda) const {
        if (psi == 0.0) return 1.0;
        return 1.0 + b * psi / lambda_x * std::pow(lambda / lambda_x, psi - 1.0);
    }
};

inline JobEquation job_equation(const ValidatedParams& p, const AggregateShockState& s) {
    const ModelParams& m = p.values();
    const double D = p.drs_denominator();
    JobEquation g;
    g.b = ((m.xi - 1.0) * (m.gamma - m.psi * (1.0 - m.alpha)) - m.psi) / (m.gamma * D);
    g.d = (1.0 + (m.xi - 1.0) * (1.0 - m.alpha)) / D;
    g.rhs = g.d * s.z + s.lambda_theta_t;
    g.psi = m.psi;
    g.lambda_x = m.lambda_x;
    return g;
}

/// Unique positive root of the job-distribution equation.
///
/// For 0 < psi < 1, G(0) = -(d z + lambda_theta) < 0 and G is either increasing
/// or convex, so the root sits on the increasing branch. We bracket it from the
/// right, then run Newton safeguarded by bisection. The boundary cases psi = 0
/// and psi = 1 have closed forms and may have no positive root.
inline double solve_lambda(const ValidatedParams& p, const AggregateShockState& s) {
    validate_shock(s);
    const JobEquation g = job_equation(p, s);
    const double c = g.rhs;
    const double tol = 1e-12 * std::max(1.0, s.lambda_theta_t);

    if (p->psi == 0.0) {
        const double root = c - g.b;
        if (!(root > 0.0)) throw NoRoot("job equation has no positive root at psi = 0");
        return root;
    }
    if (p->psi == 1.0) {
        const double slope = 1.0 + g.b / g.lambda_x;
        if (!(slope > 0.0)) throw NoRoot("job equation has no positive root at psi = 1");
        return c / slope;
    }

    double lo = 0.0;
    double hi = c + std::fabs(g.b) * std::pow(1.0 + c / g.lambda_x, g.psi) + 1.0;
    for (int i = 0; g(hi) <= 0.0; ++i) {
        if (i > 200) throw NoRoot("could not bracket the job-distribution root");
        lo = hi;
        hi *= 2.0;
    }

    double x = hi;
    double gx = g(x);
    for (int it = 0; it < 300; ++it) {
        if (gx == 0.0) return x;
        if (gx < 0.0) lo = x; else hi = x;
        const double slope = g.derivative(x);
        double next = slope > 0.0 ? x - gx / slope : lo - 1.0;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        const double step = std::fabs(next - x);
        x = next;
        gx = g(x);
        if (step <= 4.0 * std::numeric_limits<double>::epsilon() * x) break;
    }
    if (!(std::fabs(gx) <= tol))
        throw NoConvergence("job-distribution root residual " + std::to_string(gx) + " above tolerance");
    return x;
}

/// Type-dependence of firm outcomes given lambda_t. No boundedness guard.
struct SortingTerms {
    double lambda_t = 0.0;
    double match_term = 1.0;    // (lambda_t / lambda_x)^psi
    double eta_Q = 0.0;
    double eta_Q_theta = 0.0;
    double eta_l_theta = 0.0;
    double kappa = 0.0;
};

inline SortingTerms sorting_terms(const ValidatedParams& p, const AggregateShockState& s, double lambda_t) {
    const ModelParams& m = p.values();
    SortingTerms t;
    t.lambda_t = lambda_t;
    t.match_term = m.psi == 0.0 ? 1.0 : std::pow(lambda_t / m.lambda_x, m.psi);
    t.kappa = p.kappa();
    t.eta_Q = p.eta_Q();
    t.eta_Q_theta = -m.gamma * s.z + (1.0 - m.psi) * t.match_term;
    t.eta_l_theta = t.kappa * t.eta_Q * t.eta_Q_theta - s.z - (m.psi / m.gamma) * t.match_term;
    return t;
}

struct Coefficients {
    double eta_Q = 0.0;
    double eta_Q_theta = 0.0;
    double eta_l_theta = 0.0;
    double B1 = 0.0;
    double B2 = 0.0;
    double B3 = 0.0;
    double kappa = 0.0;
    double match_term = 1.0;            // (lambda_t / lambda_x)^psi
    double capital_denominator = 0.0;   // lambda_theta - kappa eta_Q eta_Q_theta
};

inline Coefficients coefficients(const ValidatedParams& p, const AggregateShockState& s, double lambda_t) {
    const SortingTerms t = sorting_terms(p, s, lambda_t);
    const ModelParams& m = p.values();
    Coefficients c;
    c.eta_Q = t.eta_Q;
    c.eta_Q_theta = t.eta_Q_theta;
    c.eta_l_theta = t.eta_l_theta;
    c.kappa = t.kappa;
    c.match_term = t.match_term;
    c.capital_denominator = s.lambda_theta_t - t.kappa * t.eta_Q * t.eta_Q_theta;
    if (!(c.capital_denominator > 0.0))
        throw UnboundedCapitalDemand("lambda_theta - kappa*eta_Q*eta_Q_theta = " +
                                     std::to_string(c.capital_denominator) + " <= 0");
    const double ke = t.kappa * t.eta_Q;
    const double s1 = s.sigma1_t * s.sigma1_t;
    const double s2 = s.sigma2_t * s.sigma2_t;
    const double lg = ke * m.gamma;
    const double la = ke * m.alpha;
    c.B1 = std::exp(0.5 * ((lg + 1.0) * (lg + 1.0) * s1 + la * la * s2));
    c.B2 = std::exp(0.5 * (lg * lg * s1 + (la + 1.0) * (la + 1.0) * s2)) / c.capital_denominator;
    c.B3 = std::exp(0.5 * (lg * lg * s1 + la * la * s2)) / c.capital_denominator;
    return c;
}

struct StaticEquilibrium {
    double lambda_t = 0.0;
    Coefficients coefficients;
    double w0 = 0.0;
    double R = 0.0;
    double Y = 0.0;
    double Q_bar = 0.0;
    double k_bar = 0.0;
    double chi_bar = 0.0;
    double l_bar = 0.0;
    double M = 0.0;
    double C_in = 0.0;
    double Y_l = 0.0;
    double Y_k = 0.0;
    double Y_d = 0.0;
    AggregateShockState shock;
    double K = 0.0;
    ModelParams params;  // the validated parameters this solution was built from
};

struct FactorIncomes {
    double Y_l = 0.0;
    double Y_k = 0.0;
    double Y_d = 0.0;
    double total() const { return Y_l + Y_k + Y_d; }
};

/// Labor income, capital income and distributed profits. With wedges these
/// need not sum to Y.
inline FactorIncomes factor_incomes(const ValidatedParams& p, const AggregateShockState& s,
                                    const StaticEquilibrium& eq) {
    const Coefficients& c = eq.coefficients;
    const double labor_denominator = c.capital_denominator + s.z;
    if (!(c.capital_denominator > 0.0) || !(labor_denominator > 0.0))
        throw UnboundedCapitalDemand("factor incomes: unbounded integrals");
    const double base = s.lambda_theta_t * eq.chi_bar * eq.Q_bar;
    FactorIncomes f;
    f.Y_l = p->gamma * base * c.B1 / labor_denominator;
    f.Y_k = p->alpha * base * c.B2;
    f.Y_d = (1.0 / c.kappa - p->gamma - p->alpha) * base * c.B3;
    return f;
}

/// Closed-form prices and quantities given lambda_t, the coefficient block and K.
inline StaticEquilibrium aggregates(const ValidatedParams& p, const AggregateShockState& s, double lambda_t,
                                    const Coefficients& c, double K) {
    using detail::checked_exp;
    using detail::checked_log;
    if (!(K > 0.0) || !std::isfinite(K)) throw DomainError("aggregates: K must be positive and finite");
    if (!(c.capital_denominator > 0.0)) throw UnboundedCapitalDemand("aggregates: guard failed");
    const ModelParams& m = p.values();
    const double xi = m.xi, a = m.alpha, g = m.gamma, kap = c.kappa;

    const double log_lt = std::log(s.lambda_theta_t);
    const double log_K = checked_log(K, "capital");
    const double log_A = checked_log(s.A, "productivity");
    const double log_LB1 = log_lt + std::log(c.B1);
    const double log_LB2 = log_lt + std::log(c.B2);
    const double log_LB3 = log_lt + std::log(c.B3);

    const double log_M = log_LB3 * xi / (xi - 1.0);
    const double log_w0 = log_A + std::log(g) + std::log(kap) + log_LB3 / (xi - 1.0) +
                          (g - 1.0) * (std::log(lambda_t) - log_LB1) + a * (log_K - log_LB2);
    const double log_Cin = log_A + a * log_K + g * std::log(kap) - a * log_lt - a * std::log(c.B2) +
                           (g / xi) * log_M + g * (std::log(g) - log_w0);
    const double expo = c.eta_Q / (1.0 - c.eta_Q * (-a + (a + g) / xi));
    const double log_Qbar = expo * log_Cin;
    const double log_Y = log_M + log_Qbar;
    const double log_R = log_LB2 + std::log(a) + std::log(kap) + log_Qbar + log_LB3 / (xi - 1.0) - log_K;
    const double log_chi = std::log(kap) - log_Qbar / xi + log_Y / xi;
    const double log_k = std::log(a) + std::log(kap) + kap * log_Qbar + log_Y / xi - log_R;
    const double log_l = (log_chi + log_A + a * log_k + std::log(g) - log_w0) / (1.0 - g);

    StaticEquilibrium eq;
    eq.lambda_t = lambda_t;
    eq.coefficients = c;
    eq.M = checked_exp(log_M, "M");
    eq.w0 = checked_exp(log_w0, "w0");
    eq.C_in = checked_exp(log_Cin, "C_in");
    eq.Q_bar = checked_exp(log_Qbar, "Q_bar");
    eq.Y = checked_exp(log_Y, "Y");
    eq.R = checked_exp(log_R, "R");
    eq.chi_bar = checked_exp(log_chi, "chi_bar");
    eq.k_bar = checked_exp(log_k, "k_bar");
    eq.l_bar = checked_exp(log_l, "l_bar");
    eq.shock = s;
    eq.K = K;
    eq.params = m;
    const FactorIncomes f = factor_incomes(p, s, eq);
    eq.Y_l = f.Y_l;
    eq.Y_k = f.Y_k;
    eq.Y_d = f.Y_d;
    return eq;
}

/// Aggregate TFP with unit aggregate labor: log Y - alpha log K.
inline double measured_tfp(const StaticEquilibrium& eq) {
    return std::log(eq.Y) - eq.params.alpha * std::log(eq.K);
}

/// lambda_t and the coefficient block for one shock state; aggregates at any K
/// are then a handful of closed-form powers.
struct StateStatics {
    ValidatedParams params;
    AggregateShockState shock;
    double lambda_t;
    Coefficients coeffs;

    StaticEquilibrium at(double K) const { return aggregates(params, shock, lambda_t, coeffs, K); }
};

inline StateStatics prepare_state(const ValidatedParams& p, const AggregateShockState& s) {
    const double lambda_t = solve_lambda(p, s);
    return StateStatics{p, s, lambda_t, coefficients(p, s, lambda_t)};
}

inline StaticEquilibrium solve_static(const ValidatedParams& p, const AggregateShockState& s, double K) {
    return prepare_state(p, s).at(K);
}

}  // namespace sortcycle
