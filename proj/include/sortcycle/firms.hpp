#pragma once

// Firm-level closed forms, the wage schedule and matching function, analytic
// dispersion formulas, seeded cross-sections and population revenue shares.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "sortcycle/errors.hpp"
#include "sortcycle/parallel.hpp"
#include "sortcycle/quadrature.hpp"
#include "sortcycle/rng.hpp"
#include "sortcycle/statics.hpp"

namespace sortcycle {

/// Firm state; the firm's job type h equals theta.
struct FirmDraw {
    double theta = 0.0;
    double eps1 = 0.0;
    double eps2 = 0.0;
};

struct FirmOutcome {
    double Q = 0.0;
    double k = 0.0;
    double l = 0.0;
    double chi = 0.0;
    double P = 0.0;
    double tau1 = 1.0;
    double tau2 = 1.0;
    double revenue = 0.0;
    double wage_bill = 0.0;   // w(matched_x) * l, the income workers receive
    double log_tfpq = 0.0;
    double log_tfpr = 0.0;
    double matched_x = 0.0;
    FirmDraw draw;
};

/// Positive assortative matching: job type h for a worker of type x.
inline double matching(const StaticEquilibrium& eq, double x) {
    return eq.params.lambda_x / eq.lambda_t * x;
}

/// Slope of log w(x) in x.
inline double wage_gradient(const StaticEquilibrium& eq) {
    const ModelParams& m = eq.params;
    return (m.psi / m.gamma) * std::pow(m.lambda_x / eq.lambda_t, 1.0 - m.psi);
}

inline double log_wage(const StaticEquilibrium& eq, double x) {
    return std::log(eq.w0) + wage_gradient(eq) * x;
}

inline double wage(const StaticEquilibrium& eq, double x) { return std::exp(log_wage(eq, x)); }

inline FirmOutcome firm_outcome(const StaticEquilibrium& eq, const FirmDraw& draw) {
    const ModelParams& m = eq.params;
    const Coefficients& c = eq.coefficients;
    const double eq_q = c.eta_Q;
    const double s = c.eta_Q_theta * draw.theta - m.gamma * draw.eps1 - m.alpha * draw.eps2;
    const double ke = c.kappa * eq_q;

    const double log_Q = std::log(eq.Q_bar) + eq_q * s;
    const double log_k = std::log(eq.k_bar) + ke * s - draw.eps2;
    const double log_chi = std::log(eq.chi_bar) - eq_q / m.xi * s;
    const double log_l = std::log(eq.l_bar) + c.eta_l_theta * draw.theta - (ke * m.gamma + 1.0) * draw.eps1 -
                         ke * m.alpha * draw.eps2;
    const double log_P = log_chi - std::log(c.kappa);

    FirmOutcome f;
    f.draw = draw;
    f.Q = detail::checked_exp(log_Q, "firm output");
    f.k = detail::checked_exp(log_k, "firm capital");
    f.chi = detail::checked_exp(log_chi, "firm marginal cost");
    f.l = detail::checked_exp(log_l, "firm labor");
    f.P = detail::checked_exp(log_P, "firm price");
    f.tau1 = detail::checked_exp(eq.shock.z * draw.theta + draw.eps1, "labor wedge");
    f.tau2 = detail::checked_exp(draw.eps2, "capital wedge");
    f.revenue = detail::checked_exp(log_P + log_Q, "firm revenue");
    f.matched_x = eq.lambda_t / m.lambda_x * draw.theta;
    f.wage_bill = detail::checked_exp(log_wage(eq, f.matched_x) + log_l, "wage bill");
    f.log_tfpq = c.match_term * draw.theta;
    f.log_tfpr = log_P + f.log_tfpq;
    return f;
}

/// Coefficient on theta in log TFPR; strictly positive for valid inputs.
inline double tfpr_type_loading(const SortingTerms& t, double xi) {
    return t.match_term - t.eta_Q * t.eta_Q_theta / xi;
}

struct DispersionMoments {
    double var_log_wage = 0.0;
    double var_log_tfpq = 0.0;
    double var_log_tfpr = 0.0;
};

/// Closed-form cross-sectional variances. Needs only lambda_t, so it is defined
/// even where the capital-demand guard fails.
inline DispersionMoments analytic_moments(const ValidatedParams& p, const AggregateShockState& s, double lambda_t) {
    const ModelParams& m = p.values();
    const SortingTerms t = sorting_terms(p, s, lambda_t);
    const double inv_lt2 = 1.0 / (s.lambda_theta_t * s.lambda_theta_t);
    DispersionMoments d;
    d.var_log_wage = m.psi == 0.0 ? 0.0
                                  : (m.psi / m.gamma) * (m.psi / m.gamma) * std::pow(m.lambda_x, -2.0 * m.psi) *
                                        std::pow(lambda_t, 2.0 * m.psi - 2.0);
    d.var_log_tfpq = t.match_term * t.match_term * inv_lt2;
    const double loading = tfpr_type_loading(t, m.xi);
    const double noise = t.eta_Q / m.xi;
    d.var_log_tfpr = loading * loading * inv_lt2 +
                     noise * noise * (m.gamma * m.gamma * s.sigma1_t * s.sigma1_t +
                                      m.alpha * m.alpha * s.sigma2_t * s.sigma2_t);
    return d;
}

inline DispersionMoments analytic_moments(const StaticEquilibrium& eq) {
    return analytic_moments(validate(eq.params), eq.shock, eq.lambda_t);
}

struct FirmPanel {
    std::vector<FirmOutcome> firms;
    std::uint64_t seed = 0;
};

// Random streams for the cross-section.
inline constexpr std::uint64_t kStreamTheta = 1;
inline constexpr std::uint64_t kStreamEps1 = 2;
inline constexpr std::uint64_t kStreamEps2 = 3;
inline constexpr std::uint64_t kStreamWorker = 4;

/// Draw i uses counter i on each stream, so the panel is identical for any thread count.
inline FirmDraw firm_draw(const AggregateShockState& s, std::uint64_t seed, std::uint64_t i) {
    const CounterRng th(seed, kStreamTheta), e1(seed, kStreamEps1), e2(seed, kStreamEps2);
    return {th.exponential(i, s.lambda_theta_t), s.sigma1_t * e1.normal(i), s.sigma2_t * e2.normal(i)};
}

inline FirmPanel sample_cross_section(const StaticEquilibrium& eq, std::size_t n, std::uint64_t seed,
                                      unsigned threads = 1) {
    if (n == 0) throw DomainError("sample_cross_section: n must be at least 1");
    FirmPanel panel;
    panel.seed = seed;
    panel.firms.resize(n);
    parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) panel.firms[i] = firm_outcome(eq, firm_draw(eq.shock, seed, i));
    });
    return panel;
}

struct CrossSectionMoments {
    double var_log_wage = 0.0;          // employment-weighted over firms
    double var_log_wage_workers = 0.0;  // over a worker sample x ~ Exp(lambda_x) of the same size
    double var_log_tfpq = 0.0;
    double var_log_tfpr = 0.0;
    double labor_share = 0.0;           // aggregate Y_l / Y
    double rev_share_top10 = 0.0;
    double rev_share_p50_p90 = 0.0;
    std::size_t n_firms = 0;
    std::uint64_t seed = 0;
};

namespace detail {
inline double plain_variance(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return acc / n;
}
}  // namespace detail

/// Revenue shares use nearest-rank percentiles on the revenue-sorted panel:
/// the top group holds the n - ceil(0.9 n) largest firms, the middle group the
/// ceil(0.9 n) - ceil(0.5 n) next ones. Ties keep draw order.
inline CrossSectionMoments cross_section_moments(const FirmPanel& panel, const StaticEquilibrium& eq) {
    const auto& firms = panel.firms;
    if (firms.empty()) throw EmptyPanel("cross_section_moments: empty panel");
    const std::size_t n = firms.size();

    CrossSectionMoments out;
    out.n_firms = n;
    out.seed = panel.seed;
    out.labor_share = eq.Y_l / eq.Y;

    std::vector<double> tfpq(n), tfpr(n);
    double sw = 0.0, mean_w = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        tfpq[i] = firms[i].log_tfpq;
        tfpr[i] = firms[i].log_tfpr;
        sw += firms[i].l;
        mean_w += firms[i].l * log_wage(eq, firms[i].matched_x);
    }
    mean_w /= sw;
    double var_w = 0.0;
    for (const auto& f : firms) {
        const double d = log_wage(eq, f.matched_x) - mean_w;
        var_w += f.l * d * d;
    }
    out.var_log_wage = var_w / sw;
    out.var_log_tfpq = detail::plain_variance(tfpq);
    out.var_log_tfpr = detail::plain_variance(tfpr);

    std::vector<double> workers(n);
    const CounterRng wr(panel.seed, kStreamWorker);
    for (std::size_t i = 0; i < n; ++i) workers[i] = log_wage(eq, wr.exponential(i, eq.params.lambda_x));
    out.var_log_wage_workers = detail::plain_variance(workers);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return firms[a].revenue > firms[b].revenue; });
    const auto rank90 = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(n)));
    const auto rank50 = static_cast<std::size_t>(std::ceil(0.5 * static_cast<double>(n)));
    const std::size_t top = n - rank90;
    const std::size_t middle_end = n - rank50;
    double total = 0.0, top_sum = 0.0, mid_sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const double rev = firms[order[r]].revenue;
        total += rev;
        if (r < top) top_sum += rev;
        else if (r < middle_end) mid_sum += rev;
    }
    out.rev_share_top10 = top_sum / total;
    out.rev_share_p50_p90 = mid_sum / total;
    return out;
}

struct RevenueShares {
    double top10 = 0.0;
    double p50_p90 = 0.0;
};

namespace detail {

/// Log revenue up to a constant: X = a*theta + u, theta ~ Exp(lambda_theta), u ~ N(0, su^2).
struct LogRevenueLaw {
    double a = 0.0;
    double rate = 1.0;  // lambda_theta
    double su = 0.0;

    // P(X > x | u).
    double conditional_survival(double x, double u) const {
        const double c = x - u;
        if (a > 0.0) return c <= 0.0 ? 1.0 : std::exp(-rate / a * c);
        if (a < 0.0) return c >= 0.0 ? 0.0 : -std::expm1(rate / -a * c);  // 1 - e^{-rho(u-x)}, rho = rate/|a|
        return c < 0.0 ? 1.0 : 0.0;
    }
    // E[e^{X-u} 1{X > x} | u].
    double conditional_partial(double x, double u) const {
        const double c = x - u;
        if (a > 0.0) {
            const double rho = rate / a;
            return std::exp((1.0 - rho) * std::max(c, 0.0)) * rho / (rho - 1.0);
        }
        if (a < 0.0) {
            const double rho = rate / -a;
            if (c >= 0.0) return 0.0;
            return rho / (rho + 1.0) * -std::expm1((rho + 1.0) * c);
        }
        return c < 0.0 ? 1.0 : 0.0;
    }
    // E[f(x, u)] for u ~ N(shift, su^2), split at the kink u = x.
    template <class F>
    double over_u(F&& f, double x, double shift) const {
        if (su == 0.0) return f(x, shift);
        auto density = [&](double v) {
            return std::exp(-0.5 * (v / su) * (v / su)) / (su * std::sqrt(2.0 * std::numbers::pi)) * f(x, shift + v);
        };
        const double lo = -14.0 * su, hi = 14.0 * su;
        const double split = std::clamp(x - shift, lo, hi);
        double acc = 0.0;
        // For a <= 0 both integrands vanish on u <= x.
        if (split > lo && a > 0.0) acc += quad::integrate(density, lo, split, 1e-12, nullptr, 15);
        if (split < hi) acc += quad::integrate(density, split, hi, 1e-12, nullptr, 15);
        return acc;
    }
    double survival(double x) const {
        return over_u([this](double xx, double u) { return conditional_survival(xx, u); }, x, 0.0);
    }
    // E[e^X 1{X > x}] / E[e^u]: tilting by e^u shifts the normal mean to su^2.
    double partial(double x) const {
        return over_u([this](double xx, double u) { return conditional_partial(xx, u); }, x, su * su);
    }
    // E[e^X] / E[e^u]
    double mean() const {
        if (a > 0.0) return (rate / a) / (rate / a - 1.0);
        if (a < 0.0) return (rate / -a) / (rate / -a + 1.0);
        return 1.0;
    }
    double quantile_upper(double p) const {
        double lo = -1.0, hi = 1.0;
        for (int i = 0; survival(lo) < p; ++i, lo *= 2.0)
            if (i > 60) throw BracketFailure("revenue quantile: no lower bracket");
        for (int i = 0; survival(hi) > p; ++i, hi *= 2.0)
            if (i > 60) throw BracketFailure("revenue quantile: no upper bracket");
        boost::math::tools::eps_tolerance<double> tol(50);
        std::uintmax_t iters = 200;
        auto r = boost::math::tools::toms748_solve([&](double x) { return survival(x) - p; }, lo, hi, tol, iters);
        return 0.5 * (r.first + r.second);
    }
};

}  // namespace detail

/// Exact revenue shares of the continuum of firms. Finite-sample shares are
/// unreliable here: the revenue tail index is close to one at the baseline.
inline RevenueShares population_revenue_shares(const StaticEquilibrium& eq) {
    const ModelParams& m = eq.params;
    const Coefficients& c = eq.coefficients;
    const double ke = c.kappa * c.eta_Q;
    detail::LogRevenueLaw law;
    law.a = ke * c.eta_Q_theta;
    law.rate = eq.shock.lambda_theta_t;
    law.su = ke * std::sqrt(m.gamma * m.gamma * eq.shock.sigma1_t * eq.shock.sigma1_t +
                            m.alpha * m.alpha * eq.shock.sigma2_t * eq.shock.sigma2_t);
    if (law.a >= law.rate) throw UnboundedCapitalDemand("population revenue shares: infinite mean revenue");
    if (law.a == 0.0 && law.su == 0.0) return {0.1, 0.4};
    const double total = law.mean();
    const double q90 = law.quantile_upper(0.1);
    const double q50 = law.quantile_upper(0.5);
    const double above90 = law.partial(q90);
    const double above50 = law.partial(q50);
    return {above90 / total, (above50 - above90) / total};
}

}  // namespace sortcycle
