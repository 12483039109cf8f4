#pragma once

// Household block: steady states, time iteration on the Euler equation over a
// (K, z) grid, simulation, generalized impulse responses and shock paths.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/tools/roots.hpp>

#include "sortcycle/errors.hpp"
#include "sortcycle/firms.hpp"
#include "sortcycle/parallel.hpp"
#include "sortcycle/params.hpp"
#include "sortcycle/rng.hpp"
#include "sortcycle/statics.hpp"

namespace sortcycle {

/// Everything about one z state that does not depend on K.
struct StateProfile {
    StateStatics statics;
    DispersionMoments dispersion;
    RevenueShares revenue_shares;
    double labor_share = 0.0;  // Y_l / Y is scale free
};

inline StateProfile make_state_profile(const ValidatedParams& p, const AggregateShockState& s) {
    StateProfile prof{prepare_state(p, s), {}, {}, 0.0};
    const StaticEquilibrium eq = prof.statics.at(1.0);
    prof.dispersion = analytic_moments(eq);
    prof.revenue_shares = population_revenue_shares(eq);
    prof.labor_share = eq.Y_l / eq.Y;
    return prof;
}

/// The two-state economy seen by the household.
class Economy {
public:
    Economy(const ValidatedParams& p, const MarkovChain2& chain, double A = 1.0)
        : params_(p), chain_(chain), A_(A),
          states_{make_state_profile(p, baseline_shock(p, chain.z_low, A)),
                  make_state_profile(p, baseline_shock(p, chain.z_high, A))} {
        validate_chain(chain);
    }

    const ValidatedParams& params() const { return params_; }
    const MarkovChain2& chain() const { return chain_; }
    double A() const { return A_; }
    const StateProfile& state(int s) const { return states_[static_cast<std::size_t>(s)]; }

    StaticEquilibrium at(int s, double K) const { return state(s).statics.at(K); }
    /// (1 - delta) K + Y_l + Y_k + Y_d
    double resources(int s, double K) const {
        const StaticEquilibrium eq = at(s, K);
        return (1.0 - params_->delta) * K + eq.Y_l + eq.Y_k + eq.Y_d;
    }
    double gross_return(int s, double K) const { return at(s, K).R + 1.0 - params_->delta; }

private:
    ValidatedParams params_;
    MarkovChain2 chain_;
    double A_;
    std::array<StateProfile, 2> states_;
};

struct SteadyState {
    double K = 0.0;
    double C = 0.0;
    double R = 0.0;
};

/// Deterministic steady state with z held fixed: beta (R(K) + 1 - delta) = 1.
inline SteadyState steady_state(const ValidatedParams& p, double z_fixed, double A = 1.0) {
    const StateStatics st = prepare_state(p, baseline_shock(p, z_fixed, A));
    const double target = 1.0 / p->beta - 1.0 + p->delta;
    auto excess = [&](double K) { return st.at(K).R - target; };
    double lo = 1e-8, hi = 1.0;
    for (int i = 0; excess(hi) >= 0.0; ++i) {
        if (i > 200) throw BracketFailure("steady_state: no upper bracket for K");
        hi *= 2.0;
    }
    if (!(excess(lo) > 0.0)) throw BracketFailure("steady_state: R(K) not above target at the lower bracket");
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (excess(mid) > 0.0) lo = mid; else hi = mid;
    }
    SteadyState ss;
    ss.K = 0.5 * (lo + hi);
    const StaticEquilibrium eq = st.at(ss.K);
    ss.R = eq.R;
    ss.C = eq.Y_l + eq.Y_k + eq.Y_d - p->delta * ss.K;
    return ss;
}

struct GridSpec {
    std::size_t nodes = 400;
    double lower_factor = 0.25;  // times the smaller steady-state K; long crisis spells go below 0.5
    double upper_factor = 1.5;   // times the larger steady-state K
    double tolerance = 1e-9;     // sup-norm change in consumption
    std::size_t max_iterations = 10000;
    unsigned threads = 1;
};

/// Savings and consumption rules on a log-spaced capital grid.
struct Policy {
    std::vector<double> K_grid;
    std::array<double, 2> z_states{};
    std::array<std::vector<double>, 2> K_next;
    std::array<std::vector<double>, 2> C;
    double A = 1.0;
    std::size_t iterations = 0;

    double K_min() const { return K_grid.front(); }
    double K_max() const { return K_grid.back(); }

    /// Cubic spline of consumption in log K; K is clamped to the grid hull.
    double consumption(int s, double K) const {
        K = std::clamp(K, K_min(), K_max());
        return spline[static_cast<std::size_t>(s)](std::log(K));
    }

    // The grid is uniform in log K. Call after C changes.
    void fit() {
        const double h = std::log(K_grid[1] / K_grid[0]);
        for (std::size_t s = 0; s < 2; ++s)
            spline[s] = boost::math::interpolators::cardinal_cubic_b_spline<double>(C[s].begin(), C[s].end(),
                                                                                   std::log(K_grid[0]), h);
    }

    std::array<boost::math::interpolators::cardinal_cubic_b_spline<double>, 2> spline;
};

namespace detail {

/// Euler residual beta E[(c/C')(R' + 1 - delta)] - 1 given consumption c at (s, K).
inline double euler_gap(const Economy& econ, const Policy& pol, int s, double resources, double c) {
    const double K_next = resources - c;
    double expectation = 0.0;
    for (int sp = 0; sp < 2; ++sp) {
        const double prob = econ.chain().transition(s, sp);
        if (prob == 0.0) continue;
        expectation += prob * (c / pol.consumption(sp, K_next)) * econ.gross_return(sp, K_next);
    }
    return econ.params()->beta * expectation - 1.0;
}

inline double solve_node(const Economy& econ, const Policy& pol, int s, double resources) {
    const double c_hi = resources - pol.K_min();
    const double c_lo = std::max(resources - pol.K_max(), 1e-12 * resources);
    if (!(c_hi > c_lo)) throw NoConvergence("solve_policy: resources do not reach the grid hull");
    auto f = [&](double c) { return euler_gap(econ, pol, s, resources, c); };
    const double f_lo = f(c_lo);
    if (f_lo >= 0.0) return c_lo;
    const double f_hi = f(c_hi);
    if (f_hi <= 0.0) return c_hi;
    boost::math::tools::eps_tolerance<double> tol(52);
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(f, c_lo, c_hi, f_lo, f_hi, tol, iters);
    return 0.5 * (r.first + r.second);
}

}  // namespace detail

/// Time iteration on the Euler equation. Each sweep solves every node for
/// consumption given next period's rule, until the sup-norm change is below
/// grid.tolerance.
inline Policy solve_policy(const Economy& econ, const GridSpec& grid = {}) {
    if (grid.nodes < 5) throw DomainError("solve_policy: need at least five grid nodes");
    const ValidatedParams& p = econ.params();
    const double k0 = steady_state(p, econ.chain().z_low, econ.A()).K;
    const double k1 = steady_state(p, econ.chain().z_high, econ.A()).K;
    const double lo = grid.lower_factor * std::min(k0, k1);
    const double hi = grid.upper_factor * std::max(k0, k1);

    Policy pol;
    pol.A = econ.A();
    pol.z_states = {econ.chain().z_low, econ.chain().z_high};
    pol.K_grid.resize(grid.nodes);
    for (std::size_t i = 0; i < grid.nodes; ++i)
        pol.K_grid[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(grid.nodes - 1));

    std::array<std::vector<double>, 2> resources;
    for (int s = 0; s < 2; ++s) {
        auto& res = resources[static_cast<std::size_t>(s)];
        auto& c = pol.C[static_cast<std::size_t>(s)];
        res.resize(grid.nodes);
        c.resize(grid.nodes);
        for (std::size_t i = 0; i < grid.nodes; ++i) {
            res[i] = econ.resources(s, pol.K_grid[i]);
            c[i] = std::max(res[i] - pol.K_grid[i], 0.1 * res[i]);
        }
    }
    pol.fit();

    std::array<std::vector<double>, 2> updated = pol.C;
    for (std::size_t iter = 1; iter <= grid.max_iterations; ++iter) {
        parallel_for(2 * grid.nodes, grid.threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t idx = begin; idx < end; ++idx) {
                const int s = static_cast<int>(idx / grid.nodes);
                const std::size_t i = idx % grid.nodes;
                updated[static_cast<std::size_t>(s)][i] =
                    detail::solve_node(econ, pol, s, resources[static_cast<std::size_t>(s)][i]);
            }
        });
        double change = 0.0;
        for (std::size_t s = 0; s < 2; ++s)
            for (std::size_t i = 0; i < grid.nodes; ++i)
                change = std::max(change, std::fabs(updated[s][i] - pol.C[s][i]));
        pol.C = updated;
        pol.fit();
        pol.iterations = iter;
        if (change < grid.tolerance) {
            for (std::size_t s = 0; s < 2; ++s) {
                pol.K_next[s].resize(grid.nodes);
                for (std::size_t i = 0; i < grid.nodes; ++i) pol.K_next[s][i] = resources[s][i] - pol.C[s][i];
            }
            return pol;
        }
    }
    throw NoConvergence("solve_policy: no convergence after " + std::to_string(grid.max_iterations) +
                        " iterations");
}

/// Unit-free Euler residual at an arbitrary (s, K) inside the grid hull.
inline double euler_residual(const Economy& econ, const Policy& pol, int s, double K) {
    const double res = econ.resources(s, K);
    return detail::euler_gap(econ, pol, s, res, pol.consumption(s, K));
}

struct PeriodRecord {
    int state = 0;
    double z = 0.0;
    double K = 0.0;
    double Y = 0.0;
    double C = 0.0;
    double K_next = 0.0;
    double income = 0.0;  // Y_l + Y_k + Y_d
    double measured_tfp = 0.0;
    double lambda_t = 0.0;
    double var_log_wage = 0.0;
    double var_log_tfpq = 0.0;
    double var_log_tfpr = 0.0;
    double labor_share = 0.0;
    double rev_share_top10 = 0.0;
    double rev_share_p50_p90 = 0.0;
    double R = 0.0;
    double w0 = 0.0;
};

struct SimulationPath {
    std::vector<PeriodRecord> periods;
    std::uint64_t seed = 0;
    std::size_t burn_in = 0;
};

inline PeriodRecord record_period(const Economy& econ, const Policy& pol, int s, double K) {
    const StateProfile& prof = econ.state(s);
    const StaticEquilibrium eq = prof.statics.at(K);
    PeriodRecord r;
    r.state = s;
    r.z = prof.statics.shock.z;
    r.K = K;
    r.Y = eq.Y;
    r.income = eq.Y_l + eq.Y_k + eq.Y_d;
    r.C = pol.consumption(s, K);
    r.K_next = (1.0 - econ.params()->delta) * K + r.income - r.C;
    r.measured_tfp = measured_tfp(eq);
    r.lambda_t = eq.lambda_t;
    r.var_log_wage = prof.dispersion.var_log_wage;
    r.var_log_tfpq = prof.dispersion.var_log_tfpq;
    r.var_log_tfpr = prof.dispersion.var_log_tfpr;
    r.labor_share = eq.Y_l / eq.Y;
    r.rev_share_top10 = prof.revenue_shares.top10;
    r.rev_share_p50_p90 = prof.revenue_shares.p50_p90;
    r.R = eq.R;
    r.w0 = eq.w0;
    return r;
}

inline constexpr std::uint64_t kStreamZPath = hash_label("z-path");

/// Simulates T periods starting from state `initial_state` and capital K0
/// (default: the boom steady state). The z path uses counter t on the z-path stream.
inline SimulationPath simulate(const Economy& econ, const Policy& pol, std::size_t T, std::size_t burn_in,
                               std::uint64_t seed, std::optional<double> K0 = std::nullopt,
                               int initial_state = 0) {
    if (T <= burn_in) throw DomainError("simulate: T must exceed burn_in");
    if (pol.z_states[0] != econ.chain().z_low || pol.z_states[1] != econ.chain().z_high)
        throw DomainError("simulate: policy was solved for a different chain");
    double K = K0 ? *K0 : steady_state(econ.params(), econ.chain().z_low, econ.A()).K;
    const CounterRng rng(seed, kStreamZPath);
    SimulationPath path;
    path.seed = seed;
    path.burn_in = burn_in;
    path.periods.reserve(T);
    int s = initial_state;
    for (std::size_t t = 0; t < T; ++t) {
        // A binding lower corner returns K_min up to rounding in resources - c.
        if (K < pol.K_min() * (1.0 - 1e-12) || K > pol.K_max() * (1.0 + 1e-12))
            throw GridExit("simulate: capital " + std::to_string(K) + " left the grid hull", t);
        path.periods.push_back(record_period(econ, pol, s, K));
        K = path.periods.back().K_next;
        s = econ.chain().next(s, rng.uniform(t));
    }
    return path;
}

struct SimulationSummary {
    std::size_t periods = 0;  // post burn-in
    double labor_share = 0.0;
    double wage_inequality = 0.0;
    double rev_share_top10 = 0.0;
    double rev_share_p50_p90 = 0.0;
    double std_tfp = 0.0;
    double var_tfp = 0.0;
    double var_log_tfpq = 0.0;
    double var_log_tfpr = 0.0;
    double mean_log_Y = 0.0;
    double share_high_state = 0.0;
};

/// Time averages over the post-burn-in periods. Dispersion moments of the TFP
/// series use divisor n.
inline SimulationSummary summarize(const SimulationPath& path) {
    SimulationSummary s;
    const auto first = path.periods.begin() + static_cast<std::ptrdiff_t>(path.burn_in);
    const double n = static_cast<double>(path.periods.end() - first);
    s.periods = static_cast<std::size_t>(n);
    double tfp_mean = 0.0;
    for (auto it = first; it != path.periods.end(); ++it) {
        s.labor_share += it->labor_share;
        s.wage_inequality += it->var_log_wage;
        s.rev_share_top10 += it->rev_share_top10;
        s.rev_share_p50_p90 += it->rev_share_p50_p90;
        s.var_log_tfpq += it->var_log_tfpq;
        s.var_log_tfpr += it->var_log_tfpr;
        s.mean_log_Y += std::log(it->Y);
        s.share_high_state += it->state;
        tfp_mean += it->measured_tfp;
    }
    tfp_mean /= n;
    for (auto it = first; it != path.periods.end(); ++it)
        s.var_tfp += (it->measured_tfp - tfp_mean) * (it->measured_tfp - tfp_mean);
    s.var_tfp /= n;
    s.std_tfp = std::sqrt(s.var_tfp);
    s.labor_share /= n;
    s.wage_inequality /= n;
    s.rev_share_top10 /= n;
    s.rev_share_p50_p90 /= n;
    s.var_log_tfpq /= n;
    s.var_log_tfpr /= n;
    s.mean_log_Y /= n;
    s.share_high_state /= n;
    return s;
}

struct IRFResult {
    std::size_t horizon = 0;
    std::size_t n_episodes = 0;
    // treated minus control, per horizon 0..horizon
    std::vector<double> log_Y;
    std::vector<double> measured_tfp;
    std::vector<double> var_log_wage;
    std::vector<double> var_log_tfpq;
    std::vector<double> var_log_tfpr;
    std::vector<double> log_K;
    // mean levels at impact
    DispersionMoments treated_impact;
    DispersionMoments control_impact;
};

struct IRFConfig {
    std::size_t horizon = 40;
    std::size_t n_sims = 2000;
    std::size_t ergodic_burn_in = 500;
    std::size_t ergodic_length = 20000;
    unsigned threads = 1;
};

/// Generalized impulse response: pairs of paths share K0 (drawn from the boom
/// periods of a long simulation) and all future chain uniforms; the treated
/// path is forced into the high-z state at horizon 0, the control into the low.
inline IRFResult impulse_response(const Economy& econ, const Policy& pol, const IRFConfig& cfg, std::uint64_t seed) {
    if (cfg.n_sims == 0) throw DomainError("impulse_response: n_sims must be positive");
    const SimulationPath ergodic =
        simulate(econ, pol, cfg.ergodic_burn_in + cfg.ergodic_length, cfg.ergodic_burn_in,
                 derive_seed(seed, "irf-ergodic"));
    std::vector<double> boom_K;
    for (std::size_t t = cfg.ergodic_burn_in; t < ergodic.periods.size(); ++t)
        if (ergodic.periods[t].state == 0) boom_K.push_back(ergodic.periods[t].K);
    if (boom_K.empty()) boom_K.push_back(steady_state(econ.params(), econ.chain().z_low, econ.A()).K);

    const std::size_t H = cfg.horizon + 1;
    constexpr std::size_t kSeries = 6;
    std::vector<double> diffs(cfg.n_sims * H * kSeries);
    const CounterRng pick(seed, hash_label("irf-initial-capital"));

    parallel_for(cfg.n_sims, cfg.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto idx = std::min(boom_K.size() - 1,
                                      static_cast<std::size_t>(pick.uniform(i) * static_cast<double>(boom_K.size())));
            const CounterRng common(derive_seed(seed, "irf", i), kStreamZPath);
            double K_treated = boom_K[idx], K_control = boom_K[idx];
            int s_treated = 1, s_control = 0;
            for (std::size_t h = 0; h < H; ++h) {
                const PeriodRecord a = record_period(econ, pol, s_treated, K_treated);
                const PeriodRecord b = record_period(econ, pol, s_control, K_control);
                double* out = &diffs[(i * H + h) * kSeries];
                out[0] = std::log(a.Y) - std::log(b.Y);
                out[1] = a.measured_tfp - b.measured_tfp;
                out[2] = a.var_log_wage - b.var_log_wage;
                out[3] = a.var_log_tfpq - b.var_log_tfpq;
                out[4] = a.var_log_tfpr - b.var_log_tfpr;
                out[5] = std::log(a.K) - std::log(b.K);
                K_treated = a.K_next;
                K_control = b.K_next;
                const double u = common.uniform(h);
                s_treated = econ.chain().next(s_treated, u);
                s_control = econ.chain().next(s_control, u);
            }
        }
    });

    IRFResult r;
    r.horizon = cfg.horizon;
    r.n_episodes = cfg.n_sims;
    std::array<std::vector<double>*, kSeries> series{&r.log_Y, &r.measured_tfp, &r.var_log_wage,
                                                     &r.var_log_tfpq, &r.var_log_tfpr, &r.log_K};
    for (auto* v : series) v->assign(H, 0.0);
    for (std::size_t i = 0; i < cfg.n_sims; ++i)
        for (std::size_t h = 0; h < H; ++h)
            for (std::size_t k = 0; k < kSeries; ++k) (*series[k])[h] += diffs[(i * H + h) * kSeries + k];
    for (auto* v : series)
        for (double& x : *v) x /= static_cast<double>(cfg.n_sims);
    r.treated_impact = econ.state(1).dispersion;
    r.control_impact = econ.state(0).dispersion;
    return r;
}

/// Any of the exogenous processes that can drive the shock state.
using ShockProcess = std::variant<MarkovChain2, ThetaRedrawProcess, LogVolProcess>;

/// Sequence of shock states of length T. Only the fields the process drives
/// change; the rest come from `base`. Chains start in their low state, log
/// volatilities at their centres.
inline std::vector<AggregateShockState> generate_shock_path(const ShockProcess& process,
                                                            const AggregateShockState& base, std::size_t T,
                                                            std::uint64_t seed) {
    std::vector<AggregateShockState> path(T, base);
    std::visit(
        [&](const auto& proc) {
            using P = std::decay_t<decltype(proc)>;
            if constexpr (std::is_same_v<P, MarkovChain2>) {
                validate_chain(proc);
                const CounterRng rng(seed, kStreamZPath);
                int s = 0;
                for (std::size_t t = 0; t < T; ++t) {
                    path[t].z = proc.level(s);
                    s = proc.next(s, rng.uniform(t));
                }
            } else if constexpr (std::is_same_v<P, ThetaRedrawProcess>) {
                validate_process(proc);
                const CounterRng rng(seed, hash_label("theta-rate"));
                int s = 0;
                for (std::size_t t = 0; t < T; ++t) {
                    path[t].lambda_theta_t = proc.rate(s);
                    s = proc.next(s, rng.uniform(t));
                }
            } else {
                validate_process(proc);
                const CounterRng r1(seed, hash_label("log-vol-1")), r2(seed, hash_label("log-vol-2"));
                double x1 = 0.0, x2 = 0.0;  // deviations from the centres
                for (std::size_t t = 0; t < T; ++t) {
                    if (t > 0) {
                        x1 = proc.rho1 * x1 + proc.sigma_l * r1.normal(t);
                        x2 = proc.rho2 * x2 + proc.sigma_k * r2.normal(t);
                    }
                    path[t].sigma1_t = std::exp(proc.log_center1 + x1);
                    path[t].sigma2_t = proc.has_sigma2 ? std::exp(proc.log_center2 + x2) : 0.0;
                }
            }
        },
        process);
    return path;
}

}  // namespace sortcycle
