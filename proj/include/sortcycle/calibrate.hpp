#pragma once

// Moment matching for (psi, z_high, lambda_theta, lambda_x, sigma1) with the
// remaining parameters held fixed. Box-constrained Nelder-Mead from
// Latin-hypercube starts; every evaluation reuses the same simulation seed.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "sortcycle/dynamics.hpp"
#include "sortcycle/errors.hpp"
#include "sortcycle/parallel.hpp"
#include "sortcycle/params.hpp"
#include "sortcycle/rng.hpp"

namespace sortcycle {

inline constexpr std::size_t kFreeDim = 5;

struct FreeParams {
    double psi = 0.4022;
    double z_high = 0.3984;
    double lambda_theta = 2.6160;
    double lambda_x = 0.8681;
    double sigma1 = 0.2293;

    std::array<double, kFreeDim> to_array() const { return {psi, z_high, lambda_theta, lambda_x, sigma1}; }
    static FreeParams from_array(const std::array<double, kFreeDim>& a) { return {a[0], a[1], a[2], a[3], a[4]}; }
};

inline constexpr std::array<const char*, kFreeDim> kFreeNames{"psi", "z_high", "lambda_theta", "lambda_x", "sigma1"};

/// A dimension with lower == upper is held fixed at that value.
struct Bounds {
    FreeParams lower{0.01, 0.0, 0.1, 0.1, 0.0};
    FreeParams upper{0.99, 2.0, 20.0, 20.0, 2.0};
};

struct Target {
    double value = 0.0;
    double weight = 1.0;  // zero disables the target
};

/// std_tfp is matched on the variance scale by default (see TfpScale).
struct TargetSet {
    Target labor_share{0.6097, 1.0};
    Target wage_inequality{0.7666, 1.0};
    Target rev_share_top10{0.9074, 1.0};
    Target rev_share_p50_p90{0.0842, 1.0};
    Target std_tfp{0.0090, 1.0};
    // Off by default; used for partial fits.
    Target var_log_tfpq{0.0, 0.0};
    Target var_log_tfpr{0.0, 0.0};
};

enum class TfpScale { variance, standard_deviation };

struct SimConfig {
    bool fast = false;  // analytic moments under the stationary z distribution
    std::size_t T = 10000;
    std::size_t burn_in = 100;
    GridSpec grid{};
    TfpScale tfp_scale = TfpScale::variance;
};

struct ModelMoments {
    double labor_share = 0.0;
    double wage_inequality = 0.0;
    double rev_share_top10 = 0.0;
    double rev_share_p50_p90 = 0.0;
    double std_tfp = 0.0;  // on the configured scale
    double var_log_tfpq = 0.0;
    double var_log_tfpr = 0.0;
};

/// For psi > 0 the units of firm types are not identified: theta -> c theta
/// with (lambda_theta, z_high, lambda_x) -> (lambda_theta / c, z_high / c,
/// lambda_x c^{(1-psi)/psi}) leaves every moment unchanged. Calibration pins the scale by reporting the member of
/// this family with a chosen lambda_theta.
inline FreeParams rescale_type_units(FreeParams f, double c) {
    if (!(c > 0.0)) throw DomainError("rescale_type_units: scale must be positive");
    f.lambda_theta /= c;
    f.z_high /= c;
    if (!(f.psi > 0.0)) throw DomainError("rescale_type_units: needs psi > 0");
    f.lambda_x *= std::pow(c, (1.0 - f.psi) / f.psi);
    return f;
}

inline FreeParams normalize_type_scale(const FreeParams& f, double lambda_theta) {
    return rescale_type_units(f, f.lambda_theta / lambda_theta);
}

inline ModelParams apply_free(ModelParams fixed, const FreeParams& f) {
    fixed.psi = f.psi;
    fixed.lambda_theta = f.lambda_theta;
    fixed.lambda_x = f.lambda_x;
    fixed.sigma1 = f.sigma1;
    return fixed;
}

inline MarkovChain2 apply_free(MarkovChain2 chain, const FreeParams& f) {
    chain.z_high = f.z_high;
    return chain;
}

/// Fast mode weights the two state profiles by the stationary distribution.
/// Measured TFP depends on z only, so its ergodic variance is
/// pi_low pi_high (tfp_low - tfp_high)^2 and needs no simulation either.
inline ModelMoments model_moments(const FreeParams& free, const ModelParams& fixed, const MarkovChain2& chain,
                                  const SimConfig& cfg, std::uint64_t seed) {
    const ValidatedParams p = validate(apply_free(fixed, free));
    const MarkovChain2 ch = apply_free(chain, free);
    const Economy econ(p, ch);
    ModelMoments m;
    double var_tfp = 0.0;
    if (cfg.fast) {
        const auto pi = stationary_distribution(ch);
        for (int s = 0; s < 2; ++s) {
            const StateProfile& prof = econ.state(s);
            const double w = pi[static_cast<std::size_t>(s)];
            m.labor_share += w * prof.labor_share;
            m.wage_inequality += w * prof.dispersion.var_log_wage;
            m.rev_share_top10 += w * prof.revenue_shares.top10;
            m.rev_share_p50_p90 += w * prof.revenue_shares.p50_p90;
            m.var_log_tfpq += w * prof.dispersion.var_log_tfpq;
            m.var_log_tfpr += w * prof.dispersion.var_log_tfpr;
        }
        const double gap = measured_tfp(econ.at(0, 1.0)) - measured_tfp(econ.at(1, 1.0));
        var_tfp = pi[0] * pi[1] * gap * gap;
    } else {
        GridSpec grid = cfg.grid;
        grid.threads = 1;
        const Policy pol = solve_policy(econ, grid);
        const SimulationSummary s = summarize(simulate(econ, pol, cfg.T, cfg.burn_in, seed));
        m.labor_share = s.labor_share;
        m.wage_inequality = s.wage_inequality;
        m.rev_share_top10 = s.rev_share_top10;
        m.rev_share_p50_p90 = s.rev_share_p50_p90;
        m.var_log_tfpq = s.var_log_tfpq;
        m.var_log_tfpr = s.var_log_tfpr;
        var_tfp = s.var_tfp;
    }
    m.std_tfp = cfg.tfp_scale == TfpScale::variance ? var_tfp : std::sqrt(var_tfp);
    return m;
}

inline double target_distance(const ModelMoments& m, const TargetSet& t) {
    double sum = 0.0;
    auto add = [&sum](double model, const Target& target) {
        if (target.weight == 0.0) return;
        const double dev = model / target.value - 1.0;
        sum += target.weight * dev * dev;
    };
    add(m.labor_share, t.labor_share);
    add(m.wage_inequality, t.wage_inequality);
    add(m.rev_share_top10, t.rev_share_top10);
    add(m.rev_share_p50_p90, t.rev_share_p50_p90);
    add(m.std_tfp, t.std_tfp);
    add(m.var_log_tfpq, t.var_log_tfpq);
    add(m.var_log_tfpr, t.var_log_tfpr);
    return sum;
}

inline constexpr double kInfeasible = 1e10;

/// Weighted sum of squared proportional deviations; kInfeasible when the
/// model cannot be solved at this point.
inline double objective(const FreeParams& free, const ModelParams& fixed, const MarkovChain2& chain,
                        const TargetSet& targets, const SimConfig& cfg, std::uint64_t seed) {
    try {
        const double v = target_distance(model_moments(free, fixed, chain, cfg, seed), targets);
        return std::isfinite(v) ? v : kInfeasible;
    } catch (const DomainError&) {
        return kInfeasible;
    }
}

struct CalibrationOptions {
    std::size_t n_starts = 4;
    std::size_t max_evaluations = 600;  // per start
    double f_tolerance = 1e-12;
    double x_tolerance = 1e-7;  // simplex diameter in unit-cube coordinates
    unsigned threads = 1;
    std::optional<FreeParams> initial;  // replaces the first Latin-hypercube start
};

struct CalibrationResult {
    FreeParams best;
    FreeParams normalized;  // best, rescaled to the baseline lambda_theta
    double objective = 0.0;
    ModelMoments moments;
    std::size_t evaluations = 0;
    std::uint64_t seed = 0;
    std::size_t best_start = 0;
    std::vector<double> start_objectives;
};

namespace detail {

struct SimplexOutcome {
    std::vector<double> x;
    double f = 0.0;
    std::size_t evaluations = 0;
};

/// Nelder-Mead on the unit cube; trial points are projected back into it.
/// Projection can flatten the simplex against a face, so a converged run is
/// restarted from its best vertex with a fresh simplex until a restart no
/// longer improves the value by more than f_tolerance.
template <class F>
SimplexOutcome nelder_mead(F&& f, std::vector<double> start, const CalibrationOptions& opt) {
    const std::size_t n = start.size();
    SimplexOutcome out;
    auto clamp = [](std::vector<double> v) {
        for (double& x : v) x = std::clamp(x, 0.0, 1.0);
        return v;
    };
    auto eval = [&](const std::vector<double>& v) {
        ++out.evaluations;
        return f(v);
    };
    out.x = clamp(start);
    out.f = eval(out.x);
    if (n == 0) return out;

    std::vector<std::vector<double>> pts(n + 1);
    std::vector<double> fv(n + 1);
    std::vector<std::size_t> order(n + 1);
    double edge = 0.1;
    while (out.evaluations < opt.max_evaluations) {
        const double f_restart = out.f;
        pts.assign(n + 1, out.x);
        fv[0] = out.f;
        for (std::size_t i = 0; i < n; ++i) {
            // step towards the interior so the first simplex is never flat
            pts[i + 1][i] += pts[0][i] <= 0.5 ? edge : -edge;
            fv[i + 1] = eval(pts[i + 1]);
        }
        while (out.evaluations < opt.max_evaluations) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
            const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];
            double diameter = 0.0;
            for (std::size_t i = 0; i <= n; ++i)
                for (std::size_t j = 0; j < n; ++j) diameter = std::max(diameter, std::fabs(pts[i][j] - pts[best][j]));
            if (fv[worst] - fv[best] <= opt.f_tolerance && diameter <= opt.x_tolerance) break;
            if (diameter <= 1e-14) break;

            std::vector<double> centroid(n, 0.0);
            for (std::size_t i = 0; i <= n; ++i)
                if (i != worst)
                    for (std::size_t j = 0; j < n; ++j) centroid[j] += pts[i][j] / static_cast<double>(n);
            auto along = [&](double t) {
                std::vector<double> v(n);
                for (std::size_t j = 0; j < n; ++j) v[j] = centroid[j] + t * (pts[worst][j] - centroid[j]);
                return clamp(v);
            };
            const auto xr = along(-1.0);
            const double fr = eval(xr);
            if (fr < fv[best]) {
                const auto xe = along(-2.0);
                const double fe = eval(xe);
                if (fe < fr) { pts[worst] = xe; fv[worst] = fe; }
                else { pts[worst] = xr; fv[worst] = fr; }
            } else if (fr < fv[second]) {
                pts[worst] = xr;
                fv[worst] = fr;
            } else {
                const bool outside = fr < fv[worst];
                const auto xc = along(outside ? -0.5 : 0.5);
                const double fc = eval(xc);
                if (fc < (outside ? fr : fv[worst])) {
                    pts[worst] = xc;
                    fv[worst] = fc;
                } else {
                    for (std::size_t i = 0; i <= n; ++i) {
                        if (i == best) continue;
                        for (std::size_t j = 0; j < n; ++j) pts[i][j] = pts[best][j] + 0.5 * (pts[i][j] - pts[best][j]);
                        fv[i] = eval(pts[i]);
                    }
                }
            }
        }
        const auto it = std::min_element(fv.begin(), fv.end());
        if (*it < out.f) {
            out.f = *it;
            out.x = pts[static_cast<std::size_t>(it - fv.begin())];
        }
        if (!(f_restart - out.f > opt.f_tolerance)) break;
        edge = std::max(0.5 * edge, 1e-3);
    }
    return out;
}

}  // namespace detail

/// Latin-hypercube starts in the unit cube of the active dimensions.
inline std::vector<std::vector<double>> latin_hypercube(std::size_t n, std::size_t dim, std::uint64_t seed) {
    std::vector<std::vector<double>> pts(n, std::vector<double>(dim));
    const CounterRng rng(seed, hash_label("latin-hypercube"));
    std::uint64_t counter = 0;
    for (std::size_t d = 0; d < dim; ++d) {
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        for (std::size_t i = n; i > 1; --i) {
            const auto j = static_cast<std::size_t>(rng.uniform(counter++) * static_cast<double>(i));
            std::swap(perm[i - 1], perm[std::min(j, i - 1)]);
        }
        for (std::size_t i = 0; i < n; ++i)
            pts[i][d] = (static_cast<double>(perm[i]) + rng.uniform(counter++)) / static_cast<double>(n);
    }
    return pts;
}

/// Best point over n_starts simplex runs. The simulation seed is shared by
/// every evaluation; the starts come from a separate seed stream.
inline CalibrationResult calibrate(const ModelParams& fixed, const MarkovChain2& chain, const TargetSet& targets,
                                   const Bounds& bounds, const SimConfig& cfg, std::uint64_t seed,
                                   const CalibrationOptions& opt = {}) {
    if (opt.n_starts < 1) throw DomainError("calibrate: n_starts must be at least 1");
    const auto lo = bounds.lower.to_array(), hi = bounds.upper.to_array();
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < kFreeDim; ++i) {
        if (!(lo[i] <= hi[i])) throw DomainError(std::string("calibrate: empty bound for ") + kFreeNames[i]);
        if (lo[i] < hi[i]) active.push_back(i);
    }
    auto to_free = [&](const std::vector<double>& u) {
        std::array<double, kFreeDim> a = lo;
        for (std::size_t k = 0; k < active.size(); ++k) {
            const std::size_t i = active[k];
            a[i] = lo[i] + u[k] * (hi[i] - lo[i]);
        }
        return FreeParams::from_array(a);
    };
    const std::uint64_t sim_seed = derive_seed(seed, "calibrate-simulation");
    auto f = [&](const std::vector<double>& u) { return objective(to_free(u), fixed, chain, targets, cfg, sim_seed); };

    auto starts = latin_hypercube(opt.n_starts, active.size(), derive_seed(seed, "calibrate-starts"));
    if (opt.initial) {
        const auto a = opt.initial->to_array();
        for (std::size_t k = 0; k < active.size(); ++k) {
            const std::size_t i = active[k];
            starts[0][k] = std::clamp((a[i] - lo[i]) / (hi[i] - lo[i]), 0.0, 1.0);
        }
    }

    std::vector<detail::SimplexOutcome> runs(opt.n_starts);
    parallel_for(opt.n_starts, opt.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) runs[i] = detail::nelder_mead(f, starts[i], opt);
    });

    CalibrationResult r;
    r.seed = seed;
    std::size_t best = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        r.evaluations += runs[i].evaluations;
        r.start_objectives.push_back(runs[i].f);
        if (runs[i].f < runs[best].f) best = i;
    }
    r.best_start = best;
    r.best = to_free(runs[best].x);
    r.objective = runs[best].f;
    r.normalized = r.best.psi > 0.0 ? normalize_type_scale(r.best, ModelParams{}.lambda_theta) : r.best;
    if (r.objective < kInfeasible) r.moments = model_moments(r.best, fixed, chain, cfg, sim_seed);
    return r;
}

}  // namespace sortcycle
