// Acceptance run: one PASS/FAIL line per criterion, plus INFO lines with the
// numbers behind each verdict. Exit status is the number of failed criteria.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "sortcycle/calibrate.hpp"
#include "sortcycle/dynamics.hpp"
#include "sortcycle/firms.hpp"
#include "sortcycle/stats.hpp"
#include "sortcycle/verify.hpp"

using namespace sortcycle;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 20240601;

int g_failed = 0;

void info(const char* fmt, auto... args) {
    std::printf("  INFO ");
    std::printf(fmt, args...);
    std::printf("\n");
    std::fflush(stdout);
}

// Runs body, which returns the substantive verdict; the runtime budget is
// part of the criterion.
void criterion(int id, const char* title, double budget_s, const std::function<bool()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = false;
    try {
        ok = body();
    } catch (const std::exception& e) {
        info("exception: %s", e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < budget_s;
    const bool pass = ok && in_time;
    if (!pass) ++g_failed;
    std::printf("%s criterion %d: %s (%.1f s, budget %.0f s%s)\n", pass ? "PASS" : "FAIL", id, title, secs, budget_s,
                in_time ? "" : ", over budget");
    std::fflush(stdout);
}

bool check(bool ok, const char* what, double value, double target, double tol) {
    info("%-44s %s  value %.6g  target %.6g  tol %.3g", what, ok ? "ok  " : "MISS", value, target, tol);
    return ok;
}

bool within_abs(const char* what, double value, double target, double tol) {
    return check(std::fabs(value - target) <= tol, what, value, target, tol);
}

bool within_rel(const char* what, double value, double target, double tol) {
    return check(std::fabs(value / target - 1.0) <= tol, what, value, target, tol);
}

const ValidatedParams& base() {
    static const ValidatedParams p = validate(baseline_params());
    return p;
}

const Economy& economy() {
    static const Economy econ(base(), baseline_chain());
    return econ;
}

const Policy& policy() {
    static const Policy pol = solve_policy(economy());
    return pol;
}

// ---------------------------------------------------------------------------

bool fixed_point() {
    const verify::FixedPointResult r = verify::fixed_point_suite(1000, 10000, kSeed);
    info("draws %zu, worst |G| / (1e-12 max(1, lambda_theta)) = %.3g, draws without exactly one sign change = %zu",
         r.draws, r.worst_scaled_residual, r.draws_without_single_sign_change);
    return r.draws == 1000 && r.worst_scaled_residual <= 1.0 && r.draws_without_single_sign_change == 0;
}

bool firm_focs() {
    const verify::FocSuiteResult r = verify::foc_suite(20, 500, kSeed);
    info("firms %zu; worst residuals labor %.2e capital %.2e production %.2e demand %.2e (sorting %.2e)", r.firms,
         r.worst.labor, r.worst.capital, r.worst.production, r.worst.demand, r.worst.sorting);
    return r.firms == 10000 &&
           std::max({r.worst.labor, r.worst.capital, r.worst.production, r.worst.demand}) <= 1e-9;
}

bool market_clearing() {
    verify::VerificationReport rep;
    const MarkovChain2 chain = baseline_chain();
    for (int s = 0; s < 2; ++s) {
        const double z = chain.level(s);
        const StaticEquilibrium eq = solve_static(base(), baseline_shock(base(), z), steady_state(base(), z).K);
        verify::market_checks(rep, eq, verify::state_name(s), kSeed);
    }
    bool ok = true;
    for (const auto& c : rep.checks) {
        const bool wanted = c.name.rfind("job_density", 0) == 0 || c.name.rfind("goods_market", 0) == 0 ||
                            c.name.rfind("capital_market", 0) == 0 || c.negative_control;
        if (!wanted) continue;
        info("%-52s %s  statistic %.3e  (%s %.1e)", c.name.c_str(), c.pass ? "ok  " : "MISS", c.statistic,
             c.negative_control ? "must exceed" : "at most", c.tolerance);
        ok = ok && c.pass;
    }
    return ok;
}

bool comparative_statics() {
    const verify::ComparativeStaticsResult r = verify::proposition_suite(100, 20, kSeed);
    info("points %zu; violations: lambda/z %zu, wage/z %zu, tfpq/z %zu, tfpr/z %zu, loading %zu, A %zu, sigma %zu",
         r.points, r.lambda_increasing_in_z, r.wage_variance_decreasing_in_z, r.tfpq_variance_increasing_in_z,
         r.tfpr_variance_increasing_in_z, r.tfpr_loading_positive, r.a_neutrality, r.sigma_neutrality);
    info("lambda_theta monotonicities: tfpq %zu, tfpr %zu, wage %zu, S %zu (squared-term variant, reported only: %zu)",
         r.tfpq_variance_decreasing_in_lambda_theta, r.tfpr_variance_decreasing_in_lambda_theta,
         r.wage_variance_increasing_as_lambda_theta_falls, r.s_decreasing_in_lambda_theta,
         r.squared_term_s_not_decreasing);
    return r.points == 100 && r.total_violations() == 0;
}

bool moments_reproduction() {
    const SimulationPath path = simulate(economy(), policy(), 10000, 100, derive_seed(kSeed, "simulate"));
    const SimulationSummary s = summarize(path);
    info("post burn-in periods %zu, share of crisis periods %.4f", s.periods, s.share_high_state);
    bool ok = s.periods == 9900;
    ok &= within_abs("labor share", s.labor_share, 0.6102, 0.02);
    ok &= within_rel("wage inequality (variance of log wage)", s.wage_inequality, 0.7666, 0.15);
    ok &= within_abs("top-10% revenue share", s.rev_share_top10, 0.8906, 0.03);
    ok &= within_abs("50-90 revenue share", s.rev_share_p50_p90, 0.0840, 0.02);
    ok &= within_rel("std of measured TFP", s.std_tfp, 0.0090, 0.30);
    info("variance of measured TFP = %.6g; the published 0.0090 matches this variance scale", s.var_tfp);
    return ok;
}

bool impulse_responses() {
    IRFConfig cfg;
    cfg.horizon = 40;
    cfg.n_sims = 2000;
    const IRFResult r = impulse_response(economy(), policy(), cfg, derive_seed(kSeed, "irf"));
    bool ok = true;
    ok &= check(r.log_Y[0] < -0.05, "impact d log Y < -0.05", r.log_Y[0], -0.05, 0);
    ok &= check(r.measured_tfp[0] < 0.0, "impact d measured TFP < 0", r.measured_tfp[0], 0, 0);
    ok &= check(r.var_log_tfpq[0] > 0.0, "impact d var log TFPQ > 0", r.var_log_tfpq[0], 0, 0);
    ok &= check(r.var_log_tfpr[0] > 0.0, "impact d var log TFPR > 0", r.var_log_tfpr[0], 0, 0);
    ok &= check(r.var_log_wage[0] < 0.0, "impact d var log wage < 0", r.var_log_wage[0], 0, 0);
    ok &= within_rel("boom var log TFPQ", r.control_impact.var_log_tfpq, 0.1203, 0.20);
    ok &= within_rel("crisis var log TFPQ", r.treated_impact.var_log_tfpq, 0.2254, 0.20);
    ok &= within_rel("boom var log TFPR", r.control_impact.var_log_tfpr, 0.0546, 0.20);
    ok &= within_rel("crisis var log TFPR", r.treated_impact.var_log_tfpr, 0.1330, 0.20);
    ok &= within_rel("boom var log wage", r.control_impact.var_log_wage, 0.7901, 0.20);
    ok &= within_rel("crisis var log wage", r.treated_impact.var_log_wage, 0.3132, 0.20);
    return ok;
}

bool monte_carlo_equivalence() {
    bool ok = true;
    const std::size_t n = 1000000;
    for (int s = 0; s < 2; ++s) {
        const double z = baseline_chain().level(s);
        const StaticEquilibrium eq = solve_static(base(), baseline_shock(base(), z), steady_state(base(), z).K);
        const std::uint64_t seed = derive_seed(kSeed, "panel", static_cast<std::uint64_t>(s));
        const FirmPanel panel = sample_cross_section(eq, n, seed);
        const DispersionMoments d = analytic_moments(eq);
        std::vector<double> q(n), r(n), w(n);
        const CounterRng workers(seed, kStreamWorker);
        for (std::size_t i = 0; i < n; ++i) {
            q[i] = panel.firms[i].log_tfpq;
            r[i] = panel.firms[i].log_tfpr;
            w[i] = log_wage(eq, workers.exponential(i, eq.params.lambda_x));
        }
        const auto vq = stats::variance(q), vr = stats::variance(r), vw = stats::variance(w);
        const char* tag = verify::state_name(s);
        info("%s: var log wage %.6f vs %.6f (%.2f SE); tfpq %.6f vs %.6f (%.2f SE); tfpr %.6f vs %.6f (%.2f SE)", tag,
             vw.variance, d.var_log_wage, (vw.variance - d.var_log_wage) / vw.standard_error, vq.variance,
             d.var_log_tfpq, (vq.variance - d.var_log_tfpq) / vq.standard_error, vr.variance, d.var_log_tfpr,
             (vr.variance - d.var_log_tfpr) / vr.standard_error);
        ok &= std::fabs(vw.variance - d.var_log_wage) <= 3 * vw.standard_error;
        ok &= std::fabs(vq.variance - d.var_log_tfpq) <= 3 * vq.standard_error;
        ok &= std::fabs(vr.variance - d.var_log_tfpr) <= 3 * vr.standard_error;
        const double hill = stats::hill_tail_index(q, 10000);
        const double analytic = eq.shock.lambda_theta_t / eq.coefficients.match_term;
        ok &= within_rel(s == 0 ? "boom TFPQ tail index" : "crisis TFPQ tail index", hill, analytic, 0.05);
    }
    return ok;
}

bool dynamic_accuracy() {
    const Economy& econ = economy();
    const Policy& pol = policy();
    std::vector<double> res;
    const double lo = std::log(pol.K_min()), hi = std::log(pol.K_max());
    for (int s = 0; s < 2; ++s)
        for (int i = 0; i < 5000; ++i) {
            const double K = std::exp(lo + (hi - lo) * (i + 0.5) / 5000.0);
            res.push_back(std::fabs(euler_residual(econ, pol, s, K)));
        }
    std::sort(res.begin(), res.end());
    const double p99 = res[static_cast<std::size_t>(0.99 * static_cast<double>(res.size()))];
    info("off-grid Euler residuals: median %.2e, p99 %.2e, max %.2e (grid %zu nodes, %zu iterations)",
         res[res.size() / 2], p99, res.back(), pol.K_grid.size(), pol.iterations);
    bool ok = check(p99 < 1e-5, "Euler residual p99", p99, 1e-5, 0);

    const SimulationPath path = simulate(econ, pol, 10000, 100, derive_seed(kSeed, "simulate"));
    double worst = 0.0;
    for (const auto& r : path.periods) {
        const double rhs = (1.0 - base()->delta) * r.K + r.income;
        worst = std::max(worst, std::fabs(r.C + r.K_next - rhs) / rhs);
    }
    ok &= check(worst <= 1e-10, "budget identity, worst relative gap", worst, 1e-10, 0);

    MarkovChain2 frozen = baseline_chain();
    frozen.p_stay_low = 1.0;
    const Economy still(base(), frozen);
    const Policy still_pol = solve_policy(still);
    const double K_star = steady_state(base(), 0.0).K;
    const SimulationPath conv = simulate(still, still_pol, 501, 0, 1, 0.75 * K_star);
    ok &= within_rel("absorbing boom: K after 500 periods / K*", conv.periods.back().K, K_star, 1e-3);
    return ok;
}

bool theta_process() {
    const verify::ThetaCheckResult r =
        verify::theta_process_check(ThetaRedrawProcess{}, 100000, 50, derive_seed(kSeed, "theta"));
    for (std::size_t k = 0; k < r.checkpoints.size(); ++k)
        info("checkpoint t=%zu rate %.2f sqrt(n) KS %.3f (critical %.2f)", r.checkpoints[k], r.rates[k],
             r.ks_sqrt_n[k], verify::kKsCritical);
    bool rejected = false;
    try {
        ThetaRedrawProcess bad;
        bad.lambda_high = 3.0;
        validate_process(bad);
    } catch (const InvalidProcess&) {
        rejected = true;
    }
    info("lambda_high = 3 > lambda_low / rho rejected: %s", rejected ? "yes" : "no");
    return r.passes >= 4 && rejected;
}

// --- determinism through the command-line tool -----------------------------

int run_cli(const std::string& args, const fs::path& out) {
    fs::create_directories(out);
    const std::string cmd = std::string("'") + SORTCYCLE_CLI + "' " + args + " --out '" + out.string() + "' > '" +
                            (out / "stdout.txt").string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool determinism() {
    const std::string params = std::string("--params '") + SORTCYCLE_CONFIGS + "/baseline.json'";
    const std::vector<std::pair<std::string, std::string>> commands{
        {"solve", "solve " + params + " --z 0.3984"},
        {"moments", "moments " + params + " --z 0.3984 --n-firms 50000 --panel"},
        {"simulate", "simulate " + params + " --T 3000"},
        {"irf", "irf " + params + " --n-sims 1000 --horizon 20"},
        {"calibrate", "calibrate " + params + " --fast --n-starts 4 --max-evals 150"},
        {"verify", "verify " + params},
    };
    const fs::path root = fs::temp_directory_path() / "sortcycle_acceptance_determinism";
    fs::remove_all(root);
    bool ok = true;
    for (const auto& [name, args] : commands) {
        const fs::path a = root / (name + "_t1a"), b = root / (name + "_t1b"), c = root / (name + "_t8");
        const int ca = run_cli(args + " --seed 7 --threads 1", a);
        const int cb = run_cli(args + " --seed 7 --threads 1", b);
        const int cc = run_cli(args + " --seed 7 --threads 8", c);
        std::size_t files = 0, same = 0;
        for (const auto& entry : fs::directory_iterator(a)) {
            if (entry.path().filename() == "stdout.txt") continue;
            ++files;
            const std::string x = slurp(entry.path());
            if (x == slurp(b / entry.path().filename()) && x == slurp(c / entry.path().filename())) ++same;
        }
        const bool good = ca == 0 && cb == 0 && cc == 0 && files > 0 && same == files;
        info("%-10s exit %d/%d/%d, %zu of %zu output files byte-identical across reruns and --threads 1 vs 8",
             name.c_str(), ca, cb, cc, same, files);
        ok &= good;
    }
    fs::remove_all(root);
    return ok;
}

// --- informational ---------------------------------------------------------

void recovery_note() {
    // Published moments of the model as targets; the type scale is pinned at
    // the published lambda_theta because the moments do not identify it.
    TargetSet t;
    t.labor_share.value = 0.6102;
    t.wage_inequality.value = 0.7666;
    t.rev_share_top10.value = 0.8906;
    t.rev_share_p50_p90.value = 0.0840;
    t.std_tfp.value = 0.0090;
    Bounds b;
    b.lower.lambda_theta = b.upper.lambda_theta = FreeParams{}.lambda_theta;
    SimConfig fast;
    fast.fast = true;
    CalibrationOptions opt;
    opt.n_starts = 8;
    opt.max_evaluations = 2000;
    const CalibrationResult r = calibrate(baseline_params(), baseline_chain(), t, b, fast, kSeed, opt);
    const auto got = r.best.to_array(), pub = FreeParams{}.to_array();
    std::printf("INFO recovery of published parameters from published model moments (fast mode, objective %.2e):\n",
                r.objective);
    for (std::size_t i = 0; i < kFreeDim; ++i)
        info("%-13s %.4f vs %.4f (%+.1f%%)", kFreeNames[i], got[i], pub[i], 100.0 * (got[i] / pub[i] - 1.0));
}

}  // namespace

int main() {
    std::setvbuf(stdout, nullptr, _IOLBF, 0);
    criterion(1, "fixed-point residuals and a single sign change over 1000 draws", 5, fixed_point);
    criterion(2, "firm first-order conditions, 10^4 firms under 20 equilibria", 10, firm_focs);
    criterion(3, "market clearing by quadrature in both states, negative controls detected", 30, market_clearing);
    criterion(4, "comparative statics, 100 points x 20-point grids, zero violations", 60, comparative_statics);
    criterion(5, "simulated moments over 9900 periods", 600, moments_reproduction);
    criterion(6, "impulse responses: impact signs and state levels", 600, impulse_responses);
    criterion(7, "10^6-firm panels match analytic dispersion and tail index", 60, monte_carlo_equivalence);
    criterion(8, "Euler accuracy, budget identity, deterministic convergence", 300, dynamic_accuracy);
    criterion(9, "firm-type redraw process stationarity", 60, theta_process);
    criterion(10, "byte-identical CLI outputs across reruns and thread counts", 1800, determinism);
    recovery_note();
    std::printf("%d of 10 criteria failed\n", g_failed);
    return g_failed == 0 ? 0 : 1;
}
