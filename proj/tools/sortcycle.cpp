// Command-line front end: solve | moments | simulate | irf | calibrate | verify.
//
// Exit codes: 0 success, 1 domain error, 2 usage or configuration error,
// 3 verification failure. Every random draw derives from --seed through the
// subcommand name, so reruns with the same flags write identical files.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "sortcycle/calibrate.hpp"
#include "sortcycle/dynamics.hpp"
#include "sortcycle/firms.hpp"
#include "sortcycle/io.hpp"
#include "sortcycle/params.hpp"
#include "sortcycle/statics.hpp"
#include "sortcycle/verify.hpp"

namespace {

using namespace sortcycle;
using io::json;

constexpr int kOk = 0;
constexpr int kDomain = 1;
constexpr int kUsage = 2;
constexpr int kVerifyFailed = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string params_path;
    std::uint64_t seed = 1;
    std::string out = ".";
    unsigned threads = 1;
};

io::ModelConfig load(const Common& c) {
    return c.params_path.empty() ? io::ModelConfig{} : io::load_model_config(c.params_path);
}

std::string out_file(const Common& c, const char* name) {
    std::error_code ec;
    std::filesystem::create_directories(c.out, ec);
    if (ec) throw io::ConfigError("--out: cannot create '" + c.out + "': " + ec.message());
    return (std::filesystem::path(c.out) / name).string();
}

void write_csv(const std::string& path, const std::function<void(std::ostream&)>& body) {
    std::ostringstream s;
    body(s);
    io::write_text_file(path, s.str());
}

std::string fmt(double v) { return io::format_double(v); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sorting business-cycle model: statics, dynamics, calibration and verification"};
    app.require_subcommand(1);
    app.fallthrough();
    Common common;
    app.add_option("--params", common.params_path, "model parameters JSON (baseline when omitted)");
    app.add_option("--seed", common.seed, "64-bit seed for every random draw");
    app.add_option("--out", common.out, "output directory");
    app.add_option("--threads", common.threads, "worker threads (0 = all cores)");

    double z = 0.0, A = 1.0;
    std::optional<double> K;
    auto* solve_cmd = app.add_subcommand("solve", "within-period equilibrium -> equilibrium.json");
    solve_cmd->add_option("--z", z, "market-efficiency shock level")->check(CLI::NonNegativeNumber);
    solve_cmd->add_option("--A", A, "aggregate productivity")->check(CLI::PositiveNumber);
    solve_cmd->add_option("--K", K, "capital stock (default: steady state at --z)")->check(CLI::PositiveNumber);

    std::size_t n_firms = 100000;
    bool write_panel = false;
    auto* moments_cmd = app.add_subcommand("moments", "cross-section moments -> moments.json [panel.csv]");
    moments_cmd->add_option("--z", z, "market-efficiency shock level")->check(CLI::NonNegativeNumber);
    moments_cmd->add_option("--A", A, "aggregate productivity")->check(CLI::PositiveNumber);
    moments_cmd->add_option("--K", K, "capital stock (default: steady state at --z)")->check(CLI::PositiveNumber);
    moments_cmd->add_option("--n-firms", n_firms, "firms in the sampled panel")->check(CLI::PositiveNumber);
    moments_cmd->add_flag("--panel", write_panel, "also write the sampled panel to panel.csv");

    std::size_t T = 10000, burn_in = 100, grid_nodes = 400;
    auto* simulate_cmd = app.add_subcommand("simulate", "simulated path -> path.csv, simulation.json");
    simulate_cmd->add_option("--T", T, "periods");
    simulate_cmd->add_option("--burn-in", burn_in, "initial periods dropped from the summary");
    simulate_cmd->add_option("--grid", grid_nodes, "capital grid nodes")->check(CLI::Range(5, 100000));

    std::size_t horizon = 40, n_sims = 2000;
    auto* irf_cmd = app.add_subcommand("irf", "generalized impulse responses -> irf.csv, irf.json");
    irf_cmd->add_option("--horizon", horizon, "periods after impact");
    irf_cmd->add_option("--n-sims", n_sims, "treated/control pairs")->check(CLI::Range(1000, 100000000));
    irf_cmd->add_option("--grid", grid_nodes, "capital grid nodes")->check(CLI::Range(5, 100000));

    std::string targets_path;
    bool fast = false;
    std::size_t n_starts = 4, max_evals = 600;
    auto* calibrate_cmd = app.add_subcommand("calibrate", "moment matching -> calibration.json");
    calibrate_cmd->add_option("--targets", targets_path, "targets JSON (defaults when omitted)");
    calibrate_cmd->add_flag("--fast", fast, "analytic moments under the stationary distribution");
    calibrate_cmd->add_option("--n-starts", n_starts, "Latin-hypercube starts")->check(CLI::PositiveNumber);
    calibrate_cmd->add_option("--max-evals", max_evals, "objective evaluations per start")->check(CLI::PositiveNumber);
    calibrate_cmd->add_option("--T", T, "periods per simulation (full mode)");
    calibrate_cmd->add_option("--burn-in", burn_in, "dropped periods (full mode)");
    calibrate_cmd->add_option("--grid", grid_nodes, "capital grid nodes (full mode)")->check(CLI::Range(5, 100000));

    std::size_t theta_firms = 100000;
    auto* verify_cmd = app.add_subcommand("verify", "independent oracles -> verify.json");
    verify_cmd->add_option("--theta-firms", theta_firms, "firms in the type-process check")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        const io::ModelConfig cfg = load(common);
        const ValidatedParams p = validate(cfg.params);
        validate_chain(cfg.chain);
        GridSpec grid;
        grid.nodes = grid_nodes;
        grid.threads = common.threads;

        if (*solve_cmd) {
            const double k = K ? *K : steady_state(p, z, A).K;
            const StaticEquilibrium eq = solve_static(p, baseline_shock(p, z, A), k);
            io::write_json_file(out_file(common, "equilibrium.json"), io::to_json(eq));
            std::cout << "solve: lambda_t=" << fmt(eq.lambda_t) << " Y=" << fmt(eq.Y) << " R=" << fmt(eq.R)
                      << " K=" << fmt(eq.K) << "\n";
        } else if (*moments_cmd) {
            const std::uint64_t seed = derive_seed(common.seed, "moments");
            const double k = K ? *K : steady_state(p, z, A).K;
            const StaticEquilibrium eq = solve_static(p, baseline_shock(p, z, A), k);
            const FirmPanel panel = sample_cross_section(eq, n_firms, seed, common.threads);
            const CrossSectionMoments cs = cross_section_moments(panel, eq);
            const json j{{"analytic", io::to_json(analytic_moments(eq))},
                         {"population_revenue_shares", io::to_json(population_revenue_shares(eq))},
                         {"sampled", io::to_json(cs)}};
            io::write_json_file(out_file(common, "moments.json"), j);
            if (write_panel)
                write_csv(out_file(common, "panel.csv"), [&](std::ostream& o) { io::write_panel_csv(o, panel); });
            std::cout << "moments: n=" << n_firms << " var_log_wage=" << fmt(cs.var_log_wage_workers)
                      << " var_log_tfpq=" << fmt(cs.var_log_tfpq) << " rev_share_top10=" << fmt(cs.rev_share_top10)
                      << "\n";
        } else if (*simulate_cmd) {
            if (T <= burn_in) throw UsageError("--T must exceed --burn-in");
            const Economy econ(p, cfg.chain);
            const Policy pol = solve_policy(econ, grid);
            const SimulationPath path = simulate(econ, pol, T, burn_in, derive_seed(common.seed, "simulate"));
            const SimulationSummary s = summarize(path);
            write_csv(out_file(common, "path.csv"), [&](std::ostream& o) { io::write_path_csv(o, path); });
            io::write_json_file(out_file(common, "simulation.json"),
                                {{"summary", io::to_json(s)}, {"policy_iterations", pol.iterations}});
            std::cout << "simulate: T=" << T << " labor_share=" << fmt(s.labor_share)
                      << " wage_inequality=" << fmt(s.wage_inequality) << " var_tfp=" << fmt(s.var_tfp) << "\n";
        } else if (*irf_cmd) {
            const Economy econ(p, cfg.chain);
            const Policy pol = solve_policy(econ, grid);
            IRFConfig ic;
            ic.horizon = horizon;
            ic.n_sims = n_sims;
            ic.threads = common.threads;
            const IRFResult r = impulse_response(econ, pol, ic, derive_seed(common.seed, "irf"));
            write_csv(out_file(common, "irf.csv"), [&](std::ostream& o) { io::write_irf_csv(o, r); });
            io::write_json_file(out_file(common, "irf.json"),
                                {{"horizon", r.horizon}, {"n_episodes", r.n_episodes},
                                 {"treated_impact", io::to_json(r.treated_impact)},
                                 {"control_impact", io::to_json(r.control_impact)}});
            std::cout << "irf: impact log_Y=" << fmt(r.log_Y[0]) << " measured_tfp=" << fmt(r.measured_tfp[0])
                      << "\n";
        } else if (*calibrate_cmd) {
            if (!fast && T <= burn_in) throw UsageError("--T must exceed --burn-in");
            const io::CalibrationInput in =
                targets_path.empty() ? io::CalibrationInput{} : io::calibration_input_from_json(io::read_json_file(targets_path));
            SimConfig sc;
            sc.fast = fast;
            sc.T = T;
            sc.burn_in = burn_in;
            sc.grid = grid;
            sc.tfp_scale = in.tfp_scale;
            CalibrationOptions opt;
            opt.n_starts = n_starts;
            opt.max_evaluations = max_evals;
            opt.threads = common.threads;
            const CalibrationResult r = calibrate(cfg.params, cfg.chain, in.targets, in.bounds, sc,
                                                  derive_seed(common.seed, "calibrate"), opt);
            json j = io::to_json(r);
            j["fast"] = fast;
            j["tfp_scale"] = in.tfp_scale == TfpScale::variance ? "variance" : "std";
            io::write_json_file(out_file(common, "calibration.json"), j);
            std::cout << "calibrate: objective=" << fmt(r.objective) << " evaluations=" << r.evaluations << "\n";
        } else if (*verify_cmd) {
            verify::VerifyConfig vc;
            vc.seed = derive_seed(common.seed, "verify");
            vc.threads = common.threads;
            vc.theta_firms = theta_firms;
            const verify::VerificationReport rep = verify::run_verification(p, cfg.chain, vc);
            io::write_json_file(out_file(common, "verify.json"), io::to_json(rep));
            std::size_t failed = 0;
            for (const auto& c : rep.checks) failed += c.pass ? 0 : 1;
            std::cout << "verify: " << rep.checks.size() - failed << "/" << rep.checks.size() << " checks passed\n";
            return rep.overall() ? kOk : kVerifyFailed;
        }
        return kOk;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const io::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kUsage;
    } catch (const DomainError& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return kDomain;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDomain;
    }
}
