#pragma once

// JSON configuration and result files, CSV series. Needs json.hpp (vendor/)
// on the include path.

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "sortcycle/calibrate.hpp"
#include "sortcycle/dynamics.hpp"
#include "sortcycle/firms.hpp"
#include "sortcycle/params.hpp"
#include "sortcycle/statics.hpp"
#include "sortcycle/verify.hpp"

namespace sortcycle::io {

using json = nlohmann::ordered_json;

/// Malformed or unrecognised configuration input (as opposed to values the
/// model rejects, which raise DomainError).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// 17 significant digits, enough to read back the same double.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("'" + path + "': " + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << text;
    if (!out) throw ConfigError("write failed for '" + path + "'");
}

inline void write_json_file(const std::string& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

namespace detail {

inline double number(const json& j, const std::string& key) {
    if (!j.is_number()) throw ConfigError("'" + key + "' must be a number");
    return j.get<double>();
}

template <class Setters>
void apply_keys(const json& obj, const std::string& where, const Setters& setters) {
    if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, value] : obj.items()) {
        const auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError("unknown key '" + key + "' in " + where);
        it->second(value);
    }
}

}  // namespace detail

struct ModelConfig {
    ModelParams params = baseline_params();
    MarkovChain2 chain = baseline_chain();
};

/// Flat model keys plus an optional "chain" object. Missing keys keep the
/// baseline value; unknown keys are rejected.
inline ModelConfig model_config_from_json(const json& j) {
    ModelConfig c;
    using Setter = std::function<void(const json&)>;
    auto num = [](double& slot, const char* key) {
        return Setter([&slot, key](const json& v) { slot = detail::number(v, key); });
    };
    const std::map<std::string, Setter> chain_keys{
        {"z_low", num(c.chain.z_low, "z_low")},
        {"z_high", num(c.chain.z_high, "z_high")},
        {"p_stay_low", num(c.chain.p_stay_low, "p_stay_low")},
        {"p_stay_high", num(c.chain.p_stay_high, "p_stay_high")},
    };
    const std::map<std::string, Setter> keys{
        {"alpha", num(c.params.alpha, "alpha")},
        {"gamma", num(c.params.gamma, "gamma")},
        {"delta", num(c.params.delta, "delta")},
        {"beta", num(c.params.beta, "beta")},
        {"xi", num(c.params.xi, "xi")},
        {"psi", num(c.params.psi, "psi")},
        {"lambda_x", num(c.params.lambda_x, "lambda_x")},
        {"lambda_theta", num(c.params.lambda_theta, "lambda_theta")},
        {"sigma1", num(c.params.sigma1, "sigma1")},
        {"sigma2", num(c.params.sigma2, "sigma2")},
        {"chain", [&](const json& v) { detail::apply_keys(v, "\"chain\"", chain_keys); }},
    };
    detail::apply_keys(j, "params file", keys);
    return c;
}

inline ModelConfig load_model_config(const std::string& path) { return model_config_from_json(read_json_file(path)); }

inline json to_json(const ModelParams& p) {
    return {{"alpha", p.alpha}, {"gamma", p.gamma}, {"delta", p.delta}, {"beta", p.beta},
            {"xi", p.xi}, {"psi", p.psi}, {"lambda_x", p.lambda_x}, {"lambda_theta", p.lambda_theta},
            {"sigma1", p.sigma1}, {"sigma2", p.sigma2}};
}

inline json to_json(const MarkovChain2& c) {
    return {{"z_low", c.z_low}, {"z_high", c.z_high}, {"p_stay_low", c.p_stay_low}, {"p_stay_high", c.p_stay_high}};
}

inline json to_json(const AggregateShockState& s) {
    return {{"z", s.z}, {"A", s.A}, {"lambda_theta_t", s.lambda_theta_t}, {"sigma1_t", s.sigma1_t},
            {"sigma2_t", s.sigma2_t}};
}

inline json to_json(const Coefficients& c) {
    return {{"eta_Q", c.eta_Q}, {"eta_Q_theta", c.eta_Q_theta}, {"eta_l_theta", c.eta_l_theta},
            {"B1", c.B1}, {"B2", c.B2}, {"B3", c.B3}, {"kappa", c.kappa}};
}

inline json to_json(const StaticEquilibrium& eq) {
    return {{"lambda_t", eq.lambda_t}, {"coefficients", to_json(eq.coefficients)},
            {"w0", eq.w0}, {"R", eq.R}, {"Y", eq.Y}, {"Q_bar", eq.Q_bar}, {"k_bar", eq.k_bar},
            {"chi_bar", eq.chi_bar}, {"l_bar", eq.l_bar}, {"M", eq.M}, {"C_in", eq.C_in},
            {"Y_l", eq.Y_l}, {"Y_k", eq.Y_k}, {"Y_d", eq.Y_d}, {"shock", to_json(eq.shock)},
            {"K", eq.K}, {"measured_tfp", measured_tfp(eq)}};
}

inline json to_json(const DispersionMoments& d) {
    return {{"var_log_wage", d.var_log_wage}, {"var_log_tfpq", d.var_log_tfpq}, {"var_log_tfpr", d.var_log_tfpr}};
}

inline json to_json(const RevenueShares& r) { return {{"rev_share_top10", r.top10}, {"rev_share_p50_p90", r.p50_p90}}; }

inline json to_json(const CrossSectionMoments& m) {
    return {{"var_log_wage", m.var_log_wage}, {"var_log_wage_workers", m.var_log_wage_workers},
            {"var_log_tfpq", m.var_log_tfpq}, {"var_log_tfpr", m.var_log_tfpr},
            {"labor_share", m.labor_share}, {"rev_share_top10", m.rev_share_top10},
            {"rev_share_p50_p90", m.rev_share_p50_p90}, {"n_firms", m.n_firms}, {"seed", m.seed}};
}

inline json to_json(const SimulationSummary& s) {
    return {{"periods", s.periods}, {"labor_share", s.labor_share}, {"wage_inequality", s.wage_inequality},
            {"rev_share_top10", s.rev_share_top10}, {"rev_share_p50_p90", s.rev_share_p50_p90},
            {"std_tfp", s.std_tfp}, {"var_tfp", s.var_tfp}, {"var_log_tfpq", s.var_log_tfpq},
            {"var_log_tfpr", s.var_log_tfpr}, {"mean_log_Y", s.mean_log_Y},
            {"share_high_state", s.share_high_state}};
}

inline json to_json(const FreeParams& f) {
    json j;
    const auto a = f.to_array();
    for (std::size_t i = 0; i < kFreeDim; ++i) j[kFreeNames[i]] = a[i];
    return j;
}

inline json to_json(const ModelMoments& m) {
    return {{"labor_share", m.labor_share}, {"wage_inequality", m.wage_inequality},
            {"rev_share_top10", m.rev_share_top10}, {"rev_share_p50_p90", m.rev_share_p50_p90},
            {"std_tfp", m.std_tfp}, {"var_log_tfpq", m.var_log_tfpq}, {"var_log_tfpr", m.var_log_tfpr}};
}

inline json to_json(const CalibrationResult& r) {
    return {{"best", to_json(r.best)}, {"normalized", to_json(r.normalized)}, {"objective", r.objective}, {"moments", to_json(r.moments)},
            {"evaluations", r.evaluations}, {"seed", r.seed}, {"best_start", r.best_start},
            {"start_objectives", r.start_objectives}};
}

inline json to_json(const verify::VerificationReport& rep) {
    json checks = json::array();
    for (const auto& c : rep.checks)
        checks.push_back({{"name", c.name}, {"statistic", c.statistic}, {"tolerance", c.tolerance},
                          {"pass", c.pass}, {"negative_control", c.negative_control}});
    return {{"overall_pass", rep.overall()}, {"checks", checks}};
}

struct CalibrationInput {
    TargetSet targets;
    Bounds bounds;
    TfpScale tfp_scale = TfpScale::variance;
};

/// Targets are either a number or {"value": v, "weight": w}. Optional
/// "bounds" maps free-parameter names to [lower, upper]; optional
/// "tfp_scale" is "variance" or "std".
inline CalibrationInput calibration_input_from_json(const json& j) {
    CalibrationInput in;
    using Setter = std::function<void(const json&)>;
    auto target = [](Target& t, std::string key) {
        return Setter([&t, key](const json& v) {
            if (v.is_number()) {
                t.value = v.get<double>();
                return;
            }
            const std::map<std::string, Setter> fields{
                {"value", [&t, key](const json& x) { t.value = detail::number(x, key + ".value"); }},
                {"weight", [&t, key](const json& x) { t.weight = detail::number(x, key + ".weight"); }},
            };
            detail::apply_keys(v, "target '" + key + "'", fields);
        });
    };
    std::map<std::string, Setter> bound_keys;
    auto lo = in.bounds.lower.to_array(), hi = in.bounds.upper.to_array();
    for (std::size_t i = 0; i < kFreeDim; ++i) {
        bound_keys[kFreeNames[i]] = [&lo, &hi, i](const json& v) {
            if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
                throw ConfigError(std::string("bound '") + kFreeNames[i] + "' must be [lower, upper]");
            lo[i] = v[0].get<double>();
            hi[i] = v[1].get<double>();
        };
    }
    const std::map<std::string, Setter> keys{
        {"labor_share", target(in.targets.labor_share, "labor_share")},
        {"wage_inequality", target(in.targets.wage_inequality, "wage_inequality")},
        {"rev_share_top10", target(in.targets.rev_share_top10, "rev_share_top10")},
        {"rev_share_p50_p90", target(in.targets.rev_share_p50_p90, "rev_share_p50_p90")},
        {"std_tfp", target(in.targets.std_tfp, "std_tfp")},
        {"var_log_tfpq", target(in.targets.var_log_tfpq, "var_log_tfpq")},
        {"var_log_tfpr", target(in.targets.var_log_tfpr, "var_log_tfpr")},
        {"bounds", [&](const json& v) { detail::apply_keys(v, "\"bounds\"", bound_keys); }},
        {"tfp_scale",
         [&](const json& v) {
             const std::string s = v.is_string() ? v.get<std::string>() : "";
             if (s == "variance") in.tfp_scale = TfpScale::variance;
             else if (s == "std") in.tfp_scale = TfpScale::standard_deviation;
             else throw ConfigError("tfp_scale must be \"variance\" or \"std\"");
         }},
    };
    detail::apply_keys(j, "targets file", keys);
    in.bounds.lower = FreeParams::from_array(lo);
    in.bounds.upper = FreeParams::from_array(hi);
    return in;
}

/// CSV writer with fixed column order and 17 significant digits.
class CsvWriter {
public:
    CsvWriter(std::ostream& out, std::initializer_list<const char*> header) : out_(out), columns_(header.size()) {
        bool first = true;
        for (const char* h : header) {
            out_ << (first ? "" : ",") << h;
            first = false;
        }
        out_ << '\n';
    }
    template <class... T>
    void row(const T&... values) {
        static_assert(sizeof...(T) > 0);
        if (sizeof...(T) != columns_) throw std::logic_error("CsvWriter: column count mismatch");
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(values), first = false), ...);
        out_ << '\n';
    }

private:
    static std::string cell(double v) { return format_double(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(std::size_t v) { return std::to_string(v); }

    std::ostream& out_;
    std::size_t columns_;
};

inline void write_panel_csv(std::ostream& out, const FirmPanel& panel) {
    CsvWriter w(out, {"theta", "eps1", "eps2", "Q", "k", "l", "chi", "revenue", "log_tfpq", "log_tfpr"});
    for (const auto& f : panel.firms)
        w.row(f.draw.theta, f.draw.eps1, f.draw.eps2, f.Q, f.k, f.l, f.chi, f.revenue, f.log_tfpq, f.log_tfpr);
}

inline void write_path_csv(std::ostream& out, const SimulationPath& path) {
    CsvWriter w(out, {"t", "state", "z", "K", "Y", "C", "K_next", "income", "measured_tfp", "lambda_t",
                      "var_log_wage", "var_log_tfpq", "var_log_tfpr", "labor_share", "rev_share_top10",
                      "rev_share_p50_p90", "R", "w0"});
    for (std::size_t t = 0; t < path.periods.size(); ++t) {
        const PeriodRecord& r = path.periods[t];
        w.row(t, r.state, r.z, r.K, r.Y, r.C, r.K_next, r.income, r.measured_tfp, r.lambda_t, r.var_log_wage,
              r.var_log_tfpq, r.var_log_tfpr, r.labor_share, r.rev_share_top10, r.rev_share_p50_p90, r.R, r.w0);
    }
}

inline void write_irf_csv(std::ostream& out, const IRFResult& irf) {
    CsvWriter w(out, {"horizon", "log_Y", "measured_tfp", "var_log_wage", "var_log_tfpq", "var_log_tfpr", "log_K"});
    for (std::size_t h = 0; h <= irf.horizon; ++h)
        w.row(h, irf.log_Y[h], irf.measured_tfp[h], irf.var_log_wage[h], irf.var_log_tfpq[h], irf.var_log_tfpr[h],
              irf.log_K[h]);
}

}  // namespace sortcycle::io
