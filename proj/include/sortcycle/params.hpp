#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>

#include "sortcycle/errors.hpp"

namespace sortcycle {

/// Structural constants of the sorting economy. All quantities are dimensionless.
struct ModelParams {
    double alpha = 0.3;         // capital intensity
    double gamma = 0.6;         // labor intensity
    double delta = 0.10;        // depreciation per period
    double beta = 0.96;         // discount factor
    double xi = 9.0;            // CES elasticity of substitution
    double psi = 0.4022;        // worker-type intensity in productivity
    double lambda_x = 0.8681;   // rate of the worker-type exponential
    double lambda_theta = 2.6160;  // baseline rate of the firm-type exponential
    double sigma1 = 0.2293;     // std dev of the labor-wedge shock
    double sigma2 = 0.0;        // std dev of the capital-wedge shock

    bool operator==(const ModelParams&) const = default;
};

/// Parameters that passed validate(). Only validate() can build one, so every
/// downstream routine can rely on the model's maintained assumptions.
class ValidatedParams {
public:
    const ModelParams& values() const noexcept { return p_; }
    const ModelParams* operator->() const noexcept { return &p_; }
    const ModelParams& operator*() const noexcept { return p_; }

    /// (xi - 1) / xi
    double kappa() const noexcept { return (p_.xi - 1.0) / p_.xi; }
    /// 1 + (1 - alpha - gamma)(xi - 1), the denominator shared by eta_Q and the job equation.
    double drs_denominator() const noexcept {
        return 1.0 + (1.0 - p_.alpha - p_.gamma) * (p_.xi - 1.0);
    }
    double eta_Q() const noexcept { return p_.xi / drs_denominator(); }

private:
    explicit ValidatedParams(const ModelParams& p) : p_(p) {}
    friend ValidatedParams validate(const ModelParams& p);

    ModelParams p_;
};

namespace detail {
inline void require(bool ok, const char* constraint) {
    if (!ok) throw DomainError(std::string("invalid parameters: ") + constraint);
}
}  // namespace detail

inline ValidatedParams validate(const ModelParams& p) {
    using detail::require;
    const std::array<double, 10> all{p.alpha, p.gamma, p.delta, p.beta, p.xi,
                                     p.psi, p.lambda_x, p.lambda_theta, p.sigma1, p.sigma2};
    for (double v : all) require(std::isfinite(v), "all parameters must be finite");
    require(p.alpha > 0.0, "alpha > 0");
    require(p.gamma > 0.0, "gamma > 0");
    require(p.alpha + p.gamma < 1.0, "alpha + gamma < 1");
    require(p.xi > 1.0, "xi > 1");
    require(p.psi >= 0.0 && p.psi <= 1.0, "psi in [0, 1]");
    require(p.lambda_x > 0.0, "lambda_x > 0");
    require(p.lambda_theta > 0.0, "lambda_theta > 0");
    require(p.sigma1 >= 0.0, "sigma1 >= 0");
    require(p.sigma2 >= 0.0, "sigma2 >= 0");
    require(p.beta > 0.0 && p.beta < 1.0, "beta in (0, 1)");
    require(p.delta >= 0.0 && p.delta <= 1.0, "delta in [0, 1]");
    return ValidatedParams(p);
}

inline ValidatedParams validate(const ValidatedParams& p) { return p; }

/// Time-varying exogenous drivers for one period.
struct AggregateShockState {
    double z = 0.0;             // wedge/type correlation (>= 0)
    double A = 1.0;             // aggregate productivity (> 0)
    double lambda_theta_t = 2.6160;
    double sigma1_t = 0.2293;
    double sigma2_t = 0.0;

    bool operator==(const AggregateShockState&) const = default;
};

/// Shock state carrying the baseline second moments of `p`.
inline AggregateShockState baseline_shock(const ValidatedParams& p, double z, double A = 1.0) {
    return {z, A, p->lambda_theta, p->sigma1, p->sigma2};
}

inline void validate_shock(const AggregateShockState& s) {
    using detail::require;
    require(std::isfinite(s.z) && s.z >= 0.0, "z >= 0");
    require(std::isfinite(s.A) && s.A > 0.0, "A > 0");
    require(std::isfinite(s.lambda_theta_t) && s.lambda_theta_t > 0.0, "lambda_theta_t > 0");
    require(std::isfinite(s.sigma1_t) && s.sigma1_t >= 0.0, "sigma1_t >= 0");
    require(std::isfinite(s.sigma2_t) && s.sigma2_t >= 0.0, "sigma2_t >= 0");
}

/// Two-state chain for z: state 0 is the boom (z_low), state 1 the crisis (z_high).
struct MarkovChain2 {
    double z_low = 0.0;
    double z_high = 0.3984;
    double p_stay_low = 0.977;
    double p_stay_high = 0.688;

    double level(int state) const noexcept { return state == 0 ? z_low : z_high; }
    double transition(int from, int to) const noexcept {
        const double stay = from == 0 ? p_stay_low : p_stay_high;
        return from == to ? stay : 1.0 - stay;
    }
    /// Next state given a uniform draw u in (0,1); u < stay keeps the state.
    int next(int from, double u) const noexcept {
        const double stay = from == 0 ? p_stay_low : p_stay_high;
        return u < stay ? from : 1 - from;
    }
    bool operator==(const MarkovChain2&) const = default;
};

inline void validate_chain(const MarkovChain2& c) {
    using detail::require;
    require(std::isfinite(c.z_low) && c.z_low >= 0.0, "chain z_low >= 0");
    require(std::isfinite(c.z_high) && c.z_high >= 0.0, "chain z_high >= 0");
    require(c.p_stay_low >= 0.0 && c.p_stay_low <= 1.0, "chain p_stay_low in [0, 1]");
    require(c.p_stay_high >= 0.0 && c.p_stay_high <= 1.0, "chain p_stay_high in [0, 1]");
}

/// Ergodic probabilities (low, high). The identity chain has no unique one; we return (0.5, 0.5).
inline std::array<double, 2> stationary_distribution(const MarkovChain2& c) {
    validate_chain(c);
    const double leave_low = 1.0 - c.p_stay_low;
    const double leave_high = 1.0 - c.p_stay_high;
    const double total = leave_low + leave_high;
    if (total == 0.0) return {0.5, 0.5};
    return {leave_high / total, leave_low / total};
}

/// Firm-type redraw law with a two-state Markov rate:
/// theta' = rho*theta w.p. p, else rho*theta + Exp(lambda'), p = rho*lambda'/lambda.
struct ThetaRedrawProcess {
    double rho = 0.7;
    double lambda_low = 2.0;
    double lambda_high = 2.5;
    double p_stay_low = 0.9;   // rate chain: P(stay at lambda_low)
    double p_stay_high = 0.9;  // rate chain: P(stay at lambda_high)

    double rate(int state) const noexcept { return state == 0 ? lambda_low : lambda_high; }
    int next(int from, double u) const noexcept {
        const double stay = from == 0 ? p_stay_low : p_stay_high;
        return u < stay ? from : 1 - from;
    }
};

inline void validate_process(const ThetaRedrawProcess& p) {
    auto fail = [](const std::string& m) { throw InvalidProcess("invalid theta process: " + m); };
    if (!(p.rho >= 0.0 && p.rho < 1.0)) fail("rho in [0, 1)");
    if (!(p.lambda_low > 0.0)) fail("lambda_low > 0");
    if (!(p.lambda_low <= p.lambda_high)) fail("lambda_low <= lambda_high");
    if (p.rho > 0.0 && !(p.lambda_high < p.lambda_low / p.rho))
        fail("lambda_high < lambda_low / rho (keep-probability would exceed 1)");
    if (!(p.p_stay_low >= 0.0 && p.p_stay_low <= 1.0 && p.p_stay_high >= 0.0 &&
          p.p_stay_high <= 1.0))
        fail("transition probabilities in [0, 1]");
}

/// AR(1) processes for log sigma1 and log sigma2, centred on log_center1/2
/// (zero centres give the plain form log s_t = rho log s_{t-1} + e_t).
struct LogVolProcess {
    double rho1 = 0.9;
    double rho2 = 0.9;
    double sigma_l = 0.1;
    double sigma_k = 0.0;
    double log_center1 = std::log(0.2293);
    double log_center2 = 0.0;
    bool has_sigma2 = false;  // sigma2 stays at zero when false
};

inline void validate_process(const LogVolProcess& p) {
    if (!(std::fabs(p.rho1) < 1.0 && std::fabs(p.rho2) < 1.0)) throw InvalidProcess("log-vol: |rho| < 1");
    if (!(p.sigma_l >= 0.0 && p.sigma_k >= 0.0)) throw InvalidProcess("log-vol: innovation std devs >= 0");
    if (!(std::isfinite(p.log_center1) && std::isfinite(p.log_center2))) throw InvalidProcess("log-vol: finite centres");
}

/// Published baseline: fixed technology and preference values plus the calibrated block.
inline ModelParams baseline_params() { return ModelParams{}; }
inline MarkovChain2 baseline_chain() { return MarkovChain2{}; }

}  // namespace sortcycle
