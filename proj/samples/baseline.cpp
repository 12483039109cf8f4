// Solves the published baseline in both aggregate states and prints the
// static equilibrium, dispersion moments and revenue concentration.

#include <cstdio>

#include "sortcycle/dynamics.hpp"
#include "sortcycle/firms.hpp"

int main() {
    using namespace sortcycle;
    const ValidatedParams p = validate(baseline_params());
    const MarkovChain2 chain = baseline_chain();
    const auto pi = stationary_distribution(chain);
    std::printf("stationary distribution: boom %.4f, crisis %.4f\n", pi[0], pi[1]);
    for (int s = 0; s < 2; ++s) {
        const double z = chain.level(s);
        const SteadyState ss = steady_state(p, z);
        const StaticEquilibrium eq = solve_static(p, baseline_shock(p, z), ss.K);
        const DispersionMoments d = analytic_moments(eq);
        const RevenueShares r = population_revenue_shares(eq);
        std::printf("\nz = %.4f\n", z);
        std::printf("  lambda_t %.6f  K* %.4f  Y %.4f  R %.4f  w0 %.4f\n", eq.lambda_t, ss.K, eq.Y, eq.R, eq.w0);
        std::printf("  labor share %.4f  measured TFP %.4f\n", eq.Y_l / eq.Y, measured_tfp(eq));
        std::printf("  var log wage %.4f  var log TFPQ %.4f  var log TFPR %.4f\n", d.var_log_wage, d.var_log_tfpq,
                    d.var_log_tfpr);
        std::printf("  revenue share top 10%% %.4f  p50-p90 %.4f\n", r.top10, r.p50_p90);
    }
}
