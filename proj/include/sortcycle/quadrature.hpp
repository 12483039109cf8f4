#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace sortcycle::quad {

/// Nodes and weights for \int e^{-x^2} f(x) dx.
struct GaussHermiteRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Newton iteration on the orthonormal Hermite recurrence with the usual
/// asymptotic starting guesses for the largest roots.
inline GaussHermiteRule gauss_hermite(std::size_t n) {
    if (n == 0) throw std::invalid_argument("gauss_hermite: n must be positive");
    GaussHermiteRule rule;
    rule.nodes.assign(n, 0.0);
    rule.weights.assign(n, 0.0);
    const double pim4 = 1.0 / std::pow(std::numbers::pi, 0.25);
    const std::size_t m = (n + 1) / 2;
    const double nd = static_cast<double>(n);
    double z = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        if (i == 0)
            z = std::sqrt(2.0 * nd + 1.0) - 1.85575 * std::pow(2.0 * nd + 1.0, -0.16667);
        else if (i == 1)
            z -= 1.14 * std::pow(nd, 0.426) / z;
        else if (i == 2)
            z = 1.86 * z - 0.86 * rule.nodes[0];
        else if (i == 3)
            z = 1.91 * z - 0.91 * rule.nodes[1];
        else
            z = 2.0 * z - rule.nodes[i - 2];
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = pim4, p2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                const double jd = static_cast<double>(j);
                p1 = z * std::sqrt(2.0 / (jd + 1.0)) * p2 - std::sqrt(jd / (jd + 1.0)) * p3;
            }
            pp = std::sqrt(2.0 * nd) * p2;
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::fabs(z - z1) <= 1e-15 * std::max(1.0, std::fabs(z))) break;
        }
        rule.nodes[i] = z;
        rule.nodes[n - 1 - i] = -z;
        rule.weights[i] = 2.0 / (pp * pp);
        rule.weights[n - 1 - i] = rule.weights[i];
    }
    return rule;
}

/// E[f(sigma * Z)], Z ~ N(0,1). sigma == 0 evaluates f(0) once.
template <class F>
double normal_expectation(F&& f, double sigma, const GaussHermiteRule& rule) {
    if (sigma == 0.0) return f(0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        acc += rule.weights[i] * f(std::numbers::sqrt2 * sigma * rule.nodes[i]);
    return acc / std::sqrt(std::numbers::pi);
}

/// Adaptive 31-point Gauss-Kronrod on [a, b] (b may be +infinity).
template <class F>
double integrate(F&& f, double a, double b, double rel_tol = 1e-13, double* error = nullptr,
                 unsigned max_depth = 30) {
    double err = 0.0;
    const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        f, a, b, max_depth, rel_tol, &err);
    if (error) *error = err;
    return value;
}

}  // namespace sortcycle::quad
