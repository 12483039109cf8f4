#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace sortcycle::stats {

struct VarianceEstimate {
    double mean = 0.0;
    double variance = 0.0;
    double standard_error = 0.0;  // of the variance estimate
};

/// Sample variance (divisor n) with the large-sample SE sqrt((m4 - v^2) / n).
inline VarianceEstimate variance(std::span<const double> y) {
    if (y.empty()) throw std::invalid_argument("variance: empty sample");
    const double n = static_cast<double>(y.size());
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= n;
    double m2 = 0.0, m4 = 0.0;
    for (double v : y) {
        const double d2 = (v - mean) * (v - mean);
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    return {mean, m2, std::sqrt(std::max(0.0, m4 - m2 * m2) / n)};
}

/// Self-normalised weighted variance; SE by the delta method for ratio estimators.
inline VarianceEstimate weighted_variance(std::span<const double> y, std::span<const double> w) {
    if (y.empty() || y.size() != w.size()) throw std::invalid_argument("weighted_variance: bad sizes");
    double sw = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        sw += w[i];
        mean += w[i] * y[i];
    }
    mean /= sw;
    double var = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) var += w[i] * (y[i] - mean) * (y[i] - mean);
    var /= sw;
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = (y[i] - mean) * (y[i] - mean) - var;
        s += w[i] * w[i] * r * r;
    }
    return {mean, var, std::sqrt(s) / sw};
}

/// Hill estimator of the Pareto tail index from log-levels, using the k largest.
inline double hill_tail_index(std::vector<double> log_values, std::size_t k) {
    if (k == 0 || k >= log_values.size()) throw std::invalid_argument("hill_tail_index: bad k");
    std::nth_element(log_values.begin(), log_values.begin() + static_cast<std::ptrdiff_t>(k),
                     log_values.end(), std::greater<>());
    const double threshold = log_values[k];
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) acc += log_values[i] - threshold;
    return static_cast<double>(k) / acc;
}

/// Kolmogorov-Smirnov distance between a sample and Exp(rate).
inline double ks_distance_exponential(std::vector<double> sample, double rate) {
    if (sample.empty()) throw std::invalid_argument("ks_distance_exponential: empty sample");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double cdf = sample[i] <= 0.0 ? 0.0 : -std::expm1(-rate * sample[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - cdf, cdf - static_cast<double>(i) / n});
    }
    return d;
}

}  // namespace sortcycle::stats
