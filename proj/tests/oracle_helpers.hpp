#pragma once

// Test-side oracles, independent of the library implementation paths they
// check: chi-square machinery, brute-force Poisson rates, ARI, and moment
// helpers.

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "bptd/model.hpp"

namespace oracle {

// Regularized lower incomplete gamma P(a, x), series + continued fraction.
inline double lower_regularized_gamma(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::invalid_argument("lower_regularized_gamma");
    if (x == 0.0) return 0.0;
    const double lg = std::lgamma(a);
    if (x < a + 1.0) {
        double term = 1.0 / a;
        double sum = term;
        for (int n = 1; n < 500; ++n) {
            term *= x / (a + n);
            sum += term;
            if (std::fabs(term) < std::fabs(sum) * 1e-15) break;
        }
        return sum * std::exp(-x + a * std::log(x) - lg);
    }
    // Lentz continued fraction for Q(a, x).
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int n = 1; n < 500; ++n) {
        const double an = -n * (n - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-15) break;
    }
    const double q = std::exp(-x + a * std::log(x) - lg) * h;
    return 1.0 - q;
}

inline double chi_square_cdf(double x, double df) {
    return lower_regularized_gamma(df / 2.0, x / 2.0);
}

inline double chi_square_critical(double df, double alpha) {
    double lo = 0.0, hi = df + 200.0 * std::sqrt(2.0 * df) + 200.0;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (chi_square_cdf(mid, df) < 1.0 - alpha) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

inline double chi_square_stat(std::span<const long long> counts, std::span<const double> probs,
                              long long total) {
    double stat = 0.0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        const double expected = probs[k] * static_cast<double>(total);
        const double diff = static_cast<double>(counts[k]) - expected;
        stat += diff * diff / expected;
    }
    return stat;
}

// Four-deep nested-loop Poisson rate, written directly from the state fields.
inline double brute_force_rate(const bptd::BPTDState& s, int i, int j, int a, int t) {
    double rate = 0.0;
    for (int c = 0; c < s.dims.C; ++c) {
        for (int d = 0; d < s.dims.C; ++d) {
            for (int k = 0; k < s.dims.K; ++k) {
                for (int r = 0; r < s.dims.R; ++r) {
                    rate += s.theta[static_cast<std::size_t>(i) * s.dims.C + c] *
                            s.theta[static_cast<std::size_t>(j) * s.dims.C + d] *
                            s.phi[static_cast<std::size_t>(a) * s.dims.K + k] *
                            s.psi[static_cast<std::size_t>(t) * s.dims.R + r] *
                            s.core[s.dims.core_index(c, d, k, r)];
                }
            }
        }
    }
    return rate;
}

inline double mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double sample_variance(std::span<const double> v) {
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return ss / static_cast<double>(v.size() - 1);
}

// Adjusted Rand index between two hard partitions.
inline double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size() || a.empty()) throw std::invalid_argument("adjusted_rand_index");
    std::map<std::pair<int, int>, long long> joint;
    std::map<int, long long> ca, cb;
    for (std::size_t n = 0; n < a.size(); ++n) {
        joint[{a[n], b[n]}] += 1;
        ca[a[n]] += 1;
        cb[b[n]] += 1;
    }
    auto choose2 = [](long long n) { return 0.5 * static_cast<double>(n) * static_cast<double>(n - 1); };
    double sum_joint = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (const auto& [key, n] : joint) sum_joint += choose2(n);
    for (const auto& [key, n] : ca) sum_a += choose2(n);
    for (const auto& [key, n] : cb) sum_b += choose2(n);
    const double total = choose2(static_cast<long long>(a.size()));
    const double expected = sum_a * sum_b / total;
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0;
    return (sum_joint - expected) / (max_index - expected);
}

}  // namespace oracle
