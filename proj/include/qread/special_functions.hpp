#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace qread {

/// log(k!) with a precomputed table for the small arguments that dominate
/// pmf evaluation loops. Falls back to lgamma above the table.
inline double log_factorial(std::int64_t k) {
    if (k < 0) throw std::domain_error("log_factorial: negative argument");
    static const std::vector<double> table = [] {
        std::vector<double> t(1 << 16);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::lgamma(double(i) + 1.0);
        return t;
    }();
    if (std::size_t(k) < table.size()) return table[std::size_t(k)];
    return std::lgamma(double(k) + 1.0);
}

/// log C(m, n) for 0 <= n <= m.
inline double log_choose(std::int64_t m, std::int64_t n) {
    if (n < 0 || m < 0 || n > m) throw std::domain_error("log_choose: need 0 <= n <= m");
    return log_factorial(m) - log_factorial(n) - log_factorial(m - n);
}

namespace detail {

// Series expansion of the regularized lower incomplete gamma, valid x < a+1.
inline double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 10000000; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-17) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Modified Lentz continued fraction for the regularized upper incomplete
// gamma, valid x >= a+1.
inline double gamma_q_contfrac(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 10000000; ++i) {
        const double an = -double(i) * (double(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-17) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace detail

/// Regularized lower incomplete gamma P(a, x) = gamma(a,x)/Gamma(a).
inline double gamma_p(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw std::domain_error("gamma_p: need a > 0, x >= 0");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return detail::gamma_p_series(a, x);
    return 1.0 - detail::gamma_q_contfrac(a, x);
}

/// Regularized upper incomplete gamma Q(a, x) = Gamma(a,x)/Gamma(a).
inline double gamma_q(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw std::domain_error("gamma_q: need a > 0, x >= 0");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
    return detail::gamma_q_contfrac(a, x);
}

/// P(X <= k) for X ~ Poisson(lambda). Equals Q(k+1, lambda).
inline double poisson_cdf(std::int64_t k, double lambda) {
    if (k < 0) return 0.0;
    if (lambda == 0.0) return 1.0;
    return gamma_q(double(k) + 1.0, lambda);
}

/// Standard normal CDF.
inline double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

}  // namespace qread
