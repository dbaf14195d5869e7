#ifndef OATK_TESTS_STATS_HPP
#define OATK_TESTS_STATS_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

// Independent statistical oracles for the test suites: classical special
// functions built from lgamma, plus the few tests the specs call for
// (chi-squared goodness of fit, Kolmogorov-Smirnov, one-sided paired t).
// Deliberately self-contained; nothing here touches the library under test.

namespace teststats {

// Regularized lower incomplete gamma P(a, x), series + continued fraction.
inline double gamma_p(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw std::invalid_argument("gamma_p: bad arguments");
    if (x == 0.0) return 0.0;
    const double lg = std::lgamma(a);
    if (x < a + 1.0) {
        // series expansion
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
        }
        return sum * std::exp(-x + a * std::log(x) - lg);
    }
    // continued fraction for Q(a, x)
    const double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-15) break;
    }
    const double q = std::exp(-x + a * std::log(x) - lg) * h;
    return 1.0 - q;
}

inline double gamma_q(double a, double x) { return 1.0 - gamma_p(a, x); }

/// p-value of a chi-squared statistic with dof degrees of freedom.
inline double chi_squared_p_value(double statistic, double dof) {
    return gamma_q(dof / 2.0, statistic / 2.0);
}

// Regularized incomplete beta I_x(a, b) via the continued fraction.
inline double betacf(double a, double b, double x) {
    const double tiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 500; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-15) break;
    }
    return h;
}

inline double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log(1.0 - x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * betacf(a, b, x) / a;
    }
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

/// One-sided p-value for Student's t with dof degrees of freedom,
/// P(T >= t).
inline double student_t_sf(double t, double dof) {
    const double x = dof / (dof + t * t);
    const double tail = 0.5 * incomplete_beta(dof / 2.0, 0.5, x);
    return t >= 0.0 ? tail : 1.0 - tail;
}

/// One-sided paired t-test that mean(a - b) > 0; returns the p-value.
inline double paired_t_p_value(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw std::invalid_argument("paired_t_p_value: need two samples of equal size >= 2");
    }
    const std::size_t n = a.size();
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(n - 1);
    if (var == 0.0) return mean > 0.0 ? 0.0 : 1.0;
    const double t = mean / std::sqrt(var / static_cast<double>(n));
    return student_t_sf(t, static_cast<double>(n - 1));
}

/// Kolmogorov-Smirnov test of sample against the uniform distribution on
/// [lo, hi]; returns the asymptotic p-value.
inline double ks_uniform_p_value(std::span<const double> sample, double lo, double hi) {
    if (sample.size() < 8 || !(hi > lo)) {
        throw std::invalid_argument("ks_uniform_p_value: bad arguments");
    }
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double d_stat = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double cdf = std::clamp((sorted[i] - lo) / (hi - lo), 0.0, 1.0);
        d_stat = std::max(d_stat, std::fabs(cdf - static_cast<double>(i) / n));
        d_stat = std::max(d_stat, std::fabs(static_cast<double>(i + 1) / n - cdf));
    }
    const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d_stat;
    double p = 0.0;
    double sign = 1.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = sign * std::exp(-2.0 * j * j * lambda * lambda);
        p += term;
        sign = -sign;
        if (std::fabs(term) < 1e-12) break;
    }
    return std::clamp(2.0 * p, 0.0, 1.0);
}

}  // namespace teststats

#endif
