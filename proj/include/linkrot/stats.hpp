#pragma once

// Scalar statistics helpers shared across the modeling code. The normal
// log-CDF switches to an asymptotic tail expansion so censored likelihood
// terms stay finite for arguments far into the lower tail.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "linkrot/errors.hpp"

namespace linkrot {

inline double norm_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

inline double norm_log_pdf(double z) {
    return -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi);
}

inline double norm_cdf(double z) {
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

/// log Phi(z), finite for all z (down to z ~ -1e7 and beyond).
inline double norm_log_cdf(double z) {
    if (z > -8.0) {
        return std::log(0.5 * std::erfc(-z / std::numbers::sqrt2));
    }
    // Tail: Phi(z) ~ phi(z)/(-z) * (1 - 1/z^2 + 3/z^4 - 15/z^6)
    const double z2 = z * z;
    const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
    return norm_log_pdf(z) - std::log(-z) + std::log(series);
}

/// phi(z)/Phi(z), the inverse Mills ratio; ~ -z for z << 0.
inline double inv_mills(double z) {
    return std::exp(norm_log_pdf(z) - norm_log_cdf(z));
}

inline double mean(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

/// Sample standard deviation with divisor n (population form); standardize()
/// relies on this matching its own z-score transform.
inline double stddev_n(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    const double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size()));
}

inline double median_of(std::vector<double> xs) {
    if (xs.empty()) return 0.0;
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    if (n % 2 == 1) return xs[n / 2];
    return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

// Regularized incomplete beta via continued fraction (Lentz), used for the
// two-sided t test on Pearson correlations.
namespace detail {

inline double betacf(double a, double b, double x) {
    const int max_iter = 300;
    const double eps = 3e-14, fpmin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

inline double inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                         a * std::log(x) + b * std::log(1.0 - x);
    const double bt = std::exp(ln_bt);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return bt * betacf(a, b, x) / a;
    }
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

}  // namespace detail

/// Two-sided p-value for a t statistic with df degrees of freedom.
inline double t_two_sided_p(double t, double df) {
    if (!std::isfinite(t)) return 0.0;
    return detail::inc_beta(0.5 * df, 0.5, df / (df + t * t));
}

struct Correlation {
    double r;
    double p;
    bool defined;  // false when either column is constant
};

inline Correlation pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 3) throw TooFewRows();
    const std::size_t n = x.size();
    const double mx = mean(x), my = mean(y);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return {0.0, 1.0, false};
    double r = sxy / std::sqrt(sxx * syy);
    if (r > 1.0) r = 1.0;
    if (r < -1.0) r = -1.0;
    const double df = static_cast<double>(n) - 2.0;
    if (std::fabs(r) >= 1.0) return {r, 0.0, true};
    const double t = r * std::sqrt(df / (1.0 - r * r));
    return {r, t_two_sided_p(t, df), true};
}

/// Shortest round-trip decimal for a double; keeps CSV/JSON output
/// byte-stable across runs.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw IoError("format_double failed");
    return std::string(buf, ptr);
}

}  // namespace linkrot
