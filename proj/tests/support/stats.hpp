#pragma once

// Statistical oracles for the property tests. Distribution functions come
// from Boost.Math so they are independent of the library under test.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

namespace testing_support {

struct Moments {
    double mean = 0.0;
    double var = 0.0;  // unbiased
    double se = 0.0;   // standard error of the mean
};

inline Moments moments(const std::vector<double>& x) {
    Moments m;
    const auto n = static_cast<double>(x.size());
    m.mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x) ss += (v - m.mean) * (v - m.mean);
    m.var = ss / (n - 1.0);
    m.se = std::sqrt(m.var / n);
    return m;
}

/// Standard error of the unbiased sample variance for roughly normal data.
inline double variance_se(const std::vector<double>& x) {
    const auto m = moments(x);
    const auto n = static_cast<double>(x.size());
    double m4 = 0.0;
    for (double v : x) m4 += std::pow(v - m.mean, 4);
    m4 /= n;
    return std::sqrt(std::max(0.0, (m4 - m.var * m.var * (n - 3.0) / (n - 1.0)) / n));
}

/// Kolmogorov-Smirnov statistic of a sample against a continuous CDF.
inline double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf) {
    std::sort(x.begin(), x.end());
    const auto n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
inline double ks_critical_1pct(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

/// Chi-square goodness-of-fit p-value of counts against probabilities.
inline double chi_square_pvalue(const std::vector<double>& counts, const std::vector<double>& probs) {
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    double stat = 0.0;
    int cells = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (probs[i] <= 0.0) continue;
        const double e = total * probs[i];
        stat += (counts[i] - e) * (counts[i] - e) / e;
        ++cells;
    }
    boost::math::chi_squared dist(cells - 1);
    return boost::math::cdf(boost::math::complement(dist, stat));
}

/// Anderson-Darling statistic for normality with estimated mean and
/// variance, including the small-sample correction (1 + 0.75/n + 2.25/n^2).
inline double anderson_darling_normal(std::vector<double> x) {
    const auto m = moments(x);
    const double sd = std::sqrt(m.var);
    std::sort(x.begin(), x.end());
    const auto n = static_cast<double>(x.size());
    boost::math::normal z;
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double fi = boost::math::cdf(z, (x[i] - m.mean) / sd);
        const double fj = boost::math::cdf(z, (x[x.size() - 1 - i] - m.mean) / sd);
        s += (2.0 * static_cast<double>(i) + 1.0) * (std::log(fi) + std::log1p(-fj));
    }
    const double a2 = -n - s / n;
    return a2 * (1.0 + 0.75 / n + 2.25 / (n * n));
}

/// 1% critical value of the corrected statistic (mean and variance estimated).
inline constexpr double kAndersonDarling1pct = 1.035;

/// Least-squares slope of y against x.
inline double slope(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace testing_support
