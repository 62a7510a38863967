#pragma once

// Per-level statistics (variance, bias proxy, cost), rate fits, tolerance
// sequences and the particle-allocation planner.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mlpf {

/// Estimates indexed by (repeat, observation, series).
class EstimateCube {
public:
    EstimateCube() = default;
    EstimateCube(std::size_t repeats, std::size_t observations, std::size_t series)
        : r_(repeats), o_(observations), s_(series), data_(repeats * observations * series, 0.0) {}

    std::size_t repeats() const noexcept { return r_; }
    std::size_t observations() const noexcept { return o_; }
    std::size_t series() const noexcept { return s_; }

    double& at(std::size_t r, std::size_t n, std::size_t s) { return data_[index(r, n, s)]; }
    double at(std::size_t r, std::size_t n, std::size_t s) const { return data_[index(r, n, s)]; }

private:
    std::size_t index(std::size_t r, std::size_t n, std::size_t s) const {
        if (r >= r_ || n >= o_ || s >= s_) throw std::out_of_range("estimate cube index");
        return (s * o_ + n) * r_ + r;
    }
    std::size_t r_ = 0, o_ = 0, s_ = 0;
    std::vector<double> data_;
};

/// Sample quantile by linear interpolation between order statistics at
/// position 1 + (n - 1) p.
inline double quantile_linear(std::vector<double> v, double p) {
    if (v.empty()) throw std::invalid_argument("quantile of empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile level outside [0,1]");
    std::sort(v.begin(), v.end());
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// N-scaled variance across repeats, averaged over observations then series.
inline double estimate_variance(const EstimateCube& e, double n_particles) {
    const std::size_t R = e.repeats();
    if (R < 2) throw std::invalid_argument("variance estimate needs at least 2 repeats");
    if (e.observations() == 0 || e.series() == 0) throw std::invalid_argument("empty estimates");
    double total = 0.0;
    for (std::size_t s = 0; s < e.series(); ++s) {
        double per_series = 0.0;
        for (std::size_t n = 0; n < e.observations(); ++n) {
            double mean = 0.0;
            for (std::size_t r = 0; r < R; ++r) mean += e.at(r, n, s);
            mean /= static_cast<double>(R);
            double ss = 0.0;
            for (std::size_t r = 0; r < R; ++r) {
                const double d = e.at(r, n, s) - mean;
                ss += d * d;
            }
            per_series += n_particles * ss / static_cast<double>(R - 1);
        }
        total += per_series / static_cast<double>(e.observations());
    }
    return total / static_cast<double>(e.series());
}

inline constexpr std::size_t kMinBiasRepeats = 10;

/// 90th percentile of |estimate| across repeats, averaged over observations
/// then series.
inline double estimate_bias(const EstimateCube& e, double level = 0.9) {
    if (e.repeats() < kMinBiasRepeats)
        throw std::invalid_argument("bias estimate needs at least " +
                                    std::to_string(kMinBiasRepeats) + " repeats");
    if (e.observations() == 0 || e.series() == 0) throw std::invalid_argument("empty estimates");
    std::vector<double> buf(e.repeats());
    double total = 0.0;
    for (std::size_t s = 0; s < e.series(); ++s) {
        double per_series = 0.0;
        for (std::size_t n = 0; n < e.observations(); ++n) {
            for (std::size_t r = 0; r < e.repeats(); ++r) buf[r] = std::abs(e.at(r, n, s));
            per_series += quantile_linear(buf, level);
        }
        total += per_series / static_cast<double>(e.observations());
    }
    return total / static_cast<double>(e.series());
}

/// Least-squares slope of log2(values) against level, negated.
inline double fit_rate(std::span<const double> levels, std::span<const double> values) {
    if (levels.size() != values.size()) throw std::invalid_argument("fit_rate: length mismatch");
    if (levels.size() < 3) throw std::invalid_argument("fit_rate needs at least 3 levels");
    const auto n = static_cast<double>(levels.size());
    double mx = 0.0, my = 0.0;
    std::vector<double> y(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] > 0.0) || !std::isfinite(values[i]))
            throw std::invalid_argument("fit_rate needs positive finite values");
        y[i] = std::log2(values[i]);
        mx += levels[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        sxy += (levels[i] - mx) * (y[i] - my);
        sxx += (levels[i] - mx) * (levels[i] - mx);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("fit_rate needs distinct levels");
    return -sxy / sxx;
}

inline double fit_rate(std::span<const int> levels, std::span<const double> values) {
    std::vector<double> l(levels.begin(), levels.end());
    return fit_rate(std::span<const double>(l), values);
}

inline std::vector<double> tolerance_sequence(double eps1, int k_max) {
    if (!(eps1 > 0.0)) throw std::invalid_argument("tolerance must be positive");
    if (k_max < 0) throw std::invalid_argument("k_max must be nonnegative");
    std::vector<double> eps;
    for (int k = 0; k <= k_max; ++k) eps.push_back(eps1 * std::pow(std::sqrt(0.5), k));
    return eps;
}

/// Statistics of one level. V, W describe the coupled difference estimator
/// at this level; V_base, W_base the single-level filter, used when the level
/// is the base of a plan. B is the bias proxy for truncating at this level.
struct LevelStats {
    int level = 0;
    double V = std::numeric_limits<double>::quiet_NaN();
    double B = std::numeric_limits<double>::quiet_NaN();
    double W = std::numeric_limits<double>::quiet_NaN();
    double V_base = std::numeric_limits<double>::quiet_NaN();
    double W_base = std::numeric_limits<double>::quiet_NaN();
    bool extrapolated = false;

    double base_V() const { return std::isfinite(V_base) ? V_base : V; }
    double base_W() const { return std::isfinite(W_base) ? W_base : W; }
};

struct MlpfPlan {
    double epsilon = 0.0;
    int l0 = 0;
    int L = 0;
    std::vector<long long> N;  // N[i] for level l0 + i
    double phi = 0.0;          // bias split: variance budget is (phi eps / C_xi)^2
    double C_xi = 2.0;
    double work = 0.0;         // sum_l W_l N_l
};

inline std::vector<long long> allocate_particles(std::span<const double> V,
                                                 std::span<const double> W, double phi_eps,
                                                 double C_xi) {
    if (V.size() != W.size() || V.empty()) throw std::invalid_argument("allocate: bad level count");
    if (!(phi_eps > 0.0) || !(C_xi > 0.0)) throw std::invalid_argument("allocate: bad tolerance");
    double sum = 0.0;
    for (std::size_t i = 0; i < V.size(); ++i) {
        if (!(V[i] > 0.0) || !(W[i] > 0.0) || !std::isfinite(V[i]) || !std::isfinite(W[i]))
            throw std::invalid_argument("allocate: V and W must be positive and finite");
        sum += std::sqrt(V[i] * W[i]);
    }
    const double f = (C_xi / phi_eps) * (C_xi / phi_eps);
    std::vector<long long> N(V.size());
    for (std::size_t i = 0; i < V.size(); ++i) {
        const double x = std::ceil(f * std::sqrt(V[i] / W[i]) * sum);
        if (!(x < 9.0e18)) throw std::invalid_argument("allocate: particle count overflows");
        N[i] = std::max(1LL, static_cast<long long>(x));
    }
    return N;
}

struct PlanOptions {
    std::optional<int> required_L;  // force the finest level
    std::optional<int> max_L;
};

namespace detail {

inline const LevelStats& stats_at(std::span<const LevelStats> stats, int l) {
    for (const auto& s : stats)
        if (s.level == l) return s;
    throw std::invalid_argument("no statistics for level " + std::to_string(l));
}

inline bool has_level(std::span<const LevelStats> stats, int l) {
    return std::any_of(stats.begin(), stats.end(), [l](const auto& s) { return s.level == l; });
}

}  // namespace detail

/// Plan for levels l0..L with the base at l0 and coupled levels above it.
inline MlpfPlan plan_for(std::span<const LevelStats> stats, int l0, int L, double epsilon,
                         double C_xi) {
    const double BL = detail::stats_at(stats, L).B;
    MlpfPlan p;
    p.epsilon = epsilon;
    p.l0 = l0;
    p.L = L;
    p.C_xi = C_xi;
    p.phi = 1.0 - BL / epsilon;
    std::vector<double> V, W;
    for (int l = l0; l <= L; ++l) {
        const auto& s = detail::stats_at(stats, l);
        V.push_back(l == l0 ? s.base_V() : s.V);
        W.push_back(l == l0 ? s.base_W() : s.W);
    }
    p.N = allocate_particles(V, W, p.phi * epsilon, C_xi);
    for (std::size_t i = 0; i < W.size(); ++i) p.work += W[i] * static_cast<double>(p.N[i]);
    return p;
}

/// Exhaustive search over contiguous (l0, L) with B_L < epsilon; ties go to
/// the smaller L, then the smaller l0.
inline MlpfPlan optimal_plan(std::span<const LevelStats> stats, double epsilon, double C_xi = 2.0,
                             const PlanOptions& opt = {}) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("tolerance must be positive");
    std::vector<int> levels;
    for (const auto& s : stats) levels.push_back(s.level);
    std::sort(levels.begin(), levels.end());
    std::optional<MlpfPlan> best;
    for (int L : levels) {
        if (opt.required_L && L != *opt.required_L) continue;
        if (opt.max_L && L > *opt.max_L) continue;
        const auto& sL = detail::stats_at(stats, L);
        if (!(sL.B < epsilon)) continue;
        for (int l0 = levels.front(); l0 <= L; ++l0) {
            bool usable = true;
            for (int l = l0; l <= L && usable; ++l) {
                if (!detail::has_level(stats, l)) {
                    usable = false;
                    break;
                }
                const auto& s = detail::stats_at(stats, l);
                const double v = l == l0 ? s.base_V() : s.V;
                const double w = l == l0 ? s.base_W() : s.W;
                usable = v > 0.0 && w > 0.0 && std::isfinite(v) && std::isfinite(w);
            }
            if (!usable) continue;
            MlpfPlan p = plan_for(stats, l0, L, epsilon, C_xi);
            if (!best || p.work < best->work) best = std::move(p);
        }
    }
    if (!best)
        throw std::invalid_argument("no level meets the bias budget for epsilon=" +
                                    std::to_string(epsilon) + "; measure finer levels");
    return *best;
}

/// Extends measured statistics to finer levels with fitted geometric decay:
/// V and B by their rates, W doubling per level.
inline std::vector<LevelStats> extrapolate_stats(std::vector<LevelStats> stats, int up_to,
                                                 double v_rate, double b_rate) {
    std::sort(stats.begin(), stats.end(),
              [](const auto& a, const auto& b) { return a.level < b.level; });
    if (stats.empty()) throw std::invalid_argument("extrapolate: no statistics");
    const LevelStats last = stats.back();
    for (int l = last.level + 1; l <= up_to; ++l) {
        const double d = l - last.level;
        LevelStats s;
        s.level = l;
        s.V = last.V * std::exp2(-v_rate * d);
        s.B = last.B * std::exp2(-b_rate * d);
        s.W = last.W * std::exp2(d);
        s.V_base = last.V_base;
        s.W_base = last.W_base * std::exp2(d);
        s.extrapolated = true;
        stats.push_back(s);
    }
    return stats;
}

}  // namespace mlpf
