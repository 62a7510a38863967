#pragma once

// Effective sample size, weighted empirical CDFs and the resamplers:
// multinomial for single ensembles, and for coupled ensembles the maximal
// index coupling and the inverse-CDF (Wasserstein) coupling.
//
// Uniform layout in a resampling stream for output pair n at observation b:
// counter (n, b, 0, 0) gives slots 0 and 1, counter (n, b, 1, 0) gives slot 2.
//   slot 0: V (maximal coupling branch choice)
//   slot 1: U (inverse-CDF lookup, multinomial) or P (shared/first index)
//   slot 2: Q (second residual index)

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "mlpf/random.hpp"

namespace mlpf {

struct WeightedEnsemble {
    std::vector<double> positions;
    std::vector<double> weights;

    WeightedEnsemble() = default;
    WeightedEnsemble(std::vector<double> x, std::vector<double> w)
        : positions(std::move(x)), weights(std::move(w)) {}

    /// N atoms with uniform weights.
    static WeightedEnsemble uniform(std::vector<double> x) {
        const std::size_t n = x.size();
        return {std::move(x), std::vector<double>(n, 1.0 / static_cast<double>(n))};
    }

    std::size_t size() const noexcept { return positions.size(); }

    void validate() const {
        if (positions.empty()) throw std::invalid_argument("ensemble is empty");
        if (weights.size() != positions.size())
            throw std::invalid_argument("ensemble positions and weights differ in length");
        double s = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0)) throw std::invalid_argument("negative or NaN weight");
            s += w;
        }
        if (std::abs(s - 1.0) > 1e-12) throw std::invalid_argument("weights do not sum to 1");
    }
};

struct CoupledEnsemble {
    WeightedEnsemble fine;
    WeightedEnsemble coarse;

    std::size_t size() const noexcept { return fine.size(); }

    void validate() const {
        fine.validate();
        coarse.validate();
        if (fine.size() != coarse.size())
            throw std::invalid_argument("coupled ensemble sides differ in size");
    }
};

inline double ess(std::span<const double> weights) {
    double s2 = 0.0;
    for (double w : weights) s2 += w * w;
    if (!(s2 > 0.0)) throw std::invalid_argument("ess of all-zero weights");
    return 1.0 / s2;
}

/// Normalizes nonnegative weights in place; returns the original total.
inline double normalize(std::span<double> w) {
    const double s = std::accumulate(w.begin(), w.end(), 0.0);
    if (!(s > 0.0) || !std::isfinite(s)) throw std::runtime_error("weights cannot be normalized");
    for (double& v : w) v /= s;
    return s;
}

/// Turns log weights into normalized weights with max-subtraction.
inline void normalize_log_weights(std::span<const double> logw, std::span<double> w) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logw) {
        if (std::isnan(v)) throw std::runtime_error("NaN log weight");
        mx = std::max(mx, v);
    }
    if (!std::isfinite(mx))
        throw std::runtime_error("weight collapse: every particle has zero weight");
    double s = 0.0;
    for (std::size_t i = 0; i < logw.size(); ++i) {
        w[i] = std::exp(logw[i] - mx);
        s += w[i];
    }
    for (double& v : w) v /= s;
}

struct EmpiricalCdf {
    std::vector<double> sorted_positions;
    std::vector<double> cum_weights;
    std::vector<std::size_t> order;  // input index of each sorted atom

    std::size_t size() const noexcept { return sorted_positions.size(); }
};

inline EmpiricalCdf build_cdf(const WeightedEnsemble& ens) {
    const std::size_t n = ens.size();
    if (n == 0) throw std::invalid_argument("build_cdf of empty ensemble");
    EmpiricalCdf cdf;
    cdf.order.resize(n);
    std::iota(cdf.order.begin(), cdf.order.end(), std::size_t{0});
    std::stable_sort(cdf.order.begin(), cdf.order.end(), [&](std::size_t a, std::size_t b) {
        return ens.positions[a] < ens.positions[b];
    });
    cdf.sorted_positions.resize(n);
    cdf.cum_weights.resize(n);
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        cdf.sorted_positions[j] = ens.positions[cdf.order[j]];
        acc += ens.weights[cdf.order[j]];
        cdf.cum_weights[j] = acc;
    }
    return cdf;
}

namespace detail {

/// Smallest j with cum[j] >= u. A u above the rounded total maps to the last
/// atom with positive mass.
inline std::size_t generalized_inverse(std::span<const double> cum, double u) {
    const auto it = std::lower_bound(cum.begin(), cum.end(), u);
    if (it != cum.end()) return static_cast<std::size_t>(it - cum.begin());
    std::size_t j = cum.size() - 1;
    while (j > 0 && cum[j] == cum[j - 1]) --j;
    return j;
}

inline void check_unit(double u) {
    if (!(u >= 0.0 && u < 1.0)) throw std::invalid_argument("inverse_cdf: u outside [0,1)");
}

}  // namespace detail

inline std::size_t inverse_cdf_rank(const EmpiricalCdf& cdf, double u) {
    detail::check_unit(u);
    return detail::generalized_inverse(cdf.cum_weights, u);
}

inline double inverse_cdf(const EmpiricalCdf& cdf, double u) {
    return cdf.sorted_positions[inverse_cdf_rank(cdf, u)];
}

/// Input indices chosen by a resampler, for diagnostics and tests.
struct ResampleTrace {
    std::vector<std::size_t> fine_index;
    std::vector<std::size_t> coarse_index;
    std::vector<bool> shared;  // maximal coupling only: shared-index branch taken

    void reset(std::size_t n, bool with_shared) {
        fine_index.assign(n, 0);
        coarse_index.assign(n, 0);
        shared.assign(with_shared ? n : 0, false);
    }
};

inline std::array<double, 3> resampling_uniforms(const RandomStream& rng, std::uint32_t pair,
                                                 std::uint32_t block) {
    const auto a = rng.uniform_pair(pair, block, 0, 0);
    const auto b = rng.uniform_pair(pair, block, 1, 0);
    return {a[0], a[1], b[0]};
}

inline WeightedEnsemble resample_multinomial(const WeightedEnsemble& ens, const RandomStream& rng,
                                             std::uint32_t block = 0,
                                             std::vector<std::size_t>* chosen = nullptr) {
    const std::size_t n = ens.size();
    std::vector<double> cum(n);
    std::partial_sum(ens.weights.begin(), ens.weights.end(), cum.begin());
    WeightedEnsemble out;
    out.positions.resize(n);
    out.weights.assign(n, 1.0 / static_cast<double>(n));
    if (chosen) chosen->resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform_pair(static_cast<std::uint32_t>(i), block, 0, 0)[1];
        const std::size_t j = detail::generalized_inverse(cum, u);
        out.positions[i] = ens.positions[j];
        if (chosen) (*chosen)[i] = j;
    }
    return out;
}

/// Inverse-CDF coupling: both members of pair n are the quantiles of their
/// own weighted empirical CDF at a shared uniform.
inline CoupledEnsemble resample_wasserstein(const CoupledEnsemble& ens, const RandomStream& rng,
                                            std::uint32_t block = 0,
                                            ResampleTrace* trace = nullptr) {
    const std::size_t n = ens.size();
    const EmpiricalCdf ff = build_cdf(ens.fine);
    const EmpiricalCdf fc = build_cdf(ens.coarse);
    CoupledEnsemble out;
    out.fine.positions.resize(n);
    out.coarse.positions.resize(n);
    out.fine.weights.assign(n, 1.0 / static_cast<double>(n));
    out.coarse.weights.assign(n, 1.0 / static_cast<double>(n));
    if (trace) trace->reset(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform_pair(static_cast<std::uint32_t>(i), block, 0, 0)[1];
        const std::size_t jf = detail::generalized_inverse(ff.cum_weights, u);
        const std::size_t jc = detail::generalized_inverse(fc.cum_weights, u);
        out.fine.positions[i] = ff.sorted_positions[jf];
        out.coarse.positions[i] = fc.sorted_positions[jc];
        if (trace) {
            trace->fine_index[i] = ff.order[jf];
            trace->coarse_index[i] = fc.order[jc];
        }
    }
    return out;
}

/// Overlap mass sum_n min(w1_n, w2_n) of two weight vectors.
inline double overlap(std::span<const double> w1, std::span<const double> w2) {
    double a = 0.0;
    for (std::size_t i = 0; i < w1.size(); ++i) a += std::min(w1[i], w2[i]);
    return a;
}

/// Maximal coupling of the two index laws: with probability alpha a shared
/// index from the normalized minimum, otherwise independent indices from the
/// normalized residuals.
inline CoupledEnsemble resample_maximal(const CoupledEnsemble& ens, const RandomStream& rng,
                                        std::uint32_t block = 0, ResampleTrace* trace = nullptr) {
    const std::size_t n = ens.size();
    const auto& w1 = ens.fine.weights;
    const auto& w2 = ens.coarse.weights;
    std::vector<double> cmin(n), cres1(n), cres2(n);
    double alpha = 0.0, r1 = 0.0, r2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double m = std::min(w1[i], w2[i]);
        alpha += m;
        r1 += w1[i] - m;
        r2 += w2[i] - m;
        cmin[i] = alpha;
        cres1[i] = r1;
        cres2[i] = r2;
    }
    const bool residual_possible = !(1.0 - alpha < 1e-14) && r1 > 0.0 && r2 > 0.0;
    if (!residual_possible) alpha = 1.0;

    CoupledEnsemble out;
    out.fine.positions.resize(n);
    out.coarse.positions.resize(n);
    out.fine.weights.assign(n, 1.0 / static_cast<double>(n));
    out.coarse.weights.assign(n, 1.0 / static_cast<double>(n));
    if (trace) trace->reset(n, true);
    for (std::size_t i = 0; i < n; ++i) {
        const auto u = resampling_uniforms(rng, static_cast<std::uint32_t>(i), block);
        std::size_t jf, jc;
        bool shared = u[0] < alpha || !residual_possible;
        if (shared) {
            jf = jc = detail::generalized_inverse(cmin, u[1] * cmin.back());
        } else {
            jf = detail::generalized_inverse(cres1, u[1] * r1);
            jc = detail::generalized_inverse(cres2, u[2] * r2);
        }
        out.fine.positions[i] = ens.fine.positions[jf];
        out.coarse.positions[i] = ens.coarse.positions[jc];
        if (trace) {
            trace->fine_index[i] = jf;
            trace->coarse_index[i] = jc;
            trace->shared[i] = shared;
        }
    }
    return out;
}

}  // namespace mlpf
