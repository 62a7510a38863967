#pragma once

// Bootstrap particle filter at one level and the coupled (fine, coarse)
// particle filter of a multilevel estimator.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mlpf/dynamics.hpp"
#include "mlpf/models.hpp"
#include "mlpf/random.hpp"
#include "mlpf/resampling.hpp"

namespace mlpf {

enum class ResampleMode { Threshold, Always };
enum class Coupler { Wasserstein, MaximalIndex };

inline std::string_view to_string(Coupler c) {
    return c == Coupler::Wasserstein ? "wasserstein" : "index";
}

inline Coupler parse_coupler(std::string_view s) {
    if (s == "wasserstein") return Coupler::Wasserstein;
    if (s == "index") return Coupler::MaximalIndex;
    throw std::invalid_argument("unknown algorithm '" + std::string(s) +
                                "' (expected wasserstein|index)");
}

struct ResamplePolicy {
    ResampleMode mode = ResampleMode::Threshold;
    double fraction = 0.25;  // 0 disables resampling
    Coupler coupler = Coupler::Wasserstein;

    static ResamplePolicy threshold(double fraction, Coupler c = Coupler::Wasserstein) {
        if (!(fraction >= 0.0 && fraction <= 1.0))
            throw std::invalid_argument("resampling threshold must lie in [0, 1]");
        return {ResampleMode::Threshold, fraction, c};
    }
    static ResamplePolicy always(Coupler c = Coupler::Wasserstein) {
        return {ResampleMode::Always, 1.0, c};
    }
    static ResamplePolicy defaults(ModelKind k, Coupler c) {
        return k == ModelKind::DW ? always(c) : threshold(0.25, c);
    }
};

inline bool should_resample(double ess_value, std::size_t n, const ResamplePolicy& p) {
    if (p.mode == ResampleMode::Always) return true;
    return ess_value < p.fraction * static_cast<double>(n);
}

using TestFunction = std::function<double(double)>;

inline double identity(double x) noexcept { return x; }

/// Per-observation record. Coarse and difference fields are NaN for a
/// single-level run.
struct FilterStep {
    int n = 0;
    double predictor = 0.0;
    double filter = 0.0;
    double predictor_coarse = std::numeric_limits<double>::quiet_NaN();
    double filter_coarse = std::numeric_limits<double>::quiet_NaN();
    double difference_predictor = std::numeric_limits<double>::quiet_NaN();
    double difference_filter = std::numeric_limits<double>::quiet_NaN();
    double ess_fine = 0.0;
    double ess_coarse = std::numeric_limits<double>::quiet_NaN();
    bool resampled = false;
};

struct FilterOutput {
    bool coupled = false;
    std::size_t particles = 0;
    std::vector<FilterStep> steps;
    double dynamics_seconds = 0.0;
    double resampling_seconds = 0.0;

    std::vector<double> filter_estimates() const {
        std::vector<double> v;
        v.reserve(steps.size());
        for (const auto& s : steps) v.push_back(coupled ? s.difference_filter : s.filter);
        return v;
    }
};

/// The two streams a filter run consumes.
struct FilterRng {
    RandomStream dynamics;
    RandomStream resampling;

    static FilterRng from(StreamId id) {
        id.purpose = Purpose::Dynamics;
        RandomStream d(id);
        id.purpose = Purpose::Resampling;
        return {d, RandomStream(id)};
    }
};

inline double predictor_difference(const CoupledEnsemble& ens, const TestFunction& phi) {
    double acc = 0.0;
    for (std::size_t i = 0; i < ens.size(); ++i)
        acc += ens.fine.weights[i] * phi(ens.fine.positions[i]) -
               ens.coarse.weights[i] * phi(ens.coarse.positions[i]);
    return acc;
}

namespace detail {

inline double weighted_mean(std::span<const double> w, std::span<const double> x,
                            const TestFunction& phi) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += w[i] * phi(x[i]);
    return acc;
}

/// Self-normalized estimate of phi under prior weights times likelihood.
inline double updated_mean(const WeightedEnsemble& e, const TestFunction& phi,
                           const ModelSpec& m, double y) {
    std::vector<double> lw(e.size()), w(e.size());
    for (std::size_t i = 0; i < e.size(); ++i)
        lw[i] = std::log(e.weights[i]) + log_likelihood(m, y, e.positions[i]);
    normalize_log_weights(lw, w);
    return weighted_mean(w, e.positions, phi);
}

inline void check_observations(std::span<const Observation> obs, double delta) {
    if (obs.empty()) throw std::invalid_argument("filter needs at least one observation");
    for (std::size_t k = 0; k < obs.size(); ++k) {
        if (obs[k].index != static_cast<int>(k + 1))
            throw std::invalid_argument("observations must be indexed 1, 2, ... consecutively");
        if (std::abs(obs[k].time - obs[k].index * delta) > 1e-9 * (1.0 + obs[k].time))
            throw std::invalid_argument("observation time does not match index * delta");
    }
}

inline void check_finite(double x) {
    if (!std::isfinite(x))
        throw std::runtime_error("non-finite particle state (Euler stability violated)");
}

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace detail

inline double filter_difference(const CoupledEnsemble& ens, const TestFunction& phi,
                                const ModelSpec& m, double y) {
    return detail::updated_mean(ens.fine, phi, m, y) - detail::updated_mean(ens.coarse, phi, m, y);
}

inline FilterOutput run_pf(const ModelSpec& model, std::span<const Observation> obs,
                           const LevelGrid& grid, std::size_t n, const ResamplePolicy& policy,
                           const TestFunction& phi, const FilterRng& rng) {
    if (n < 2) throw std::invalid_argument("particle filter needs N >= 2");
    validate_grid(model, grid);
    detail::check_observations(obs, grid.delta);

    return visit_model(model, [&](const auto& coeffs) {
        FilterOutput out;
        out.particles = n;
        out.steps.reserve(obs.size());
        WeightedEnsemble ens;
        ens.positions.resize(n);
        ens.weights.assign(n, 1.0 / static_cast<double>(n));
        std::vector<double> logw(n, 0.0);

        auto t0 = detail::Clock::now();
        for (std::size_t i = 0; i < n; ++i) {
            const auto p = static_cast<std::uint32_t>(i);
            ens.positions[i] = propagate_interval(coeffs, sample_initial(model, rng.dynamics, p),
                                                  grid, rng.dynamics, p, 0);
            detail::check_finite(ens.positions[i]);
        }
        out.dynamics_seconds += detail::seconds_since(t0);

        for (std::size_t k = 0; k < obs.size(); ++k) {
            FilterStep st;
            st.n = obs[k].index;
            st.predictor = detail::weighted_mean(ens.weights, ens.positions, phi);
            for (std::size_t i = 0; i < n; ++i)
                logw[i] += log_likelihood(model, obs[k].y, ens.positions[i]);
            normalize_log_weights(logw, ens.weights);
            st.filter = detail::weighted_mean(ens.weights, ens.positions, phi);
            st.ess_fine = ess(ens.weights);
            st.resampled = should_resample(st.ess_fine, n, policy);
            out.steps.push_back(st);
            if (k + 1 == obs.size()) break;

            if (st.resampled) {
                t0 = detail::Clock::now();
                ens = resample_multinomial(ens, rng.resampling, static_cast<std::uint32_t>(st.n));
                std::fill(logw.begin(), logw.end(), 0.0);
                out.resampling_seconds += detail::seconds_since(t0);
            }
            t0 = detail::Clock::now();
            for (std::size_t i = 0; i < n; ++i) {
                ens.positions[i] = propagate_interval(coeffs, ens.positions[i], grid, rng.dynamics,
                                                      static_cast<std::uint32_t>(i),
                                                      static_cast<std::uint32_t>(st.n));
                detail::check_finite(ens.positions[i]);
            }
            out.dynamics_seconds += detail::seconds_since(t0);
        }
        return out;
    });
}

/// Synchronous coupling: shared Brownian increments, no drift change.
template <class Coeffs>
struct SynchronousKernel {
    static constexpr bool has_rn = false;
    Coeffs coeffs;
    LevelGrid fine;

    void advance(double& xf, double& xc, double&, double&, const RandomStream& rng,
                 std::uint32_t particle, std::uint32_t interval) const {
        const auto r = propagate_coupled(coeffs, xf, xc, fine, rng, particle, interval);
        xf = r.first;
        xc = r.second;
    }
};

/// Coupled filter over any kernel providing
///   advance(xf, xc, log_r_fine, log_r_coarse, stream, particle, interval)
/// and a static `has_rn` flag. With `has_rn`, each side's weight at an
/// observation is the likelihood times exp(log R) of the interval just
/// completed, and log R is reset afterwards.
template <class Kernel>
FilterOutput run_coupled_engine(const ModelSpec& model, std::span<const Observation> obs,
                                double delta, std::size_t n, const ResamplePolicy& policy,
                                const TestFunction& phi, const FilterRng& rng,
                                const Kernel& kernel) {
    if (n < 2) throw std::invalid_argument("coupled filter needs N >= 2");
    detail::check_observations(obs, delta);

    FilterOutput out;
    out.coupled = true;
    out.particles = n;
    out.steps.reserve(obs.size());
    CoupledEnsemble ens;
    ens.fine = WeightedEnsemble::uniform(std::vector<double>(n));
    ens.coarse = WeightedEnsemble::uniform(std::vector<double>(n));
    std::vector<double> logw_f(n, 0.0), logw_c(n, 0.0), logr_f(n, 0.0), logr_c(n, 0.0);
    std::vector<double> tmp(n);

    auto advance_all = [&](std::uint32_t interval) {
        const auto t0 = detail::Clock::now();
        for (std::size_t i = 0; i < n; ++i) {
            kernel.advance(ens.fine.positions[i], ens.coarse.positions[i], logr_f[i], logr_c[i],
                           rng.dynamics, static_cast<std::uint32_t>(i), interval);
            detail::check_finite(ens.fine.positions[i]);
            detail::check_finite(ens.coarse.positions[i]);
        }
        out.dynamics_seconds += detail::seconds_since(t0);
    };

    for (std::size_t i = 0; i < n; ++i) {
        const double x0 = sample_initial(model, rng.dynamics, static_cast<std::uint32_t>(i));
        ens.fine.positions[i] = x0;
        ens.coarse.positions[i] = x0;
    }
    advance_all(0);

    auto prior_mean = [&](WeightedEnsemble& side, std::vector<double>& logw,
                          const std::vector<double>& logr) {
        if constexpr (Kernel::has_rn) {
            for (std::size_t i = 0; i < n; ++i) tmp[i] = logw[i] + logr[i];
            normalize_log_weights(tmp, side.weights);
        }
        return detail::weighted_mean(side.weights, side.positions, phi);
    };
    auto posterior = [&](WeightedEnsemble& side, std::vector<double>& logw,
                         std::vector<double>& logr, double y) {
        for (std::size_t i = 0; i < n; ++i) {
            logw[i] += log_likelihood(model, y, side.positions[i]);
            if constexpr (Kernel::has_rn) {
                logw[i] += logr[i];
                logr[i] = 0.0;
            }
        }
        normalize_log_weights(logw, side.weights);
        return detail::weighted_mean(side.weights, side.positions, phi);
    };

    for (std::size_t k = 0; k < obs.size(); ++k) {
        FilterStep st;
        st.n = obs[k].index;
        st.predictor = prior_mean(ens.fine, logw_f, logr_f);
        st.predictor_coarse = prior_mean(ens.coarse, logw_c, logr_c);
        st.difference_predictor = st.predictor - st.predictor_coarse;
        st.filter = posterior(ens.fine, logw_f, logr_f, obs[k].y);
        st.filter_coarse = posterior(ens.coarse, logw_c, logr_c, obs[k].y);
        st.difference_filter = st.filter - st.filter_coarse;
        st.ess_fine = ess(ens.fine.weights);
        st.ess_coarse = ess(ens.coarse.weights);
        st.resampled = should_resample(st.ess_coarse, n, policy);
        out.steps.push_back(st);
        if (k + 1 == obs.size()) break;

        if (st.resampled) {
            const auto t0 = detail::Clock::now();
            const auto block = static_cast<std::uint32_t>(st.n);
            ens = policy.coupler == Coupler::Wasserstein
                      ? resample_wasserstein(ens, rng.resampling, block)
                      : resample_maximal(ens, rng.resampling, block);
            std::fill(logw_f.begin(), logw_f.end(), 0.0);
            std::fill(logw_c.begin(), logw_c.end(), 0.0);
            out.resampling_seconds += detail::seconds_since(t0);
        }
        advance_all(static_cast<std::uint32_t>(st.n));
    }
    return out;
}

inline FilterOutput run_coupled_pf(const ModelSpec& model, std::span<const Observation> obs,
                                   const LevelGrid& fine, std::size_t n,
                                   const ResamplePolicy& policy, const TestFunction& phi,
                                   const FilterRng& rng) {
    if (fine.level < 1) throw std::invalid_argument("coupled filter needs level >= 1");
    validate_grid(model, fine.coarser());
    return visit_model(model, [&](const auto& coeffs) {
        using C = std::decay_t<decltype(coeffs)>;
        return run_coupled_engine(model, obs, fine.delta, n, policy, phi, rng,
                                  SynchronousKernel<C>{coeffs, fine});
    });
}

}  // namespace mlpf
