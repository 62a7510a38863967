#pragma once

// Change of measure for the coupled filter. Both chains run with an extra
// spring drift S (u_other - u_self) under a common measure, and each side
// carries the Radon-Nikodym factor of its Euler chain back to the original
// drift. Only constant diffusion coefficients are supported.
//
// State pairing inside one coarse step [t, t + 2h]: the coarse spring uses the
// fine state at t. The first fine step uses the coarse state at t, the second
// the coarse Euler interpolant at t + h, which is driven by the first fine
// increment and so is known when that step starts.

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "mlpf/dynamics.hpp"
#include "mlpf/filtering.hpp"
#include "mlpf/models.hpp"

namespace mlpf {

struct SpringConfig {
    double S = 0.0;
    bool enabled = false;
};

struct RnAccumulator {
    double log_R_fine = 0.0;
    double log_R_coarse = 0.0;
};

inline double spring_drift(const ModelSpec& m, double S, double u_self, double u_other) {
    return drift(m, u_self) + S * (u_other - u_self);
}

/// log R for one Euler step whose drift was shifted by s_term, given the
/// N(0, h) increment dW of the step.
inline double log_girsanov_factor(double dW, double s_term, double h, double sigma) noexcept {
    return -(dW * s_term) / sigma - (s_term * s_term * h) / (2.0 * sigma * sigma);
}

/// Maximum of the drift derivative over [-k2, k2], by central differences on
/// a grid.
inline double one_sided_lipschitz(const DwParams& p, std::size_t nodes = 4001) {
    const double a = -p.k2(), b = p.k2();
    const double dx = (b - a) / static_cast<double>(nodes - 1);
    const double e = 1e-5;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nodes; ++i) {
        const double x = a + dx * static_cast<double>(i);
        best = std::max(best, (p.inner_drift(x + e) - p.inner_drift(x - e)) / (2.0 * e));
    }
    return best;
}

inline double default_spring(const ModelSpec& m) {
    if (m.kind != ModelKind::DW) throw std::invalid_argument("spring default defined for the double well only");
    return one_sided_lipschitz(*m.dw);
}

template <class Coeffs>
struct SpringKernel {
    static constexpr bool has_rn = true;
    Coeffs coeffs;
    LevelGrid fine;
    double S;
    double sigma;

    void advance(double& uf, double& uc, double& log_rf, double& log_rc, const RandomStream& rng,
                 std::uint32_t particle, std::uint32_t interval) const {
        const double h = fine.h;
        const double hc = 2.0 * h;
        const double sh = std::sqrt(h);
        for (std::uint32_t s = 0; s < fine.steps_per_obs; s += 2) {
            const auto z = rng.normal_pair(particle, interval, s / 2, 0);
            const double dw0 = sh * z[0];
            const double dw1 = sh * z[1];
            const double uc_left = uc;
            const double sc = S * (uf - uc_left);

            const double ac = coeffs.drift(uc_left) + sc;
            double sf = S * (uc_left - uf);
            uf = uf + (coeffs.drift(uf) + sf) * h + sigma * dw0;
            log_rf += log_girsanov_factor(dw0, sf, h, sigma);
            const double uc_mid = uc_left + ac * h + sigma * dw0;
            sf = S * (uc_mid - uf);
            uf = uf + (coeffs.drift(uf) + sf) * h + sigma * dw1;
            log_rf += log_girsanov_factor(dw1, sf, h, sigma);

            const double dwc = dw0 + dw1;
            uc = uc_left + ac * hc + sigma * dwc;
            log_rc += log_girsanov_factor(dwc, sc, hc, sigma);
        }
    }
};

namespace detail {

inline void require_constant_diffusion(const ModelSpec& m) {
    if (!m.constant_diffusion())
        throw std::invalid_argument("change of measure needs a constant diffusion coefficient");
}

}  // namespace detail

struct ComStep {
    double fine = 0.0;
    double coarse = 0.0;
    RnAccumulator rn;
};

/// One observation interval of the spring-coupled pair with its log R.
inline ComStep propagate_coupled_com(const ModelSpec& m, double uf, double uc,
                                     const LevelGrid& fine, double S, const RandomStream& rng,
                                     std::uint32_t particle = 0, std::uint32_t interval = 0) {
    detail::require_constant_diffusion(m);
    if (fine.level < 1) throw std::invalid_argument("coupled propagation needs level >= 1");
    ComStep out;
    visit_model(m, [&](const auto& c) {
        using C = std::decay_t<decltype(c)>;
        SpringKernel<C>{c, fine, S, m.sigma}.advance(uf, uc, out.rn.log_R_fine,
                                                     out.rn.log_R_coarse, rng, particle, interval);
    });
    if (!std::isfinite(uf) || !std::isfinite(uc))
        throw std::runtime_error("non-finite state under spring coupling");
    out.fine = uf;
    out.coarse = uc;
    return out;
}

inline FilterOutput run_coupled_pf_com(const ModelSpec& model, std::span<const Observation> obs,
                                       const LevelGrid& fine, std::size_t n,
                                       const ResamplePolicy& policy, const TestFunction& phi,
                                       double S, const FilterRng& rng) {
    detail::require_constant_diffusion(model);
    if (policy.mode != ResampleMode::Always)
        throw std::invalid_argument("change of measure requires resampling at every observation");
    if (fine.level < 1) throw std::invalid_argument("coupled filter needs level >= 1");
    validate_grid(model, fine.coarser());
    return visit_model(model, [&](const auto& coeffs) {
        using C = std::decay_t<decltype(coeffs)>;
        return run_coupled_engine(model, obs, fine.delta, n, policy, phi, rng,
                                  SpringKernel<C>{coeffs, fine, S, model.sigma});
    });
}

}  // namespace mlpf
