#pragma once

// Euler-Maruyama stepping at one level and synchronously coupled fine/coarse
// stepping over one observation interval.
//
// Increment layout in a dynamics stream: the standard normals for fine steps
// 2c and 2c+1 of particle i in interval b come from counter (i, b, c, 0).
// Every increment is therefore addressable without replay, and the fine side
// of a coupled run reads exactly the increments a single-level run reads.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

#include "mlpf/models.hpp"
#include "mlpf/random.hpp"

namespace mlpf {

struct LevelGrid {
    int level = 0;
    double delta = 0.5;
    int offset = 0;
    double h = 0.5;
    std::uint32_t steps_per_obs = 1;

    static LevelGrid make(int level, double delta, int offset = 0) {
        if (level < 0) throw std::invalid_argument("level must be nonnegative");
        if (offset < 0) throw std::invalid_argument("level offset must be nonnegative");
        if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
        if (level + offset > 30) throw std::invalid_argument("level too fine");
        LevelGrid g;
        g.level = level;
        g.delta = delta;
        g.offset = offset;
        g.steps_per_obs = std::uint32_t{1} << (offset + level);
        g.h = std::ldexp(delta, -(offset + level));
        return g;
    }

    /// Grid with the default level offset of the model (4 for the double well).
    static LevelGrid for_model(const ModelSpec& m, int level, double delta) {
        return make(level, delta, default_offset(m.kind));
    }

    static int default_offset(ModelKind k) { return k == ModelKind::DW ? 4 : 0; }

    LevelGrid coarser() const {
        if (level == 0) throw std::invalid_argument("level 0 has no coarser level");
        return make(level - 1, delta, offset);
    }
};

/// Rejects grids that violate the Euler stability bound of the double well.
inline void validate_grid(const ModelSpec& m, const LevelGrid& g) {
    if (m.kind == ModelKind::DW && g.h > m.dw->h_max() * (1.0 + 1e-12))
        throw std::invalid_argument("step size " + std::to_string(g.h) +
                                    " exceeds the double-well stability bound " +
                                    std::to_string(m.dw->h_max()));
}

template <class Coeffs>
inline double euler_step(const Coeffs& c, double x, double h, double dW) noexcept {
    return x + c.drift(x) * h + c.diffusion(x) * dW;
}

inline double euler_step(const ModelSpec& m, double x, double h, double dW) {
    return visit_model(m, [&](const auto& c) { return euler_step(c, x, h, dW); });
}

/// One interval at a single level. `particle` and `interval` address the
/// increments in the stream.
template <class Coeffs>
double propagate_interval(const Coeffs& c, double x, const LevelGrid& g, const RandomStream& rng,
                          std::uint32_t particle, std::uint32_t interval) {
    const double sh = std::sqrt(g.h);
    const std::uint32_t k = g.steps_per_obs;
    for (std::uint32_t s = 0; s < k; s += 2) {
        const auto z = rng.normal_pair(particle, interval, s / 2, 0);
        x = euler_step(c, x, g.h, sh * z[0]);
        if (s + 1 < k) x = euler_step(c, x, g.h, sh * z[1]);
    }
    return x;
}

inline double propagate_interval(const ModelSpec& m, double x, const LevelGrid& g,
                                 const RandomStream& rng, std::uint32_t particle = 0,
                                 std::uint32_t interval = 0) {
    return visit_model(m, [&](const auto& c) {
        return propagate_interval(c, x, g, rng, particle, interval);
    });
}

/// One interval of the fine chain at h_l and the coarse chain at h_{l-1},
/// each coarse increment being the sum of its two fine increments.
template <class Coeffs>
std::pair<double, double> propagate_coupled(const Coeffs& c, double xf, double xc,
                                            const LevelGrid& fine, const RandomStream& rng,
                                            std::uint32_t particle, std::uint32_t interval) {
    if (fine.level == 0) throw std::invalid_argument("coupled propagation needs level >= 1");
    const double h = fine.h;
    const double hc = 2.0 * h;
    const double sh = std::sqrt(h);
    for (std::uint32_t s = 0; s < fine.steps_per_obs; s += 2) {
        const auto z = rng.normal_pair(particle, interval, s / 2, 0);
        const double dw0 = sh * z[0];
        const double dw1 = sh * z[1];
        xf = euler_step(c, xf, h, dw0);
        xf = euler_step(c, xf, h, dw1);
        xc = euler_step(c, xc, hc, dw0 + dw1);
    }
    return {xf, xc};
}

inline std::pair<double, double> propagate_coupled(const ModelSpec& m, double xf, double xc,
                                                   const LevelGrid& fine, const RandomStream& rng,
                                                   std::uint32_t particle = 0,
                                                   std::uint32_t interval = 0) {
    return visit_model(m, [&](const auto& c) {
        return propagate_coupled(c, xf, xc, fine, rng, particle, interval);
    });
}

}  // namespace mlpf
