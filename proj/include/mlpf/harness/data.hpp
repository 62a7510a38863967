#pragma once

// Synthetic observation series from a fine-level Euler path.

#include <cmath>
#include <cstdint>
#include <vector>

#include "mlpf/dynamics.hpp"
#include "mlpf/harness/records.hpp"
#include "mlpf/models.hpp"
#include "mlpf/random.hpp"

namespace mlpf {

struct SyntheticData {
    std::vector<Observation> observations;
    std::vector<double> latent;  // state at t = n delta, n = 0..D
};

inline constexpr std::uint32_t kObservationNoiseLane = 1;

/// Latent increments come from the stream's dynamics layout (particle 0),
/// the noise for observation n from counter (0, n, 0, kObservationNoiseLane).
inline SyntheticData synthesize_data(const ModelSpec& m, int observations, double delta,
                                     int fine_level, const RandomStream& rng) {
    if (observations < 1) throw std::invalid_argument("need at least one observation");
    const LevelGrid g = LevelGrid::for_model(m, fine_level, delta);
    validate_grid(m, g);
    const double tau = std::sqrt(m.tau2);
    SyntheticData d;
    double x = sample_initial(m, rng, 0);
    d.latent.push_back(x);
    for (int n = 1; n <= observations; ++n) {
        x = propagate_interval(m, x, g, rng, 0, static_cast<std::uint32_t>(n - 1));
        if (!std::isfinite(x)) throw std::runtime_error("latent path diverged");
        d.latent.push_back(x);
        const double z = rng.normal_pair(0, static_cast<std::uint32_t>(n), 0, kObservationNoiseLane)[0];
        d.observations.push_back({n, n * delta, x + tau * z});
    }
    return d;
}

inline std::vector<DataRecord> data_records(const SyntheticData& d) {
    std::vector<DataRecord> out;
    for (const auto& o : d.observations) out.push_back({o.index, o.time, o.y});
    return out;
}

inline std::vector<LatentRecord> latent_records(const SyntheticData& d, double delta) {
    std::vector<LatentRecord> out;
    for (std::size_t n = 0; n < d.latent.size(); ++n)
        out.push_back({static_cast<int>(n), static_cast<double>(n) * delta, d.latent[n]});
    return out;
}

inline std::vector<Observation> observations_from(const std::vector<DataRecord>& rows) {
    std::vector<Observation> obs;
    for (const auto& r : rows) obs.push_back({r.n, r.t, r.y});
    return obs;
}

}  // namespace mlpf
