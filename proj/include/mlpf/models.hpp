#pragma once

// Benchmark diffusions dX = a(X) dt + b(X) dW observed through
// Y_n | X_{n delta} ~ N(X_{n delta}, tau2).

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <cstdint>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mlpf/random.hpp"

namespace mlpf {

enum class ModelKind { OU, NDT, DW };

inline std::string_view to_string(ModelKind k) {
    switch (k) {
        case ModelKind::OU: return "ou";
        case ModelKind::NDT: return "ndt";
        case ModelKind::DW: return "dw";
    }
    return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
    if (s == "ou") return ModelKind::OU;
    if (s == "ndt") return ModelKind::NDT;
    if (s == "dw") return ModelKind::DW;
    throw std::invalid_argument("unknown model '" + std::string(s) + "' (expected ou|ndt|dw)");
}

/// Tilted double-well potential with quadratic growth outside [-2 k2, 2 k2].
/// The polynomial coefficients are always derived from k2.
class DwParams {
public:
    DwParams() : DwParams(std::numbers::sqrt2 / 12.0, std::numbers::sqrt2) {}

    DwParams(double k1, double k2) : k1_(k1), k2_(k2) {
        if (!(std::abs(k1) < std::sqrt(64.0 / 27.0)))
            throw std::invalid_argument("double well: |k1| must be below sqrt(64/27)");
        if (!(k2 >= std::numbers::sqrt2 - 1e-15))
            throw std::invalid_argument("double well: k2 must be at least sqrt(2)");
        const double k22 = k2 * k2;
        c_ = {(k22 - 1.0) * (k22 - 1.0), 4.0 * k2 * (k22 - 1.0), 2.0 * (3.0 * k22 - 1.0),
              4.0 * k2, -1.0};
        chat_ = {14.0 * k22 * k22 - 8.0 * k22 + 1.0, c_[2] * c_[3], 2.0 * (6.0 * k22 - 1.0)};
    }

    double k1() const noexcept { return k1_; }
    double k2() const noexcept { return k2_; }
    const std::array<double, 5>& c() const noexcept { return c_; }
    const std::array<double, 3>& chat() const noexcept { return chat_; }
    double h_max() const noexcept { return 1.0 / chat_[2]; }

    /// Potential value on each branch, extended beyond the branch domain
    /// (used to compare branches at the breakpoints).
    double inner_potential(double x) const noexcept {
        const double s = x * x - 1.0;
        return k1_ * x + s * s;
    }
    double middle_potential(double x) const noexcept {
        const double s = std::abs(x) - k2_;
        return k1_ * x + c_[0] + s * (c_[1] + s * (c_[2] + s * (c_[3] + s * c_[4])));
    }
    double outer_potential(double x) const noexcept {
        const double s = std::abs(x) - 2.0 * k2_;
        return k1_ * x + chat_[0] + s * (chat_[1] + s * chat_[2]);
    }

    double inner_drift(double x) const noexcept { return -k1_ - 4.0 * x * (x * x - 1.0); }
    double middle_drift(double x) const noexcept {
        const double s = std::abs(x) - k2_;
        const double sgn = x < 0.0 ? -1.0 : 1.0;
        return -k1_ -
               sgn * (c_[1] + s * (2.0 * c_[2] + s * (3.0 * c_[3] + s * 4.0 * c_[4])));
    }
    double outer_drift(double x) const noexcept {
        const double s = std::abs(x) - 2.0 * k2_;
        const double sgn = x < 0.0 ? -1.0 : 1.0;
        return -k1_ - sgn * (chat_[1] + 2.0 * chat_[2] * s);
    }

    double potential(double x) const noexcept {
        const double ax = std::abs(x);
        if (ax <= k2_) return inner_potential(x);
        if (ax <= 2.0 * k2_) return middle_potential(x);
        return outer_potential(x);
    }

    double drift(double x) const noexcept {
        const double ax = std::abs(x);
        if (ax <= k2_) return inner_drift(x);
        if (ax <= 2.0 * k2_) return middle_drift(x);
        return outer_drift(x);
    }

    /// Stationary points r_j of the tilted quartic, j = 0, 1, 2.
    double stationary_point(int j) const {
        return 2.0 / std::sqrt(3.0) *
               std::cos(std::acos(-3.0 * std::sqrt(3.0) * k1_ / 8.0) / 3.0 -
                        2.0 * std::numbers::pi * j / 3.0);
    }

private:
    double k1_, k2_;
    std::array<double, 5> c_{};
    std::array<double, 3> chat_{};
};

/// Tabulated Gibbs density exp(-2 pi(x) / sigma^2) with inverse-CDF sampling.
class GibbsTable {
public:
    static constexpr double kLower = -4.0;
    static constexpr double kUpper = 4.0;
    static constexpr std::size_t kNodes = std::size_t{1} << 14;

    GibbsTable(const DwParams& dw, double sigma) : nodes_(kNodes), density_(kNodes), cdf_(kNodes) {
        const double dx = (kUpper - kLower) / static_cast<double>(kNodes - 1);
        const double scale = 2.0 / (sigma * sigma);
        double min_pot = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < kNodes; ++i) {
            nodes_[i] = kLower + dx * static_cast<double>(i);
            min_pot = std::min(min_pot, dw.potential(nodes_[i]));
        }
        for (std::size_t i = 0; i < kNodes; ++i)
            density_[i] = std::exp(-scale * (dw.potential(nodes_[i]) - min_pot));
        cdf_[0] = 0.0;
        for (std::size_t i = 1; i < kNodes; ++i)
            cdf_[i] = cdf_[i - 1] + 0.5 * dx * (density_[i] + density_[i - 1]);
        const double total = cdf_.back();
        for (auto& v : density_) v /= total;
        for (auto& v : cdf_) v /= total;
        cdf_.back() = 1.0;
    }

    std::span<const double> nodes() const noexcept { return nodes_; }
    std::span<const double> density() const noexcept { return density_; }
    std::span<const double> cdf() const noexcept { return cdf_; }

    double sample(double u) const {
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        if (it == cdf_.begin()) return nodes_.front();
        if (it == cdf_.end()) return nodes_.back();
        const auto j = static_cast<std::size_t>(it - cdf_.begin());
        const double span = cdf_[j] - cdf_[j - 1];
        const double t = span > 0.0 ? (u - cdf_[j - 1]) / span : 0.0;
        return nodes_[j - 1] + t * (nodes_[j] - nodes_[j - 1]);
    }

    /// Piecewise-linear CDF of the table at x.
    double cdf_at(double x) const {
        if (x <= kLower) return 0.0;
        if (x >= kUpper) return 1.0;
        const double dx = nodes_[1] - nodes_[0];
        const auto j = std::min(static_cast<std::size_t>((x - kLower) / dx), kNodes - 2);
        const double t = (x - nodes_[j]) / dx;
        return cdf_[j] + t * (cdf_[j + 1] - cdf_[j]);
    }

    /// Trapezoid moments of the tabulated density.
    double mean() const { return moment(1); }
    double variance() const {
        const double m = mean();
        return moment(2) - m * m;
    }

private:
    double moment(int k) const {
        const double dx = nodes_[1] - nodes_[0];
        double acc = 0.0;
        for (std::size_t i = 0; i < kNodes; ++i) {
            const double w = (i == 0 || i + 1 == kNodes) ? 0.5 : 1.0;
            acc += w * std::pow(nodes_[i], k) * density_[i];
        }
        return acc * dx;
    }

    std::vector<double> nodes_, density_, cdf_;
};

struct PointMass {
    double x0 = 0.0;
};
struct GaussianLaw {
    double mean = 0.0;
    double var = 1.0;
};
struct GibbsLaw {};
using InitialLaw = std::variant<PointMass, GaussianLaw, GibbsLaw>;

/// One benchmark model with its observation noise.
struct ModelSpec {
    ModelKind kind = ModelKind::OU;
    double theta = 1.0;
    double sigma = 0.5;
    double tau2 = 0.2;
    std::optional<DwParams> dw;
    InitialLaw initial = PointMass{0.0};
    std::shared_ptr<const GibbsTable> gibbs;

    static ModelSpec ou(double theta = 1.0, double sigma = 0.5, double tau2 = 0.2) {
        ModelSpec m;
        m.kind = ModelKind::OU;
        m.theta = theta;
        m.sigma = sigma;
        m.tau2 = tau2;
        m.initial = PointMass{0.0};
        m.validate();
        return m;
    }

    static ModelSpec ndt(double theta = 1.0, double sigma = 1.0, double tau2 = 0.1) {
        ModelSpec m;
        m.kind = ModelKind::NDT;
        m.theta = theta;
        m.sigma = sigma;
        m.tau2 = tau2;
        m.initial = GaussianLaw{0.0, tau2};
        m.validate();
        return m;
    }

    static ModelSpec double_well(double sigma = 1.0, double tau2 = 0.2, DwParams params = {}) {
        ModelSpec m;
        m.kind = ModelKind::DW;
        m.theta = 0.0;
        m.sigma = sigma;
        m.tau2 = tau2;
        m.dw = params;
        m.initial = GibbsLaw{};
        m.gibbs = std::make_shared<const GibbsTable>(params, sigma);
        m.validate();
        return m;
    }

    static ModelSpec defaults(ModelKind kind) {
        switch (kind) {
            case ModelKind::OU: return ou();
            case ModelKind::NDT: return ndt();
            case ModelKind::DW: return double_well();
        }
        throw std::invalid_argument("unknown model kind");
    }

    bool constant_diffusion() const noexcept { return kind != ModelKind::NDT; }

    void validate() const {
        if (!(sigma > 0.0)) throw std::invalid_argument("model: sigma must be positive");
        if (!(tau2 > 0.0)) throw std::invalid_argument("model: tau2 must be positive");
        switch (kind) {
            case ModelKind::DW:
                if (!dw || !gibbs || !std::holds_alternative<GibbsLaw>(initial))
                    throw std::invalid_argument("model: double well needs parameters and Gibbs initial law");
                break;
            case ModelKind::OU:
                if (!std::holds_alternative<PointMass>(initial))
                    throw std::invalid_argument("model: OU starts from a point mass");
                break;
            case ModelKind::NDT:
                if (!std::holds_alternative<GaussianLaw>(initial))
                    throw std::invalid_argument("model: NDT starts from a Gaussian");
                break;
        }
    }
};

// Concrete coefficient types for the hot loops. `visit_model` dispatches once
// per filter run so per-step code is inlined.

struct OuCoefficients {
    double theta, sigma;
    double drift(double x) const noexcept { return -theta * x; }
    double diffusion(double) const noexcept { return sigma; }
};

struct NdtCoefficients {
    double theta, sigma;
    double drift(double x) const noexcept { return -theta * x; }
    double diffusion(double x) const noexcept { return sigma / std::sqrt(1.0 + x * x); }
};

struct DwCoefficients {
    DwParams params;
    double sigma;
    double drift(double x) const noexcept { return params.drift(x); }
    double diffusion(double) const noexcept { return sigma; }
};

template <class F>
decltype(auto) visit_model(const ModelSpec& m, F&& f) {
    switch (m.kind) {
        case ModelKind::OU: return f(OuCoefficients{m.theta, m.sigma});
        case ModelKind::NDT: return f(NdtCoefficients{m.theta, m.sigma});
        case ModelKind::DW: return f(DwCoefficients{*m.dw, m.sigma});
    }
    throw std::invalid_argument("unknown model kind");
}

inline double drift(const ModelSpec& m, double x) {
    return visit_model(m, [x](const auto& c) { return c.drift(x); });
}

inline double diffusion(const ModelSpec& m, double x) {
    return visit_model(m, [x](const auto& c) { return c.diffusion(x); });
}

inline double dw_potential(const DwParams& p, double x) { return p.potential(x); }

inline double log_likelihood(double tau2, double y, double x) noexcept {
    const double r = y - x;
    return -0.5 * std::log(2.0 * std::numbers::pi * tau2) - r * r / (2.0 * tau2);
}

inline double log_likelihood(const ModelSpec& m, double y, double x) noexcept {
    return log_likelihood(m.tau2, y, x);
}

inline double likelihood(const ModelSpec& m, double y, double x) noexcept {
    return std::exp(log_likelihood(m, y, x));
}

struct Observation {
    int index = 0;  // n >= 1
    double time = 0.0;
    double y = 0.0;
};

/// Initial-law draw from a single uniform.
inline double sample_initial(const ModelSpec& m, double u) {
    return std::visit(
        [&](const auto& law) -> double {
            using L = std::decay_t<decltype(law)>;
            if constexpr (std::is_same_v<L, PointMass>) {
                return law.x0;
            } else if constexpr (std::is_same_v<L, GaussianLaw>) {
                return law.mean + std::sqrt(law.var) * normal_quantile(u);
            } else {
                return m.gibbs->sample(u);
            }
        },
        m.initial);
}

inline constexpr std::uint32_t kInitialLane = 0x1000u;

/// Initial-law draw for one particle of a filter, addressed in the dynamics
/// stream.
inline double sample_initial(const ModelSpec& m, const RandomStream& rng, std::uint32_t particle) {
    return sample_initial(m, rng.uniform_pair(particle, 0, 0, kInitialLane)[0]);
}

}  // namespace mlpf
