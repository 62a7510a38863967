#pragma once

// Reference filters: the exact Kalman recursion for the OU model and a grid
// Fokker-Planck filter for the nonlinear models.
//
// Fokker-Planck discretization: node-centred finite volumes with zero-flux
// boundaries, exponentially fitted (Chang-Cooper / Scharfetter-Gummel) fluxes
// for F = (a - D') p - D p_x with D = b^2 / 2, and Crank-Nicolson in time
// with two backward-Euler half steps at the start of every interval.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "mlpf/models.hpp"

namespace mlpf {

struct GaussianState {
    double mean = 0.0;
    double var = 0.0;
};

inline GaussianState kalman_predict(const GaussianState& s, double theta, double sigma,
                                    double delta) {
    if (!(theta > 0.0)) throw std::invalid_argument("kalman_predict needs theta > 0");
    const double e1 = std::exp(-theta * delta);
    const double e2 = std::exp(-2.0 * theta * delta);
    return {s.mean * e1, s.var * e2 + sigma * sigma * (1.0 - e2) / (2.0 * theta)};
}

inline GaussianState kalman_update(const GaussianState& s, double y, double tau2) {
    if (!(tau2 > 0.0)) throw std::invalid_argument("kalman_update needs tau2 > 0");
    const double K = s.var / (s.var + tau2);
    return {s.mean + K * (y - s.mean), (1.0 - K) * s.var};
}

/// Nonnegative values on a uniform grid, normalized to unit trapezoid mass.
struct GridDensity {
    double x_min = -5.0;
    double x_max = 5.0;
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
    double dx() const { return (x_max - x_min) / static_cast<double>(values.size() - 1); }
    double node(std::size_t i) const { return x_min + dx() * static_cast<double>(i); }

    double integrate(const auto& f) const {
        const double h = dx();
        double acc = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double w = (i == 0 || i + 1 == values.size()) ? 0.5 : 1.0;
            acc += w * f(node(i)) * values[i];
        }
        return acc * h;
    }
    double mass() const { return integrate([](double) { return 1.0; }); }
    double mean() const { return integrate([](double x) { return x; }); }
    double variance() const {
        const double m = mean();
        return integrate([m](double x) { return (x - m) * (x - m); });
    }

    void normalize() {
        const double m = mass();
        if (!(m > 0.0) || !std::isfinite(m)) throw std::runtime_error("grid density has no mass");
        for (double& v : values) v /= m;
    }

    static GridDensity make(double x_min, double x_max, std::size_t nodes, const auto& pdf) {
        if (nodes < 3 || !(x_max > x_min)) throw std::invalid_argument("bad density grid");
        GridDensity d{x_min, x_max, std::vector<double>(nodes)};
        for (std::size_t i = 0; i < nodes; ++i) d.values[i] = pdf(d.node(i));
        d.normalize();
        return d;
    }

    /// Discrete point mass at the node nearest to x0.
    static GridDensity point_mass(double x_min, double x_max, std::size_t nodes, double x0) {
        GridDensity d{x_min, x_max, std::vector<double>(nodes, 0.0)};
        const double j = std::round((x0 - x_min) / d.dx());
        if (j < 0 || j >= static_cast<double>(nodes)) throw std::invalid_argument("point mass off grid");
        d.values[static_cast<std::size_t>(j)] = 1.0;
        d.normalize();
        return d;
    }
};

/// Grid extent used for each model's reference filter.
struct FpGrid {
    double x_min, x_max;
    std::size_t nodes;

    static FpGrid defaults(ModelKind k) {
        return k == ModelKind::OU ? FpGrid{-3.0, 3.0, 1201} : FpGrid{-5.0, 5.0, 2001};
    }
};

inline GridDensity initial_density(const ModelSpec& m, const FpGrid& g) {
    return std::visit(
        [&](const auto& law) {
            using L = std::decay_t<decltype(law)>;
            if constexpr (std::is_same_v<L, PointMass>) {
                return GridDensity::point_mass(g.x_min, g.x_max, g.nodes, law.x0);
            } else if constexpr (std::is_same_v<L, GaussianLaw>) {
                return GridDensity::make(g.x_min, g.x_max, g.nodes, [&](double x) {
                    const double r = x - law.mean;
                    return std::exp(-r * r / (2.0 * law.var));
                });
            } else {
                const double s2 = m.sigma * m.sigma;
                double lo = std::numeric_limits<double>::infinity();
                for (std::size_t i = 0; i < g.nodes; ++i)
                    lo = std::min(lo, m.dw->potential(g.x_min + (g.x_max - g.x_min) * i / (g.nodes - 1.0)));
                return GridDensity::make(g.x_min, g.x_max, g.nodes, [&](double x) {
                    return std::exp(-2.0 * (m.dw->potential(x) - lo) / s2);
                });
            }
        },
        m.initial);
}

/// Gibbs density of the double well sampled on a grid.
inline GridDensity gibbs_density(const ModelSpec& m, const FpGrid& g) {
    if (m.kind != ModelKind::DW) throw std::invalid_argument("Gibbs density needs the double well");
    return initial_density(m, g);
}

namespace detail {

/// w / (e^w - 1), continuous at 0.
inline double bernoulli_fn(double w) {
    if (std::abs(w) < 1e-8) return 1.0 - 0.5 * w;
    return w / std::expm1(w);
}

}  // namespace detail

/// Time-homogeneous Fokker-Planck propagator over one observation interval.
class FpSolver {
public:
    FpSolver(const ModelSpec& m, const FpGrid& g, double delta, int substeps = 200)
        : grid_(g), delta_(delta), substeps_(substeps) {
        if (!(delta > 0.0)) throw std::invalid_argument("fp: delta must be positive");
        if (substeps < 2) throw std::invalid_argument("fp: need at least 2 substeps");
        const std::size_t M = g.nodes;
        const double dx = (g.x_max - g.x_min) / static_cast<double>(M - 1);
        lower_.assign(M, 0.0);
        diag_.assign(M, 0.0);
        upper_.assign(M, 0.0);
        auto D = [&](double x) {
            const double b = diffusion(m, x);
            return 0.5 * b * b;
        };
        std::vector<double> vol(M, dx);
        vol.front() = vol.back() = 0.5 * dx;
        for (std::size_t i = 0; i + 1 < M; ++i) {
            const double xm = g.x_min + dx * (static_cast<double>(i) + 0.5);
            const double e = 1e-6;
            const double Dm = D(xm);
            const double A = drift(m, xm) - (D(xm + e) - D(xm - e)) / (2.0 * e);
            const double w = A * dx / Dm;
            // flux F = alpha p_i + beta p_{i+1}
            const double alpha = Dm / dx * detail::bernoulli_fn(-w);
            const double beta = -Dm / dx * detail::bernoulli_fn(w);
            diag_[i] -= alpha / vol[i];
            upper_[i] -= beta / vol[i];
            lower_[i + 1] += alpha / vol[i + 1];
            diag_[i + 1] += beta / vol[i + 1];
        }
    }

    const FpGrid& grid() const noexcept { return grid_; }
    double delta() const noexcept { return delta_; }

    /// Evolves the density over one interval and renormalizes. Returns the
    /// most negative value seen before renormalization.
    double predict(GridDensity& d) const {
        if (d.size() != grid_.nodes) throw std::invalid_argument("fp: density grid mismatch");
        const double dt = delta_ / substeps_;
        implicit_step(d.values, 0.5 * dt, 0.0);
        implicit_step(d.values, 0.5 * dt, 0.0);
        for (int s = 1; s < substeps_; ++s) implicit_step(d.values, 0.5 * dt, 0.5 * dt);
        const double lo = *std::min_element(d.values.begin(), d.values.end());
        if (lo < -1e-12) throw std::runtime_error("fp: negative density " + std::to_string(lo));
        for (double& v : d.values) v = std::max(v, 0.0);
        d.normalize();
        return lo;
    }

private:
    // Solves (I - a L) p' = (I + b L) p.
    void implicit_step(std::vector<double>& p, double a, double b) const {
        const std::size_t M = p.size();
        rhs_.resize(M);
        for (std::size_t i = 0; i < M; ++i) {
            double lp = diag_[i] * p[i];
            if (i > 0) lp += lower_[i] * p[i - 1];
            if (i + 1 < M) lp += upper_[i] * p[i + 1];
            rhs_[i] = p[i] + b * lp;
        }
        // Thomas algorithm
        cp_.resize(M);
        double denom = 1.0 - a * diag_[0];
        cp_[0] = -a * upper_[0] / denom;
        rhs_[0] /= denom;
        for (std::size_t i = 1; i < M; ++i) {
            const double l = -a * lower_[i];
            denom = (1.0 - a * diag_[i]) - l * cp_[i - 1];
            cp_[i] = i + 1 < M ? -a * upper_[i] / denom : 0.0;
            rhs_[i] = (rhs_[i] - l * rhs_[i - 1]) / denom;
        }
        p[M - 1] = rhs_[M - 1];
        for (std::size_t i = M - 1; i-- > 0;) p[i] = rhs_[i] - cp_[i] * p[i + 1];
    }

    FpGrid grid_;
    double delta_;
    int substeps_;
    std::vector<double> lower_, diag_, upper_;
    mutable std::vector<double> rhs_, cp_;
};

inline GridDensity fp_predict(const GridDensity& d, const ModelSpec& m, double delta,
                              int substeps = 200) {
    FpSolver solver(m, FpGrid{d.x_min, d.x_max, d.size()}, delta, substeps);
    GridDensity out = d;
    solver.predict(out);
    return out;
}

inline GridDensity fp_update(const GridDensity& d, double y, double tau2) {
    GridDensity out = d;
    double mx = -std::numeric_limits<double>::infinity();
    std::vector<double> ll(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        ll[i] = log_likelihood(tau2, y, d.node(i));
        if (d.values[i] > 0.0) mx = std::max(mx, ll[i]);
    }
    if (!std::isfinite(mx)) throw std::runtime_error("fp_update: density has no mass");
    for (std::size_t i = 0; i < d.size(); ++i) out.values[i] *= std::exp(ll[i] - mx);
    out.normalize();
    return out;
}

struct ReferenceOptions {
    bool force_grid = false;  // use the Fokker-Planck path for OU too
    std::optional<FpGrid> grid;
    int substeps = 200;
};

/// Filter means E[X_{n delta} | y_1..y_n] for every observation.
inline std::vector<double> run_reference_filter(const ModelSpec& m, std::span<const Observation> obs,
                                                double delta, const ReferenceOptions& opt = {}) {
    std::vector<double> means;
    means.reserve(obs.size());
    if (m.kind == ModelKind::OU && !opt.force_grid) {
        const auto& pm = std::get<PointMass>(m.initial);
        GaussianState s{pm.x0, 0.0};
        for (const auto& o : obs) {
            s = kalman_update(kalman_predict(s, m.theta, m.sigma, delta), o.y, m.tau2);
            means.push_back(s.mean);
        }
        return means;
    }
    const FpGrid g = opt.grid.value_or(FpGrid::defaults(m.kind));
    const FpSolver solver(m, g, delta, opt.substeps);
    GridDensity d = initial_density(m, g);
    for (const auto& o : obs) {
        solver.predict(d);
        d = fp_update(d, o.y, m.tau2);
        means.push_back(d.mean());
    }
    return means;
}

}  // namespace mlpf
