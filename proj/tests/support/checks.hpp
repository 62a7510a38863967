#pragma once

// Property checks shared by the unit tests and the acceptance binary. Each
// returns the measured quantities; callers decide on pass or fail.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include <boost/math/distributions/binomial.hpp>

#include "mlpf/mlpf.hpp"
#include "support/stats.hpp"

namespace testing_support {

inline std::vector<double> random_weights(std::mt19937_64& gen, std::size_t n) {
    std::exponential_distribution<double> e(1.0);
    std::vector<double> w(n);
    double s = 0.0;
    for (auto& v : w) s += v = e(gen);
    for (auto& v : w) v /= s;
    return w;
}

inline std::vector<double> random_positions(std::mt19937_64& gen, std::size_t n) {
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> x(n);
    for (auto& v : x) v = z(gen);
    return x;
}

/// Number of random coupled ensembles on which the Wasserstein resampler
/// produced a pair set that is not comonotone.
inline int comonotonicity_violations(int ensembles, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    int bad = 0;
    for (int e = 0; e < ensembles; ++e) {
        const std::size_t n = 2 + gen() % 60;
        mlpf::CoupledEnsemble ens{{random_positions(gen, n), random_weights(gen, n)},
                                  {random_positions(gen, n), random_weights(gen, n)}};
        const mlpf::RandomStream rng({seed, 0, static_cast<std::uint32_t>(e), 0, 0, mlpf::Purpose::Auxiliary});
        const auto out = mlpf::resample_wasserstein(ens, rng, 0);
        std::vector<std::pair<double, double>> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = {out.fine.positions[i], out.coarse.positions[i]};
        std::sort(p.begin(), p.end());
        for (std::size_t i = 1; i < n; ++i)
            if (p[i].second < p[i - 1].second) {
                ++bad;
                break;
            }
    }
    return bad;
}

enum class Resampler { Multinomial, Wasserstein, Maximal };

struct MarginalResult {
    double p_fine = 0.0;
    double p_coarse = 0.0;
};

/// Chi-square p-values of selected-index frequencies against the input
/// weights, from `draws` single-pair selections on a 10-atom ensemble.
inline MarginalResult marginal_chi_square(Resampler which, int draws, std::uint64_t seed) {
    const std::vector<double> wf{0.02, 0.05, 0.08, 0.1, 0.15, 0.2, 0.1, 0.12, 0.1, 0.08};
    const std::vector<double> wc{0.15, 0.1, 0.05, 0.1, 0.1, 0.05, 0.2, 0.05, 0.1, 0.1};
    const std::vector<double> xf{0.3, -1.0, 2.0, 0.1, 0.5, -0.2, 1.1, -3.0, 0.0, 0.9};
    const std::vector<double> xc{1.3, 0.2, -2.0, 0.7, 0.4, -0.8, 1.0, 3.0, -0.5, 0.6};
    const std::size_t n = wf.size();
    mlpf::CoupledEnsemble ens{{xf, wf}, {xc, wc}};
    const mlpf::RandomStream rng({seed, 0, 0, 0, 0, mlpf::Purpose::Resampling});
    std::vector<double> cf(n, 0.0), cc(n, 0.0);
    const int blocks = draws / static_cast<int>(n);
    mlpf::ResampleTrace tr;
    std::vector<std::size_t> chosen;
    for (int b = 0; b < blocks; ++b) {
        const auto block = static_cast<std::uint32_t>(b);
        switch (which) {
            case Resampler::Multinomial:
                mlpf::resample_multinomial(ens.fine, rng, block, &chosen);
                for (auto j : chosen) cf[j] += 1.0;
                break;
            case Resampler::Wasserstein:
                mlpf::resample_wasserstein(ens, rng, block, &tr);
                break;
            case Resampler::Maximal:
                mlpf::resample_maximal(ens, rng, block, &tr);
                break;
        }
        if (which != Resampler::Multinomial) {
            for (auto j : tr.fine_index) cf[j] += 1.0;
            for (auto j : tr.coarse_index) cc[j] += 1.0;
        }
    }
    MarginalResult r;
    r.p_fine = chi_square_pvalue(cf, wf);
    r.p_coarse = which == Resampler::Multinomial ? 1.0 : chi_square_pvalue(cc, wc);
    return r;
}

struct CouplingFrequency {
    int pairs = 0;
    int outside_3sigma = 0;  // weight pairs whose shared fraction misses alpha by > 3 sigma
    double pooled_z = 0.0;   // standardized total of shared draws over all pairs
};

/// Shared-index frequency of the maximal coupling against alpha on random
/// weight pairs.
inline CouplingFrequency maximal_coupling_frequency(int pairs, int draws_per_pair, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    CouplingFrequency out;
    out.pairs = pairs;
    double dev = 0.0, var = 0.0;
    mlpf::ResampleTrace tr;
    for (int p = 0; p < pairs; ++p) {
        const std::size_t n = 2 + gen() % 20;
        mlpf::CoupledEnsemble ens{{random_positions(gen, n), random_weights(gen, n)},
                                  {random_positions(gen, n), random_weights(gen, n)}};
        double alpha = 0.0;
        for (std::size_t i = 0; i < n; ++i) alpha += std::min(ens.fine.weights[i], ens.coarse.weights[i]);
        const mlpf::RandomStream rng({seed, 0, static_cast<std::uint32_t>(p), 0, 0, mlpf::Purpose::Auxiliary});
        double shared = 0.0, total = 0.0;
        for (int b = 0; total < draws_per_pair; ++b) {
            mlpf::resample_maximal(ens, rng, static_cast<std::uint32_t>(b), &tr);
            for (std::size_t i = 0; i < n && total < draws_per_pair; ++i, total += 1.0)
                if (tr.shared[i]) shared += 1.0;
        }
        const double sd = std::sqrt(total * alpha * (1.0 - alpha));
        if (std::abs(shared - total * alpha) > 3.0 * sd) ++out.outside_3sigma;
        dev += shared - total * alpha;
        var += total * alpha * (1.0 - alpha);
    }
    out.pooled_z = dev / std::sqrt(var);
    return out;
}

/// Upper 1% point of the number of 3-sigma exceedances among `pairs`
/// independent normal-approximation tests.
inline int exceedance_limit(int pairs) {
    const double q = 0.0027;
    int k = 0;
    double cdf = 0.0;
    const boost::math::binomial_distribution<double> b(pairs, q);
    while ((cdf = boost::math::cdf(b, k)) < 0.99) ++k;
    return k;
}

/// Mean of R = exp(log_girsanov_factor(dW, s, h, sigma)) over dW ~ N(0, h).
inline Moments girsanov_martingale(int samples, double s, double h, double sigma, std::uint64_t seed) {
    const mlpf::RandomStream rng({seed, 0, 0, 0, 0, mlpf::Purpose::Auxiliary});
    std::vector<double> r(samples);
    for (int i = 0; i < samples; ++i) {
        const double dW = std::sqrt(h) * rng.normal_pair(static_cast<std::uint32_t>(i), 0, 0, 0)[0];
        r[i] = std::exp(mlpf::log_girsanov_factor(dW, s, h, sigma));
    }
    return moments(r);
}

struct UnbiasednessProbe {
    double weighted = 0.0, weighted_se = 0.0;
    double plain = 0.0, plain_se = 0.0;
    double z() const { return (weighted - plain) / std::hypot(weighted_se, plain_se); }
};

/// E_P[phi(U^f) R^f] under spring coupling versus E[phi(X^f)] from plain
/// propagation, one interval of the double well from the Gibbs law, phi = x.
/// The coarse chain starts 0.5 above the fine one so the spring is active.
inline UnbiasednessProbe girsanov_unbiasedness(int level, int samples, double S, std::uint64_t seed) {
    const auto m = mlpf::ModelSpec::double_well();
    const auto g = mlpf::LevelGrid::for_model(m, level, 0.5);
    const mlpf::RandomStream a({seed, 0, 0, 0, 0, mlpf::Purpose::Dynamics});
    const mlpf::RandomStream b({seed, 1, 0, 0, 0, mlpf::Purpose::Dynamics});
    std::vector<double> w(samples), p(samples);
    for (int i = 0; i < samples; ++i) {
        const auto id = static_cast<std::uint32_t>(i);
        const double x0 = mlpf::sample_initial(m, a, id);
        const auto st = mlpf::propagate_coupled_com(m, x0, x0 + 0.5, g, S, a, id, 0);
        w[i] = st.fine * std::exp(st.rn.log_R_fine);
        p[i] = mlpf::propagate_interval(m, mlpf::sample_initial(m, b, id), g, b, id, 0);
    }
    const auto mw = moments(w), mp = moments(p);
    return {mw.mean, mw.se, mp.mean, mp.se};
}

/// Brute-force minimum-work plan over all contiguous (l0, L) with B_L < eps,
/// computed from the allocation formula directly.
struct BrutePlan {
    bool feasible = false;
    int l0 = 0, L = 0;
    double work = 0.0;
};

inline BrutePlan brute_force_plan(const std::vector<mlpf::LevelStats>& s, double eps, double C) {
    BrutePlan best;
    const int n = static_cast<int>(s.size());
    for (int L = 0; L < n; ++L) {
        if (!(s[L].B < eps)) continue;
        const double phi_eps = eps - s[L].B;
        for (int l0 = 0; l0 <= L; ++l0) {
            double sum = 0.0;
            for (int l = l0; l <= L; ++l) {
                const double V = l == l0 ? s[l].base_V() : s[l].V;
                const double W = l == l0 ? s[l].base_W() : s[l].W;
                sum += std::sqrt(V * W);
            }
            double work = 0.0;
            for (int l = l0; l <= L; ++l) {
                const double V = l == l0 ? s[l].base_V() : s[l].V;
                const double W = l == l0 ? s[l].base_W() : s[l].W;
                const double N = std::max(1.0, std::ceil((C / phi_eps) * (C / phi_eps) * std::sqrt(V / W) * sum));
                work += W * N;
            }
            const bool better = !best.feasible || work < best.work ||
                                (work == best.work && (L < best.L || (L == best.L && l0 < best.l0)));
            if (better) best = {true, l0, L, work};
        }
    }
    return best;
}

/// Random per-level statistics with decaying V and B and growing W.
inline std::vector<mlpf::LevelStats> random_stats(std::mt19937_64& gen) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int levels = 2 + static_cast<int>(gen() % 6);
    const double v_rate = 0.5 + 2.0 * u(gen), b_rate = 0.5 + u(gen), w_rate = 0.5 + u(gen);
    const double V0 = 0.1 + 5.0 * u(gen), B0 = 0.01 + 0.1 * u(gen), W0 = 0.5 + u(gen);
    std::vector<mlpf::LevelStats> s;
    for (int l = 0; l < levels; ++l) {
        mlpf::LevelStats x;
        x.level = l;
        x.V = V0 * std::exp2(-v_rate * l) * (0.7 + 0.6 * u(gen));
        x.B = B0 * std::exp2(-b_rate * l) * (0.7 + 0.6 * u(gen));
        x.W = W0 * std::exp2(w_rate * l);
        x.V_base = 1.0 + u(gen);
        x.W_base = x.W * (0.5 + 0.2 * u(gen));
        s.push_back(x);
    }
    return s;
}

/// Sum_l V_l / N_l of a plan, with the base variance at l0.
inline double plan_variance(const std::vector<mlpf::LevelStats>& s, const mlpf::MlpfPlan& p) {
    double v = 0.0;
    for (int l = p.l0; l <= p.L; ++l) {
        const auto& x = s[static_cast<std::size_t>(l)];
        v += (l == p.l0 ? x.base_V() : x.V) / static_cast<double>(p.N[l - p.l0]);
    }
    return v;
}

}  // namespace testing_support
