#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mlpf/dynamics.hpp"
#include "mlpf/harness/parallel.hpp"
#include "support/stats.hpp"

using namespace mlpf;
namespace ts = testing_support;

namespace {

struct BrownianCoefficients {
    double sigma = 1.0;
    double drift(double) const noexcept { return 0.0; }
    double diffusion(double) const noexcept { return sigma; }
};

RandomStream stream(std::uint64_t seed) { return RandomStream(StreamId{seed, 0, 0, 0, 0, Purpose::Dynamics}); }

double mean_square_gap(const ModelSpec& m, int level, int pairs, std::uint64_t seed) {
    const auto g = LevelGrid::for_model(m, level, 0.5);
    const auto r = stream(seed);
    double acc = 0.0;
    for (int i = 0; i < pairs; ++i) {
        const auto [f, c] = propagate_coupled(m, 0.0, 0.0, g, r, static_cast<std::uint32_t>(i), 0);
        acc += (f - c) * (f - c);
    }
    return acc / pairs;
}

}  // namespace

TEST(LevelGrid, StepTimesCountIsDelta) {
    for (int l = 0; l <= 12; ++l) {
        for (int off : {0, 4}) {
            const auto g = LevelGrid::make(l, 0.5, off);
            EXPECT_EQ(g.h * g.steps_per_obs, 0.5);
            EXPECT_EQ(g.steps_per_obs, 1u << (l + off));
        }
    }
    EXPECT_EQ(LevelGrid::for_model(ModelSpec::double_well(), 0, 0.5).offset, 4);
    EXPECT_EQ(LevelGrid::for_model(ModelSpec::ou(), 0, 0.5).offset, 0);
    EXPECT_THROW(LevelGrid::make(-1, 0.5), std::invalid_argument);
    EXPECT_THROW(LevelGrid::make(0, 0.5).coarser(), std::invalid_argument);
    EXPECT_EQ(LevelGrid::make(3, 0.5, 4).coarser().h, LevelGrid::make(2, 0.5, 4).h);
}

TEST(LevelGrid, DoubleWellStabilityBound) {
    const auto m = ModelSpec::double_well();
    EXPECT_NO_THROW(validate_grid(m, LevelGrid::for_model(m, 0, 0.5)));
    EXPECT_LE(LevelGrid::for_model(m, 0, 0.5).h, m.dw->h_max());
    EXPECT_THROW(validate_grid(m, LevelGrid::make(0, 0.5, 3)), std::invalid_argument);
    EXPECT_NO_THROW(validate_grid(ModelSpec::ou(), LevelGrid::make(0, 0.5)));
}

TEST(EulerStep, Examples) {
    EXPECT_DOUBLE_EQ(euler_step(ModelSpec::ou(1.0, 0.5), 1.0, 0.5, 0.2), 0.6);
    EXPECT_DOUBLE_EQ(euler_step(ModelSpec::ndt(1.0, 1.0), 0.0, 0.25, 0.1), 0.1);
    const auto dw = ModelSpec::double_well();
    const double r = dw.dw->stationary_point(2);
    EXPECT_NEAR(euler_step(dw, r, 0.01, 0.0), r, 1e-15);
    EXPECT_EQ(euler_step(ModelSpec::ou(), 0.0, 0.3, 0.0), 0.0);
}

TEST(PropagateInterval, SingleStepIsOneEulerStep) {
    const auto m = ModelSpec::ou();
    const auto g = LevelGrid::make(0, 0.5);
    const auto r = stream(5);
    for (std::uint32_t i = 0; i < 20; ++i) {
        const double z = r.normal_pair(i, 3, 0, 0)[0];
        EXPECT_EQ(propagate_interval(m, 0.7, g, r, i, 3), euler_step(m, 0.7, 0.5, std::sqrt(0.5) * z));
    }
}

TEST(PropagateInterval, BrownianIncrementHasVarianceDelta) {
    const auto g = LevelGrid::make(3, 0.5);
    const auto r = stream(6);
    std::vector<double> d;
    for (std::uint32_t i = 0; i < 100000; ++i)
        d.push_back(propagate_interval(BrownianCoefficients{}, 2.0, g, r, i, 0) - 2.0);
    const auto mo = ts::moments(d);
    EXPECT_NEAR(mo.mean, 0.0, 3.0 * mo.se);
    EXPECT_NEAR(mo.var, 0.5, 3.0 * ts::variance_se(d));
}

TEST(PropagateInterval, OuTransitionMoments) {
    const auto m = ModelSpec::ou();
    const auto g = LevelGrid::make(8, 0.5);
    const auto r = stream(7);
    std::vector<double> x;
    for (std::uint32_t i = 0; i < 100000; ++i) x.push_back(propagate_interval(m, 1.0, g, r, i, 0));
    const auto mo = ts::moments(x);
    const double mean = std::exp(-0.5);
    const double var = 0.25 * (1.0 - std::exp(-1.0)) / 2.0;
    EXPECT_NEAR(mean, 0.6065, 1e-4);
    EXPECT_NEAR(var, 0.0790, 1e-4);
    EXPECT_NEAR(mo.mean, mean, 3.0 * mo.se + g.h);
    EXPECT_NEAR(mo.var, var, 3.0 * ts::variance_se(x) + g.h);
}

TEST(PropagateCoupled, RejectsLevelZero) {
    EXPECT_THROW(propagate_coupled(ModelSpec::ou(), 0.0, 0.0, LevelGrid::make(0, 0.5), stream(1)),
                 std::invalid_argument);
}

TEST(PropagateCoupled, ExactUnderZeroDriftAdditiveNoise) {
    const auto g = LevelGrid::make(4, 0.5);
    const auto r = stream(8);
    for (std::uint32_t i = 0; i < 200; ++i) {
        const auto [f, c] = propagate_coupled(BrownianCoefficients{0.7}, 1.5, 1.5, g, r, i, 2);
        EXPECT_NEAR(f, c, 1e-13);
    }
}

TEST(PropagateCoupled, FineMarginalIsBitExact) {
    for (const auto& m : {ModelSpec::ou(), ModelSpec::ndt(), ModelSpec::double_well()}) {
        const auto g = LevelGrid::for_model(m, 3, 0.5);
        const auto r = stream(9);
        for (std::uint32_t i = 0; i < 50; ++i) {
            const auto pair = propagate_coupled(m, 0.3, -0.2, g, r, i, 4);
            EXPECT_EQ(pair.first, propagate_interval(m, 0.3, g, r, i, 4));
        }
    }
}

TEST(PropagateCoupled, CoarseIncrementsAreSumsOfFinePairs) {
    const auto m = ModelSpec::ndt();
    const auto g = LevelGrid::make(3, 0.5);
    const auto r = stream(10);
    const double hc = 2.0 * g.h, sh = std::sqrt(g.h);
    for (std::uint32_t i = 0; i < 50; ++i) {
        double xc = -0.4;
        for (std::uint32_t s = 0; s < g.steps_per_obs / 2; ++s) {
            const auto z = r.normal_pair(i, 1, s, 0);
            const double dwc = sh * z[0] + sh * z[1];
            xc = xc - xc * hc + 1.0 / std::sqrt(1.0 + xc * xc) * dwc;
        }
        EXPECT_EQ(propagate_coupled(m, 0.1, -0.4, g, r, i, 1).second, xc);
    }
}

TEST(PropagateCoupled, OuStrongRate) {
    const auto m = ModelSpec::ou();
    std::vector<double> l, y;
    for (int lev = 2; lev <= 7; ++lev) {
        l.push_back(lev);
        y.push_back(std::log2(mean_square_gap(m, lev, 100000, 11)));
    }
    const double rate = -ts::slope(l, y);
    EXPECT_GE(rate, 1.6);
    EXPECT_LE(rate, 2.4);
}

TEST(PropagateCoupled, NdtStrongRate) {
    const auto m = ModelSpec::ndt();
    std::vector<double> l, y;
    for (int lev = 2; lev <= 7; ++lev) {
        l.push_back(lev);
        y.push_back(std::log2(mean_square_gap(m, lev, 100000, 12)));
    }
    const double rate = -ts::slope(l, y);
    EXPECT_GE(rate, 0.7);
    EXPECT_LE(rate, 1.4);
}

TEST(PropagateInterval, ReproducibleAcrossWorkerCounts) {
    const auto m = ModelSpec::double_well();
    const auto g = LevelGrid::for_model(m, 2, 0.5);
    const auto r = stream(13);
    auto run = [&](int jobs) {
        std::vector<double> x(4000);
        parallel_for(x.size(), jobs, [&](std::size_t i) {
            const auto p = static_cast<std::uint32_t>(i);
            x[i] = propagate_interval(m, sample_initial(m, r, p), g, r, p, 0);
        });
        return x;
    };
    const auto a = run(1);
    EXPECT_EQ(a, run(3));
    EXPECT_EQ(a, run(1));
}
