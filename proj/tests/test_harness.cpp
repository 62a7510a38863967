#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "mlpf/mlpf.hpp"
#include "support/stats.hpp"

using namespace mlpf;
namespace fs = std::filesystem;
namespace ts = testing_support;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("mlpf_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

template <class R>
std::vector<R> round_trip(const std::vector<R>& rows) {
    std::stringstream ss;
    csv::write(ss, to_table(rows));
    return from_table<R>(csv::read(ss));
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(MLPF_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

RunConfig tiny_config(ModelKind k) {
    RunConfig c = profile_defaults(Profile::Desk, k);
    c.T = 5.0;
    c.series = 2;
    c.repeats = 10;
    c.particles = 64;
    c.level_min = 0;
    c.level_max = 3;
    c.data_level = 6;
    c.audit = true;
    return c;
}

}  // namespace

TEST(Csv, FormatAndParse) {
    EXPECT_EQ(csv::parse_double(csv::format_double(0.1)), 0.1);
    EXPECT_EQ(csv::parse_double(csv::format_double(-1.0 / 3.0)), -1.0 / 3.0);
    EXPECT_TRUE(std::isnan(csv::parse_double(csv::format_double(kNaN))));
    EXPECT_EQ(csv::parse_int("-42"), -42);
    EXPECT_THROW(csv::parse_int("4x"), std::invalid_argument);
    EXPECT_THROW(csv::parse_double("abc"), std::invalid_argument);
    EXPECT_EQ(csv::split("a,,b"), (std::vector<std::string>{"a", "", "b"}));
}

TEST(Csv, RejectsMalformedInput) {
    std::stringstream none("n,t,y\n1,0.5,0.1\n");
    EXPECT_THROW(csv::read(none), std::invalid_argument);
    std::stringstream ragged("# schema=mlpf.data/1\nn,t,y\n1,0.5\n");
    EXPECT_THROW(csv::read(ragged), std::invalid_argument);
    std::stringstream wrong("# schema=mlpf.latent/1\nn,t,x\n1,0.5,0.1\n");
    EXPECT_THROW(from_table<DataRecord>(csv::read(wrong)), std::invalid_argument);
}

TEST(Records, RoundTripEveryType) {
    const std::vector<ConvergenceRecord> conv{{"ou", "wasserstein", false, 3, 1024, 1, 7, 12, "difference", -1.25e-3},
                                              {"dw", "index", true, 0, 2, 0, 0, 1, "filter", 0.1}};
    EXPECT_EQ(round_trip(conv), conv);
    const std::vector<RateRecord> rates{{"ndt", "index", false, "V_coupled", 1, 6, 0.6483}};
    EXPECT_EQ(round_trip(rates), rates);
    const std::vector<ToleranceRecord> tol{{"ou", "wasserstein", 2, 0.015, 4, 0, 5, 0.31, 0.3, 0.01, 1.5, 3e6}};
    EXPECT_EQ(round_trip(tol), tol);
    const std::vector<ReferenceRecord> ref{{0, 1, 0.123456789012345678}, {2, 100, -3.0}};
    EXPECT_EQ(round_trip(ref), ref);
    const std::vector<DataRecord> dat{{1, 0.5, 0.77}, {2, 1.0, -0.1}};
    EXPECT_EQ(round_trip(dat), dat);
    const std::vector<LatentRecord> lat{{0, 0.0, 0.0}, {1, 0.5, 1e-300}};
    EXPECT_EQ(round_trip(lat), lat);
}

TEST(Records, SummaryKeepsMissingValuesAsNaN) {
    SummaryRecord s{"ou", "wasserstein", false, 0, 1024, 0.5, 0.02, 1.0, kNaN, 0.6, kNaN, 0.1, 0.2, false};
    auto back = round_trip(std::vector<SummaryRecord>{s}).at(0);
    EXPECT_TRUE(std::isnan(back.W_model));
    EXPECT_TRUE(std::isnan(back.W_base));
    s.W_model = back.W_model = 0.0;
    s.W_base = back.W_base = 0.0;
    EXPECT_EQ(back, s);
}

TEST(Records, TimingColumns) {
    EXPECT_TRUE(is_timing_column("wall_time"));
    EXPECT_TRUE(is_timing_column("W"));
    EXPECT_FALSE(is_timing_column("W_model"));
    EXPECT_FALSE(is_timing_column("V"));
}

TEST(Json, StatsRoundTrip) {
    StatsDocument d{"dw", "index", true, {}};
    d.levels.push_back({0, 1.5, 0.03, 2.0, kNaN, kNaN, false});
    d.levels.push_back({1, 0.4, 0.012, 4.0, 2.1, 1.0, true});
    const auto back = stats_from_json(nlohmann::json::parse(to_json(d).dump()));
    EXPECT_EQ(back.model, "dw");
    EXPECT_EQ(back.algorithm, "index");
    EXPECT_TRUE(back.change_of_measure);
    ASSERT_EQ(back.levels.size(), 2u);
    EXPECT_EQ(back.levels[0].V, 1.5);
    EXPECT_TRUE(std::isnan(back.levels[0].V_base));
    EXPECT_EQ(back.levels[1].V_base, 2.1);
    EXPECT_TRUE(back.levels[1].extrapolated);
    EXPECT_THROW(stats_from_json(nlohmann::json::object()), std::invalid_argument);
}

TEST(Json, PlanRoundTrip) {
    MlpfPlan p{0.01, 1, 3, {5000, 1200, 300}, 0.6, 2.0, 12345.0};
    const auto back = plan_from_json(nlohmann::json::parse(to_json(p).dump()));
    EXPECT_EQ(back.epsilon, p.epsilon);
    EXPECT_EQ(back.l0, 1);
    EXPECT_EQ(back.L, 3);
    EXPECT_EQ(back.N, p.N);
    EXPECT_EQ(back.phi, p.phi);
    EXPECT_EQ(back.work, p.work);
    auto bad = to_json(p);
    bad["N"] = std::vector<long long>{1, 2};
    EXPECT_THROW(plan_from_json(bad), std::invalid_argument);
}

TEST(Config, KeyValues) {
    std::stringstream ss("# comment\nmodel = ndt\nparticles=256  # inline\n\nseed=7\nalgorithm=index\n");
    const auto kv = read_key_values(ss);
    RunConfig c;
    apply_key_values(c, kv);
    EXPECT_EQ(c.model, ModelKind::NDT);
    EXPECT_EQ(c.particles, 256u);
    EXPECT_EQ(c.seed, 7u);
    EXPECT_EQ(c.algorithm, Coupler::MaximalIndex);
    EXPECT_THROW(apply_key_values(c, {{"partcles", "3"}}), std::invalid_argument);
    EXPECT_THROW(apply_key_values(c, {{"repeats", "2.5"}}), std::invalid_argument);
    std::stringstream bad("just text\n");
    EXPECT_THROW(read_key_values(bad), std::invalid_argument);
}

TEST(Config, ProfilesAndValidation) {
    const auto desk = profile_defaults(Profile::Desk, ModelKind::DW);
    const auto paper = profile_defaults(Profile::Paper, ModelKind::DW);
    EXPECT_LT(desk.particles, paper.particles);
    EXPECT_EQ(desk.observations(), 100);
    EXPECT_TRUE(desk.dw_consecutive_L);
    EXPECT_THROW(parse_profile("laptop"), std::invalid_argument);

    RunConfig c = profile_defaults(Profile::Desk, ModelKind::OU);
    c.change_of_measure = true;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = profile_defaults(Profile::Desk, ModelKind::OU);
    c.T = 1.2;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = profile_defaults(Profile::Desk, ModelKind::OU);
    c.spring = 2.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = profile_defaults(Profile::Desk, ModelKind::DW);
    c.change_of_measure = true;
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.policy().mode, ResampleMode::Always);
    EXPECT_NEAR(c.spring_strength(), 4.0, 1e-6);
}

TEST(Data, DeterministicAndIndexed) {
    const auto m = ModelSpec::ou();
    const RandomStream rng({5, 0, 0, 0, kEstimatorStudyData, Purpose::Observations});
    const auto a = synthesize_data(m, 40, 0.5, 8, rng);
    const auto b = synthesize_data(m, 40, 0.5, 8, rng);
    ASSERT_EQ(a.observations.size(), 40u);
    ASSERT_EQ(a.latent.size(), 41u);
    for (std::size_t n = 0; n < 40; ++n) {
        EXPECT_EQ(a.observations[n].y, b.observations[n].y);
        EXPECT_EQ(a.observations[n].index, static_cast<int>(n + 1));
        EXPECT_DOUBLE_EQ(a.observations[n].time, 0.5 * (n + 1));
    }
    EXPECT_EQ(a.latent[0], 0.0);
    const auto lat = latent_records(a, 0.5);
    EXPECT_EQ(lat.back().n, 40);
    EXPECT_EQ(observations_from(data_records(a)).back().y, a.observations.back().y);
}

TEST(Data, OuObservationVariance) {
    // Stationary Var(X) = sigma^2 / (2 theta) = 0.125, plus tau^2 = 0.2.
    const auto m = ModelSpec::ou();
    const auto d = synthesize_data(m, 1000, 0.5, 8, RandomStream({6, 0, 0, 0, 0, Purpose::Observations}));
    std::vector<double> y;
    for (std::size_t n = 20; n < d.observations.size(); ++n) y.push_back(d.observations[n].y);
    // Neighbouring y are correlated through X (lag-one correlation of X is
    // exp(-0.5)); inflate the iid standard error accordingly.
    const double rho = std::exp(-0.5) * 0.125 / 0.325;
    const double se = ts::variance_se(y) * std::sqrt((1.0 + rho * rho) / (1.0 - rho * rho));
    EXPECT_NEAR(ts::moments(y).var, 0.325, 3.0 * se);
}

TEST(Data, NoiseVanishesAsTauShrinks) {
    const auto m = ModelSpec::ou(1.0, 0.5, 1e-20);
    const auto d = synthesize_data(m, 50, 0.5, 6, RandomStream({7, 0, 0, 0, 0, Purpose::Observations}));
    for (std::size_t n = 0; n < 50; ++n) EXPECT_NEAR(d.observations[n].y, d.latent[n + 1], 1e-8);
}

TEST(Study, AuditedRunClaimsEveryStreamOnce) {
    for (auto k : {ModelKind::OU, ModelKind::DW}) {
        auto c = tiny_config(k);
        c.change_of_measure = k == ModelKind::DW;
        const auto st = run_parameter_study(c);
        EXPECT_EQ(st.stats.size(), 4u);
        EXPECT_TRUE(st.rate("V_coupled").has_value());
        c.tolerance_series = 2;
        c.k_max = 1;
        c.extrapolate_to = 6;
        const auto plans = plan_tolerances(c, st.stats, st.v_rate, st.b_rate);
        EXPECT_NO_THROW(run_tolerance_study(c, plans));
    }
    StreamAudit audit(true);
    audit.claim({1, 0, 0, 0, 0, Purpose::Dynamics});
    EXPECT_THROW(audit.claim({1, 0, 0, 0, 0, Purpose::Dynamics}), std::logic_error);
}

TEST(Study, ReproducibleAcrossJobCounts) {
    auto c = tiny_config(ModelKind::NDT);
    c.audit = false;
    const auto a = run_parameter_study(c);
    c.jobs = 3;
    const auto b = run_parameter_study(c);
    ASSERT_EQ(a.convergence.size(), b.convergence.size());
    EXPECT_EQ(a.convergence, b.convergence);
    auto same = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
    for (std::size_t i = 0; i < a.stats.size(); ++i) {
        EXPECT_TRUE(same(a.stats[i].V, b.stats[i].V)) << i;
        EXPECT_TRUE(same(a.stats[i].V_base, b.stats[i].V_base)) << i;
        EXPECT_TRUE(same(a.stats[i].B, b.stats[i].B)) << i;
    }
}

TEST(Cli, SimulateDataIsDeterministic) {
    const auto dir = scratch("simulate");
    for (const char* sub : {"a", "b"}) {
        const auto out = dir / sub;
        ASSERT_EQ(run_cli("simulate-data --model ndt --T 10 --series 2 --seed 9 --out " + out.string(),
                          dir / (std::string(sub) + ".log")),
                  0);
    }
    for (const char* f : {"data_s0.csv", "data_s1.csv", "latent_s1.csv"})
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    const auto rows = read_records<DataRecord>(dir / "a" / "data_s0.csv");
    EXPECT_EQ(rows.size(), 20u);
}

TEST(Cli, RejectsChangeOfMeasureOutsideDoubleWell) {
    const auto dir = scratch("reject");
    EXPECT_NE(run_cli("simulate-data --model ou --change-of-measure --out " + dir.string(), dir / "log"), 0);
    EXPECT_NE(slurp(dir / "log").find("double-well"), std::string::npos);
    EXPECT_EQ(run_cli("simulate-data --model ou --change-of-measure --on-invalid warn --T 1 --series 1 --out " +
                          dir.string(),
                      dir / "log2"),
              0);
}

TEST(Cli, PlanHierarchyOnConstructedStats) {
    const auto dir = scratch("plan");
    StatsDocument d{"ou", "wasserstein", false, {}};
    d.levels = {{0, 1.0, 0.02, 1.0}, {1, 0.25, 0.01, 2.0}, {2, 0.0625, 0.005, 4.0}};
    write_json(dir / "stats.json", to_json(d));
    ASSERT_EQ(run_cli("plan-hierarchy --stats " + (dir / "stats.json").string() + " --epsilon 0.03 --out " +
                          dir.string(),
                      dir / "log"),
              0);
    const auto p = plan_from_json(read_json(dir / "plan.json"));
    const auto expect = optimal_plan(d.levels, 0.03, 2.0);
    EXPECT_EQ(p.l0, expect.l0);
    EXPECT_EQ(p.L, expect.L);
    EXPECT_EQ(p.N, expect.N);
}

TEST(Cli, HelpAndUnknownSubcommand) {
    const auto dir = scratch("help");
    EXPECT_EQ(run_cli("--help", dir / "log"), 0);
    const auto help = slurp(dir / "log");
    for (const char* s : {"simulate-data", "estimate-params", "plan-hierarchy", "run-mlpf", "tolerance-study", "reference"})
        EXPECT_NE(help.find(s), std::string::npos) << s;
    EXPECT_NE(run_cli("bogus", dir / "log2"), 0);
}
