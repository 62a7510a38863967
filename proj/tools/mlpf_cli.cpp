// Command-line front end: data synthesis, parameter studies, planning,
// multilevel runs, tolerance sweeps and reference filters.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mlpf/mlpf.hpp"

namespace fs = std::filesystem;
using namespace mlpf;

namespace {

struct CommonFlags {
    std::optional<std::string> model, algorithm, profile, levels, config, cost;
    bool change_of_measure = false;
    std::optional<double> spring, T, delta;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> particles;
    std::optional<int> repeats, series, jobs, data_level, tolerance_series, k_max;
    std::string on_invalid = "error";
    std::optional<std::string> out;
    bool audit = false;
};

void add_common(CLI::App* app, CommonFlags& f) {
    app->add_option("--model", f.model, "Model: ou|ndt|dw")->check(CLI::IsMember({"ou", "ndt", "dw"}));
    app->add_option("--algorithm", f.algorithm, "Coupled resampler: wasserstein|index")
        ->check(CLI::IsMember({"wasserstein", "index"}));
    app->add_flag("--change-of-measure", f.change_of_measure,
                  "Spring-coupled dynamics with Radon-Nikodym weights (double well)");
    app->add_option("--spring", f.spring, "Spring strength S (default: one-sided Lipschitz constant)");
    app->add_option("--T", f.T, "Final time");
    app->add_option("--delta", f.delta, "Observation spacing");
    app->add_option("--seed", f.seed, "Global seed");
    app->add_option("--levels", f.levels, "Level range MIN:MAX");
    app->add_option("--particles", f.particles, "Particles per filter in the parameter study");
    app->add_option("--repeats", f.repeats, "Independent repeats per series and level");
    app->add_option("--series", f.series, "Number of synthetic series");
    app->add_option("--tolerance-series", f.tolerance_series, "Series in the tolerance study");
    app->add_option("--k-max", f.k_max, "Largest tolerance index k");
    app->add_option("--data-level", f.data_level, "Level of the latent path used to make data");
    app->add_option("--profile", f.profile, "Defaults: desk|paper")->check(CLI::IsMember({"desk", "paper"}));
    app->add_option("--config", f.config, "key=value configuration file");
    app->add_option("--cost", f.cost, "Planner cost column: model|measured")
        ->check(CLI::IsMember({"model", "measured"}));
    app->add_option("--on-invalid", f.on_invalid, "Invalid flag combinations: error|warn")
        ->check(CLI::IsMember({"error", "warn"}));
    app->add_option("--jobs", f.jobs, "Worker threads");
    app->add_flag("--audit", f.audit, "Assert that no random stream is claimed twice");
    app->add_option("--out", f.out, "Output directory");
}

std::pair<int, int> parse_levels(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) {
        const int l = std::stoi(s);
        return {l, l};
    }
    return {std::stoi(s.substr(0, colon)), std::stoi(s.substr(colon + 1))};
}

RunConfig build_config(const CommonFlags& f) {
    std::map<std::string, std::string> kv;
    if (f.config) kv = read_key_value_file(*f.config);
    ModelKind kind = ModelKind::OU;
    if (auto it = kv.find("model"); it != kv.end()) kind = parse_model_kind(it->second);
    if (f.model) kind = parse_model_kind(*f.model);
    Profile profile = Profile::Desk;
    if (auto it = kv.find("profile"); it != kv.end()) {
        profile = parse_profile(it->second);
        kv.erase(it);
    }
    if (f.profile) profile = parse_profile(*f.profile);

    RunConfig c = profile_defaults(profile, kind);
    apply_key_values(c, kv);
    c.model = kind;
    if (f.algorithm) c.algorithm = parse_coupler(*f.algorithm);
    if (f.change_of_measure) c.change_of_measure = true;
    if (f.spring) c.spring = f.spring;
    if (f.T) c.T = *f.T;
    if (f.delta) c.delta = *f.delta;
    if (f.seed) c.seed = *f.seed;
    if (f.levels) std::tie(c.level_min, c.level_max) = parse_levels(*f.levels);
    if (f.particles) c.particles = *f.particles;
    if (f.repeats) c.repeats = *f.repeats;
    if (f.series) c.series = *f.series;
    if (f.tolerance_series) c.tolerance_series = *f.tolerance_series;
    if (f.k_max) c.k_max = *f.k_max;
    if (f.data_level) c.data_level = *f.data_level;
    if (f.jobs) c.jobs = *f.jobs;
    if (f.cost) c.cost = *f.cost == "model" ? CostSource::Model : CostSource::Measured;
    if (f.audit) c.audit = true;
    if (f.out) c.out_dir = *f.out;

    if (c.change_of_measure && c.model != ModelKind::DW) {
        const std::string msg = "--change-of-measure applies to the double-well model only";
        if (f.on_invalid == "error") throw std::invalid_argument(msg);
        std::cerr << "warning: " << msg << "; ignoring it\n";
        c.change_of_measure = false;
        c.spring.reset();
    }
    c.validate();
    return c;
}

fs::path out_path(const RunConfig& c, const std::string& name) {
    fs::create_directories(c.out_dir);
    return fs::path(c.out_dir) / name;
}

StatsDocument stats_document(const RunConfig& c, const std::vector<LevelStats>& stats) {
    return {std::string(to_string(c.model)), std::string(to_string(c.algorithm)),
            c.change_of_measure, stats};
}

void write_study(const RunConfig& c, const ParameterStudy& st) {
    write_records(out_path(c, "convergence.csv"), st.convergence);
    write_records(out_path(c, "summary.csv"), st.summary);
    write_records(out_path(c, "rates.csv"), st.rates);
    auto j = to_json(stats_document(c, st.stats));
    j["cost"] = c.cost == CostSource::Model ? "model" : "measured";
    write_json(out_path(c, "stats.json"), j);
}

void print_rates(const ParameterStudy& st) {
    for (const auto& r : st.rates)
        std::cout << "rate " << r.quantity << " levels " << r.level_min << ".." << r.level_max
                  << " = " << r.rate << '\n';
}

int cmd_simulate(const RunConfig& c) {
    const ModelSpec m = c.model_spec();
    for (int s = 0; s < c.series; ++s) {
        const auto d = study_data(c, s, kEstimatorStudyData);
        write_records(out_path(c, "data_s" + std::to_string(s) + ".csv"), data_records(d));
        write_records(out_path(c, "latent_s" + std::to_string(s) + ".csv"), latent_records(d, c.delta));
    }
    std::cout << "wrote " << c.series << " series of " << c.observations() << " observations ("
              << to_string(m.kind) << ") to " << c.out_dir << '\n';
    return 0;
}

int cmd_estimate(const RunConfig& c) {
    const auto st = run_parameter_study(c);
    write_study(c, st);
    print_rates(st);
    return 0;
}

int cmd_plan(const RunConfig& c, const std::string& stats_file, std::optional<double> epsilon) {
    const auto doc = stats_from_json(read_json(stats_file));
    std::vector<MlpfPlan> plans;
    if (epsilon) {
        plans.push_back(optimal_plan(doc.levels, *epsilon, c.C_xi));
    } else {
        std::vector<double> lv, vv, lb, bv;
        for (const auto& s : doc.levels) {
            if (std::isfinite(s.V) && s.V > 0 && !s.extrapolated) {
                lv.push_back(s.level);
                vv.push_back(s.V);
            }
            if (std::isfinite(s.B) && s.B > 0 && !s.extrapolated) {
                lb.push_back(s.level);
                bv.push_back(s.B);
            }
        }
        const double vr = lv.size() >= 3 ? fit_rate(lv, vv) : 1.0;
        const double br = lb.size() >= 3 ? fit_rate(lb, bv) : 1.0;
        plans = plan_tolerances(c, doc.levels, vr, br);
    }
    nlohmann::json j = nlohmann::json::array();
    for (const auto& p : plans) {
        j.push_back(to_json(p));
        std::cout << "epsilon " << p.epsilon << " l0 " << p.l0 << " L " << p.L << " N";
        for (auto n : p.N) std::cout << ' ' << n;
        std::cout << '\n';
    }
    write_json(out_path(c, epsilon ? "plan.json" : "plans.json"), epsilon ? j[0] : j);
    return 0;
}

int cmd_run_mlpf(const RunConfig& c, const std::string& plan_file, const std::string& data_file,
                 int series) {
    const auto plan = plan_from_json(read_json(plan_file));
    const auto obs = observations_from(read_records<DataRecord>(data_file));
    const auto run = run_mlpf(c, c.model_spec(), plan, obs, series, 0);
    csv::Table t{"mlpf.estimate/1", {"n", "estimate"}, {}};
    for (std::size_t i = 0; i < obs.size(); ++i)
        t.rows.push_back({std::to_string(obs[i].index), csv::format_double(run.per_observation[i])});
    csv::write_file(out_path(c, "mlpf.csv"), t);
    std::cout << "final estimate " << run.estimate << " (" << run.wall_time << " s)\n";
    return 0;
}

int cmd_tolerance(const RunConfig& c, const std::optional<std::string>& stats_file) {
    std::vector<LevelStats> stats;
    double vr = 1.0, br = 1.0;
    if (stats_file) {
        stats = stats_from_json(read_json(*stats_file)).levels;
        std::vector<double> lv, vv, lb, bv;
        for (const auto& s : stats) {
            if (std::isfinite(s.V) && s.V > 0 && !s.extrapolated) lv.push_back(s.level), vv.push_back(s.V);
            if (std::isfinite(s.B) && s.B > 0 && !s.extrapolated) lb.push_back(s.level), bv.push_back(s.B);
        }
        if (lv.size() >= 3) vr = fit_rate(lv, vv);
        if (lb.size() >= 3) br = fit_rate(lb, bv);
    } else {
        const auto st = run_parameter_study(c);
        write_study(c, st);
        print_rates(st);
        stats = st.stats;
        vr = st.v_rate;
        br = st.b_rate;
    }
    const auto plans = plan_tolerances(c, stats, vr, br);
    nlohmann::json pj = nlohmann::json::array();
    for (const auto& p : plans) pj.push_back(to_json(p));
    write_json(out_path(c, "plans.json"), pj);

    const auto tol = run_tolerance_study(c, plans);
    write_records(out_path(c, "tolerance.csv"), tol.records);
    write_records(out_path(c, "reference.csv"), tol.references);
    const auto fail = tol.failure_fractions();
    const auto wall = tol.totals(true);
    for (std::size_t k = 0; k < plans.size(); ++k)
        std::cout << "k " << k << " epsilon " << plans[k].epsilon << " L " << plans[k].L
                  << " failure " << fail[k] << " wall " << wall[k] << '\n';
    std::vector<double> eps;
    for (const auto& p : plans) eps.push_back(p.epsilon);
    if (eps.size() >= 2) std::cout << "cost slope " << loglog_slope(eps, wall) << '\n';
    return 0;
}

int cmd_reference(const RunConfig& c, const std::optional<std::string>& data_file) {
    const ModelSpec m = c.model_spec();
    std::vector<ReferenceRecord> out;
    auto run = [&](int s, const std::vector<Observation>& obs) {
        const auto means = run_reference_filter(m, obs, c.delta);
        for (std::size_t n = 0; n < means.size(); ++n)
            out.push_back({s, static_cast<int>(n + 1), means[n]});
    };
    if (data_file) {
        run(0, observations_from(read_records<DataRecord>(*data_file)));
    } else {
        for (int s = 0; s < c.series; ++s) run(s, study_data(c, s, kEstimatorStudyData).observations);
    }
    write_records(out_path(c, "reference.csv"), out);
    std::cout << "wrote " << out.size() << " reference means to " << c.out_dir << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multilevel particle filters for partially observed 1-D diffusions"};
    app.require_subcommand(1);
    CommonFlags f;

    auto* sim = app.add_subcommand("simulate-data", "Synthesize observation series");
    auto* est = app.add_subcommand("estimate-params", "Measure V_l, B_l, W_l and fit rates");
    auto* plan = app.add_subcommand("plan-hierarchy", "Choose levels and particle counts");
    auto* run = app.add_subcommand("run-mlpf", "Run one multilevel estimator on a data file");
    auto* tol = app.add_subcommand("tolerance-study", "Error and cost of optimal estimators across tolerances");
    auto* ref = app.add_subcommand("reference", "Kalman or Fokker-Planck reference filter means");
    for (auto* s : {sim, est, plan, run, tol, ref}) add_common(s, f);

    std::string stats_file, plan_file, data_file;
    std::optional<std::string> tol_stats, ref_data;
    std::optional<double> epsilon;
    int run_series = 0;
    plan->add_option("--stats", stats_file, "Stats JSON document")->required();
    plan->add_option("--epsilon", epsilon, "Single tolerance (default: the whole sequence)");
    run->add_option("--plan", plan_file, "Plan JSON document")->required();
    run->add_option("--data", data_file, "Data CSV")->required();
    run->add_option("--series-index", run_series, "Series index used to address random streams");
    tol->add_option("--stats", tol_stats, "Reuse a stats JSON instead of running the parameter study");
    ref->add_option("--data", ref_data, "Data CSV (default: synthesize --series series)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        const RunConfig c = build_config(f);
        if (sim->parsed()) return cmd_simulate(c);
        if (est->parsed()) return cmd_estimate(c);
        if (plan->parsed()) return cmd_plan(c, stats_file, epsilon);
        if (run->parsed()) return cmd_run_mlpf(c, plan_file, data_file, run_series);
        if (tol->parsed()) return cmd_tolerance(c, tol_stats);
        if (ref->parsed()) return cmd_reference(c, ref_data);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
