#pragma once

// Experiment orchestration: the per-level parameter study and the tolerance
// sweep of optimal multilevel estimators.
//
// Stream identifiers: (seed, series, repeat, level, estimator, purpose) with
//   estimator 0  single-level filter in the parameter study
//   estimator 1  coupled filter in the parameter study
//   estimator 2  base filter of a tolerance-study estimate (repeat = k)
//   estimator 3  coupled filters of a tolerance-study estimate (repeat = k)
//   estimator 8  parameter-study data, estimator 9 tolerance-study data

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mlpf/filtering.hpp"
#include "mlpf/girsanov.hpp"
#include "mlpf/harness/config.hpp"
#include "mlpf/harness/data.hpp"
#include "mlpf/harness/parallel.hpp"
#include "mlpf/harness/records.hpp"
#include "mlpf/hierarchy.hpp"
#include "mlpf/reference.hpp"

namespace mlpf {

inline constexpr std::uint32_t kEstimatorPf = 0;
inline constexpr std::uint32_t kEstimatorCoupled = 1;
inline constexpr std::uint32_t kEstimatorTolBase = 2;
inline constexpr std::uint32_t kEstimatorTolCoupled = 3;
inline constexpr std::uint32_t kEstimatorStudyData = 8;
inline constexpr std::uint32_t kEstimatorToleranceData = 9;

inline StreamId data_stream_id(std::uint64_t seed, int series, std::uint32_t estimator) {
    return {seed, static_cast<std::uint32_t>(series), 0, 0, estimator, Purpose::Observations};
}

inline SyntheticData study_data(const RunConfig& c, int series, std::uint32_t estimator,
                                StreamAudit* audit = nullptr) {
    const StreamId id = data_stream_id(c.seed, series, estimator);
    const RandomStream rng = audit ? audit->claim(id) : RandomStream(id);
    return synthesize_data(c.model_spec(), c.observations(), c.delta, c.data_level, rng);
}

inline FilterRng claim_filter_rng(StreamAudit* audit, StreamId id) {
    if (audit) {
        id.purpose = Purpose::Dynamics;
        audit->claim(id);
        id.purpose = Purpose::Resampling;
        audit->claim(id);
    }
    return FilterRng::from(id);
}

/// Deterministic cost units per particle: Euler steps per interval, with a
/// coupled particle costing one fine and one coarse path.
inline double model_cost(const ModelSpec& m, int level, bool coupled) {
    const double steps = std::exp2(LevelGrid::default_offset(m.kind) + level);
    return coupled ? 1.5 * steps : steps;
}

/// One filter run of the study: coupled at `level` when `coupled`, else a
/// single-level filter.
inline FilterOutput run_study_filter(const RunConfig& c, const ModelSpec& m,
                                     std::span<const Observation> obs, int level, bool coupled,
                                     std::size_t n, const FilterRng& rng) {
    const LevelGrid g = LevelGrid::for_model(m, level, c.delta);
    const ResamplePolicy pol = c.policy();
    if (!coupled) return run_pf(m, obs, g, n, pol, identity, rng);
    if (c.change_of_measure) return run_coupled_pf_com(m, obs, g, n, pol, identity, c.spring_strength(), rng);
    return run_coupled_pf(m, obs, g, n, pol, identity, rng);
}

struct LevelMeasurement {
    int level = 0;
    bool coupled = false;
    EstimateCube estimates;
    double dynamics_seconds = 0.0;
    double resampling_seconds = 0.0;
    long long runs = 0;
};

struct ParameterStudy {
    std::vector<LevelMeasurement> measurements;
    std::vector<LevelStats> stats;        // cost column in model units or seconds (config.cost)
    std::vector<SummaryRecord> summary;
    std::vector<RateRecord> rates;
    std::vector<ConvergenceRecord> convergence;
    double v_rate = 0.0;                  // coupled levels
    double b_rate = 0.0;

    std::optional<double> rate(std::string_view quantity) const {
        for (const auto& r : rates)
            if (r.quantity == quantity) return r.rate;
        return std::nullopt;
    }
};

struct StudyOptions {
    bool record_convergence = true;
    int base_level_max = -1;  // highest level with a single-level run; -1 = level_max
};

inline ParameterStudy run_parameter_study(const RunConfig& c, const StudyOptions& opt = {}) {
    c.validate();
    const ModelSpec m = c.model_spec();
    StreamAudit audit(c.audit);
    StreamAudit* ap = c.audit ? &audit : nullptr;
    const int D = c.observations();

    std::vector<SyntheticData> data;
    for (int s = 0; s < c.series; ++s) data.push_back(study_data(c, s, kEstimatorStudyData, ap));

    ParameterStudy out;
    const int base_max = opt.base_level_max < 0 ? c.level_max : opt.base_level_max;
    for (int l = c.level_min; l <= c.level_max; ++l) {
        if (l <= base_max) out.measurements.push_back({l, false, EstimateCube(c.repeats, D, c.series)});
        if (l >= c.first_coupled_level())
            out.measurements.push_back({l, true, EstimateCube(c.repeats, D, c.series)});
    }

    struct Task {
        std::size_t meas;
        int series, repeat;
    };
    std::vector<Task> tasks;
    for (std::size_t i = 0; i < out.measurements.size(); ++i)
        for (int s = 0; s < c.series; ++s)
            for (int r = 0; r < c.repeats; ++r) tasks.push_back({i, s, r});

    std::vector<FilterRng> rngs;
    rngs.reserve(tasks.size());
    for (const auto& t : tasks) {
        const auto& lm = out.measurements[t.meas];
        rngs.push_back(claim_filter_rng(
            ap, {c.seed, static_cast<std::uint32_t>(t.series), static_cast<std::uint32_t>(t.repeat),
                 static_cast<std::uint32_t>(lm.level), lm.coupled ? kEstimatorCoupled : kEstimatorPf,
                 Purpose::Dynamics}));
    }

    std::vector<FilterOutput> results(tasks.size());
    parallel_for(tasks.size(), c.jobs, [&](std::size_t i) {
        const auto& t = tasks[i];
        const auto& lm = out.measurements[t.meas];
        results[i] = run_study_filter(c, m, data[t.series].observations, lm.level, lm.coupled,
                                      c.particles, rngs[i]);
    });

    const std::string model_name(to_string(c.model));
    const std::string alg_name(to_string(c.algorithm));
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const auto& t = tasks[i];
        auto& lm = out.measurements[t.meas];
        const auto& res = results[i];
        lm.dynamics_seconds += res.dynamics_seconds;
        lm.resampling_seconds += res.resampling_seconds;
        ++lm.runs;
        for (int n = 0; n < D; ++n) {
            const auto& st = res.steps[n];
            lm.estimates.at(t.repeat, n, t.series) = lm.coupled ? st.difference_filter : st.filter;
            if (opt.record_convergence) {
                ConvergenceRecord rec{model_name, alg_name, c.change_of_measure, lm.level,
                                      static_cast<long long>(c.particles), t.series, t.repeat,
                                      st.n, lm.coupled ? "difference_filter" : "filter",
                                      lm.coupled ? st.difference_filter : st.filter};
                out.convergence.push_back(rec);
                rec.estimate_kind = lm.coupled ? "difference_predictor" : "predictor";
                rec.value = lm.coupled ? st.difference_predictor : st.predictor;
                out.convergence.push_back(rec);
            }
        }
    }

    const auto N = static_cast<double>(c.particles);
    auto find = [&](int l, bool coupled) -> const LevelMeasurement* {
        for (const auto& lm : out.measurements)
            if (lm.level == l && lm.coupled == coupled) return &lm;
        return nullptr;
    };
    auto per_particle_seconds = [&](const LevelMeasurement& lm) {
        return (lm.dynamics_seconds + lm.resampling_seconds) / (static_cast<double>(lm.runs) * N);
    };

    // Rates over coupled levels, and over the base level plus coupled levels.
    std::vector<double> lv, vv, lb, bv;
    for (int l = c.first_coupled_level(); l <= c.level_max; ++l) {
        lv.push_back(l);
        vv.push_back(estimate_variance(find(l, true)->estimates, N));
    }
    for (int l = c.level_min; l < c.level_max; ++l) {
        if (const auto* next = find(l + 1, true)) {
            lb.push_back(l);
            bv.push_back(estimate_bias(next->estimates));
        }
    }
    auto add_rate = [&](std::string q, const std::vector<double>& l, const std::vector<double>& v) {
        if (l.size() < 3) return std::optional<double>{};
        const double r = fit_rate(l, v);
        out.rates.push_back({model_name, alg_name, c.change_of_measure, std::move(q),
                             static_cast<int>(l.front()), static_cast<int>(l.back()), r});
        return std::optional<double>(r);
    };
    out.v_rate = add_rate("V_coupled", lv, vv).value_or(std::numeric_limits<double>::quiet_NaN());
    if (c.level_min == 0 && find(0, false)) {
        std::vector<double> l2{0.0}, v2{estimate_variance(find(0, false)->estimates, N)};
        l2.insert(l2.end(), lv.begin(), lv.end());
        v2.insert(v2.end(), vv.begin(), vv.end());
        add_rate("V", l2, v2);
    }
    out.b_rate = add_rate("B", lb, bv).value_or(std::numeric_limits<double>::quiet_NaN());

    for (int l = c.level_min; l <= c.level_max; ++l) {
        LevelStats s;
        s.level = l;
        SummaryRecord rec{model_name, alg_name, c.change_of_measure, l,
                          static_cast<long long>(c.particles)};
        rec.V = rec.B = rec.W = rec.V_base = rec.W_base = std::numeric_limits<double>::quiet_NaN();
        rec.W_model = std::numeric_limits<double>::quiet_NaN();
        if (const auto* lm = find(l, true)) {
            rec.W_model = model_cost(m, l, true);
            s.V = estimate_variance(lm->estimates, N);
            rec.V = s.V;
            rec.W = per_particle_seconds(*lm);
            s.W = c.cost == CostSource::Model ? rec.W_model : rec.W;
            rec.dynamics_seconds += lm->dynamics_seconds;
            rec.resampling_seconds += lm->resampling_seconds;
        }
        if (const auto* lm = find(l, false)) {
            s.V_base = estimate_variance(lm->estimates, N);
            rec.V_base = s.V_base;
            rec.W_base = per_particle_seconds(*lm);
            s.W_base = c.cost == CostSource::Model ? model_cost(m, l, false) : rec.W_base;
            rec.dynamics_seconds += lm->dynamics_seconds;
            rec.resampling_seconds += lm->resampling_seconds;
        }
        if (const auto* next = find(l + 1, true)) {
            s.B = estimate_bias(next->estimates);
        } else if (!bv.empty()) {
            const double rate = std::isfinite(out.b_rate) ? out.b_rate : 1.0;
            s.B = bv.back() * std::exp2(-rate * (l - lb.back()));
            s.extrapolated = true;
        }
        rec.B = s.B;
        rec.extrapolated = s.extrapolated;
        out.stats.push_back(s);
        out.summary.push_back(rec);
    }
    return out;
}

/// Final-time estimate of one multilevel estimator run.
struct MlpfRun {
    double estimate = 0.0;
    double wall_time = 0.0;
    double work_units = 0.0;
    std::vector<double> per_observation;  // summed estimator at every observation
};

inline MlpfRun run_mlpf(const RunConfig& c, const ModelSpec& m, const MlpfPlan& plan,
                        std::span<const Observation> obs, int series, int k,
                        StreamAudit* audit = nullptr) {
    const auto t0 = std::chrono::steady_clock::now();
    MlpfRun out;
    out.per_observation.assign(obs.size(), 0.0);
    for (int l = plan.l0; l <= plan.L; ++l) {
        const auto n = static_cast<std::size_t>(std::max(2LL, plan.N[l - plan.l0]));
        const bool coupled = l > plan.l0;
        const FilterRng rng = claim_filter_rng(
            audit, {c.seed, static_cast<std::uint32_t>(series), static_cast<std::uint32_t>(k),
                    static_cast<std::uint32_t>(l), coupled ? kEstimatorTolCoupled : kEstimatorTolBase,
                    Purpose::Dynamics});
        const FilterOutput res = run_study_filter(c, m, obs, l, coupled, n, rng);
        const auto est = res.filter_estimates();
        for (std::size_t i = 0; i < est.size(); ++i) out.per_observation[i] += est[i];
        out.work_units += static_cast<double>(n) * model_cost(m, l, coupled);
    }
    out.estimate = out.per_observation.back();
    out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

/// Plans for eps_0..eps_kmax. Statistics are extended to finer levels by the
/// fitted rates first. With `dw_consecutive_L` the finest level of each plan
/// is one above the previous one whenever that level meets the bias budget.
inline std::vector<MlpfPlan> plan_tolerances(const RunConfig& c, std::vector<LevelStats> stats,
                                             double v_rate, double b_rate) {
    stats = extrapolate_stats(std::move(stats), c.extrapolate_to,
                              std::isfinite(v_rate) ? v_rate : 1.0,
                              std::isfinite(b_rate) ? b_rate : 1.0);
    std::vector<MlpfPlan> plans;
    for (double eps : tolerance_sequence(c.eps1, c.k_max)) {
        PlanOptions po;
        if (c.dw_consecutive_L && !plans.empty()) {
            po.required_L = plans.back().L + 1;
            try {
                plans.push_back(optimal_plan(stats, eps, c.C_xi, po));
                continue;
            } catch (const std::invalid_argument&) {
                po.required_L.reset();
            }
        }
        plans.push_back(optimal_plan(stats, eps, c.C_xi, po));
    }
    return plans;
}

struct ToleranceStudy {
    std::vector<MlpfPlan> plans;
    std::vector<ToleranceRecord> records;
    std::vector<ReferenceRecord> references;

    /// Fraction of series with error above epsilon, per k.
    std::vector<double> failure_fractions() const {
        std::vector<double> f(plans.size(), 0.0), n(plans.size(), 0.0);
        for (const auto& r : records) {
            n[r.k] += 1.0;
            if (r.error > r.epsilon) f[r.k] += 1.0;
        }
        for (std::size_t k = 0; k < f.size(); ++k) f[k] = n[k] > 0 ? f[k] / n[k] : 0.0;
        return f;
    }

    /// Total of a cost column per k.
    std::vector<double> totals(bool wall_time) const {
        std::vector<double> t(plans.size(), 0.0);
        for (const auto& r : records) t[r.k] += wall_time ? r.wall_time : r.work_units;
        return t;
    }
};

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
    }
    const auto n = static_cast<double>(lx.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    return sxy / sxx;
}

inline ToleranceStudy run_tolerance_study(const RunConfig& c, std::vector<MlpfPlan> plans) {
    c.validate();
    const ModelSpec m = c.model_spec();
    StreamAudit audit(c.audit);
    StreamAudit* ap = c.audit ? &audit : nullptr;

    ToleranceStudy out;
    out.plans = std::move(plans);
    std::vector<SyntheticData> data;
    std::vector<double> final_reference;
    for (int i = 0; i < c.tolerance_series; ++i) {
        data.push_back(study_data(c, i, kEstimatorToleranceData, ap));
        const auto ref = run_reference_filter(m, data.back().observations, c.delta);
        for (std::size_t n = 0; n < ref.size(); ++n)
            out.references.push_back({i, static_cast<int>(n + 1), ref[n]});
        final_reference.push_back(ref.back());
    }

    struct Task {
        int k, series;
    };
    std::vector<Task> tasks;
    for (int k = 0; k < static_cast<int>(out.plans.size()); ++k)
        for (int i = 0; i < c.tolerance_series; ++i) tasks.push_back({k, i});
    std::vector<MlpfRun> runs(tasks.size());
    parallel_for(tasks.size(), c.jobs, [&](std::size_t j) {
        const auto& t = tasks[j];
        runs[j] = run_mlpf(c, m, out.plans[t.k], data[t.series].observations, t.series, t.k, ap);
    });
    const std::string model_name(to_string(c.model));
    const std::string alg_name(to_string(c.algorithm));
    for (std::size_t j = 0; j < tasks.size(); ++j) {
        const auto& t = tasks[j];
        const auto& p = out.plans[t.k];
        const double ref = final_reference[t.series];
        out.records.push_back({model_name, alg_name, t.k, p.epsilon, t.series, p.l0, p.L,
                               runs[j].estimate, ref, std::abs(runs[j].estimate - ref),
                               runs[j].wall_time, runs[j].work_units});
    }
    return out;
}

}  // namespace mlpf
