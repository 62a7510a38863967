#pragma once

// Row types of the experiment outputs.

#include <algorithm>
#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mlpf/harness/csv.hpp"

namespace mlpf {

/// Columns holding wall-clock measurements; excluded from determinism checks.
inline constexpr std::array<std::string_view, 5> kTimingColumns = {
    "W", "W_base", "dynamics_seconds", "resampling_seconds", "wall_time"};

inline bool is_timing_column(std::string_view c) {
    return std::find(kTimingColumns.begin(), kTimingColumns.end(), c) != kTimingColumns.end();
}

namespace detail {
inline std::string fmt(double v) { return csv::format_double(v); }
inline std::string fmt(long long v) { return std::to_string(v); }
inline std::string fmt(int v) { return std::to_string(v); }
inline std::string fmt(bool v) { return v ? "1" : "0"; }
}  // namespace detail

struct ConvergenceRecord {
    static constexpr const char* kSchema = "mlpf.convergence/1";
    std::string model, algorithm;
    bool com = false;
    int level = 0;
    long long N = 0;
    int series = 0, repeat = 0, observation = 0;
    std::string estimate_kind;
    double value = 0.0;

    static std::vector<std::string> columns() {
        return {"model", "algorithm", "com", "level", "N", "series",
                "repeat", "observation", "estimate_kind", "value"};
    }
    std::vector<std::string> to_row() const {
        using detail::fmt;
        return {model, algorithm, fmt(com), fmt(level), fmt(N), fmt(series),
                fmt(repeat), fmt(observation), estimate_kind, fmt(value)};
    }
    static ConvergenceRecord from_row(const std::vector<std::string>& r) {
        ConvergenceRecord c;
        c.model = r[0];
        c.algorithm = r[1];
        c.com = r[2] == "1";
        c.level = static_cast<int>(csv::parse_int(r[3]));
        c.N = csv::parse_int(r[4]);
        c.series = static_cast<int>(csv::parse_int(r[5]));
        c.repeat = static_cast<int>(csv::parse_int(r[6]));
        c.observation = static_cast<int>(csv::parse_int(r[7]));
        c.estimate_kind = r[8];
        c.value = csv::parse_double(r[9]);
        return c;
    }
    friend bool operator==(const ConvergenceRecord&, const ConvergenceRecord&) = default;
};

struct SummaryRecord {
    static constexpr const char* kSchema = "mlpf.summary/1";
    std::string model, algorithm;
    bool com = false;
    int level = 0;
    long long N = 0;
    double V = 0, B = 0, W = 0, W_model = 0, V_base = 0, W_base = 0;
    double dynamics_seconds = 0, resampling_seconds = 0;
    bool extrapolated = false;

    static std::vector<std::string> columns() {
        return {"model", "algorithm", "com", "level", "N", "V", "B", "W", "W_model",
                "V_base", "W_base", "dynamics_seconds", "resampling_seconds", "extrapolated"};
    }
    std::vector<std::string> to_row() const {
        using detail::fmt;
        return {model, algorithm, fmt(com), fmt(level), fmt(N), fmt(V), fmt(B), fmt(W),
                fmt(W_model), fmt(V_base), fmt(W_base), fmt(dynamics_seconds),
                fmt(resampling_seconds), fmt(extrapolated)};
    }
    static SummaryRecord from_row(const std::vector<std::string>& r) {
        SummaryRecord s;
        s.model = r[0];
        s.algorithm = r[1];
        s.com = r[2] == "1";
        s.level = static_cast<int>(csv::parse_int(r[3]));
        s.N = csv::parse_int(r[4]);
        s.V = csv::parse_double(r[5]);
        s.B = csv::parse_double(r[6]);
        s.W = csv::parse_double(r[7]);
        s.W_model = csv::parse_double(r[8]);
        s.V_base = csv::parse_double(r[9]);
        s.W_base = csv::parse_double(r[10]);
        s.dynamics_seconds = csv::parse_double(r[11]);
        s.resampling_seconds = csv::parse_double(r[12]);
        s.extrapolated = r[13] == "1";
        return s;
    }
    friend bool operator==(const SummaryRecord&, const SummaryRecord&) = default;
};

struct RateRecord {
    static constexpr const char* kSchema = "mlpf.rates/1";
    std::string model, algorithm;
    bool com = false;
    std::string quantity;  // V, B or V_coupled
    int level_min = 0, level_max = 0;
    double rate = 0.0;

    static std::vector<std::string> columns() {
        return {"model", "algorithm", "com", "quantity", "level_min", "level_max", "rate"};
    }
    std::vector<std::string> to_row() const {
        using detail::fmt;
        return {model, algorithm, fmt(com), quantity, fmt(level_min), fmt(level_max), fmt(rate)};
    }
    static RateRecord from_row(const std::vector<std::string>& r) {
        RateRecord x;
        x.model = r[0];
        x.algorithm = r[1];
        x.com = r[2] == "1";
        x.quantity = r[3];
        x.level_min = static_cast<int>(csv::parse_int(r[4]));
        x.level_max = static_cast<int>(csv::parse_int(r[5]));
        x.rate = csv::parse_double(r[6]);
        return x;
    }
    friend bool operator==(const RateRecord&, const RateRecord&) = default;
};

struct ToleranceRecord {
    static constexpr const char* kSchema = "mlpf.tolerance/1";
    std::string model, algorithm;
    int k = 0;
    double epsilon = 0.0;
    int series = 0;
    int l0 = 0, L = 0;
    double estimate = 0, reference = 0, error = 0, wall_time = 0, work_units = 0;

    static std::vector<std::string> columns() {
        return {"model", "algorithm", "k", "epsilon", "series", "l0", "L",
                "estimate", "reference", "error", "wall_time", "work_units"};
    }
    std::vector<std::string> to_row() const {
        using detail::fmt;
        return {model, algorithm, fmt(k), fmt(epsilon), fmt(series), fmt(l0), fmt(L),
                fmt(estimate), fmt(reference), fmt(error), fmt(wall_time), fmt(work_units)};
    }
    static ToleranceRecord from_row(const std::vector<std::string>& r) {
        ToleranceRecord t;
        t.model = r[0];
        t.algorithm = r[1];
        t.k = static_cast<int>(csv::parse_int(r[2]));
        t.epsilon = csv::parse_double(r[3]);
        t.series = static_cast<int>(csv::parse_int(r[4]));
        t.l0 = static_cast<int>(csv::parse_int(r[5]));
        t.L = static_cast<int>(csv::parse_int(r[6]));
        t.estimate = csv::parse_double(r[7]);
        t.reference = csv::parse_double(r[8]);
        t.error = csv::parse_double(r[9]);
        t.wall_time = csv::parse_double(r[10]);
        t.work_units = csv::parse_double(r[11]);
        return t;
    }
    friend bool operator==(const ToleranceRecord&, const ToleranceRecord&) = default;
};

struct ReferenceRecord {
    static constexpr const char* kSchema = "mlpf.reference/1";
    int series = 0, n = 0;
    double mean = 0.0;

    static std::vector<std::string> columns() { return {"series", "n", "mean"}; }
    std::vector<std::string> to_row() const {
        return {detail::fmt(series), detail::fmt(n), detail::fmt(mean)};
    }
    static ReferenceRecord from_row(const std::vector<std::string>& r) {
        return {static_cast<int>(csv::parse_int(r[0])), static_cast<int>(csv::parse_int(r[1])),
                csv::parse_double(r[2])};
    }
    friend bool operator==(const ReferenceRecord&, const ReferenceRecord&) = default;
};

struct DataRecord {
    static constexpr const char* kSchema = "mlpf.data/1";
    int n = 0;
    double t = 0.0, y = 0.0;

    static std::vector<std::string> columns() { return {"n", "t", "y"}; }
    std::vector<std::string> to_row() const {
        return {detail::fmt(n), detail::fmt(t), detail::fmt(y)};
    }
    static DataRecord from_row(const std::vector<std::string>& r) {
        return {static_cast<int>(csv::parse_int(r[0])), csv::parse_double(r[1]),
                csv::parse_double(r[2])};
    }
    friend bool operator==(const DataRecord&, const DataRecord&) = default;
};

/// Latent state at the observation times (n = 0 is the initial state).
struct LatentRecord {
    static constexpr const char* kSchema = "mlpf.latent/1";
    int n = 0;
    double t = 0.0, x = 0.0;

    static std::vector<std::string> columns() { return {"n", "t", "x"}; }
    std::vector<std::string> to_row() const {
        return {detail::fmt(n), detail::fmt(t), detail::fmt(x)};
    }
    static LatentRecord from_row(const std::vector<std::string>& r) {
        return {static_cast<int>(csv::parse_int(r[0])), csv::parse_double(r[1]),
                csv::parse_double(r[2])};
    }
    friend bool operator==(const LatentRecord&, const LatentRecord&) = default;
};

template <class R>
csv::Table to_table(const std::vector<R>& records) {
    csv::Table t{R::kSchema, R::columns(), {}};
    t.rows.reserve(records.size());
    for (const auto& r : records) t.rows.push_back(r.to_row());
    return t;
}

template <class R>
std::vector<R> from_table(const csv::Table& t) {
    if (t.schema != R::kSchema)
        throw std::invalid_argument("csv: expected schema " + std::string(R::kSchema) + ", got " +
                                    t.schema);
    if (t.header != R::columns()) throw std::invalid_argument("csv: unexpected header");
    std::vector<R> out;
    out.reserve(t.rows.size());
    for (const auto& r : t.rows) out.push_back(R::from_row(r));
    return out;
}

template <class R>
void write_records(const std::filesystem::path& p, const std::vector<R>& records) {
    csv::write_file(p, to_table(records));
}

template <class R>
std::vector<R> read_records(const std::filesystem::path& p) {
    return from_table<R>(csv::read_file(p));
}

}  // namespace mlpf
