#pragma once

// JSON documents for level statistics and plans:
//   {"model", "algorithm", "change_of_measure", "levels": [{"l","V","B","W",...}]}
//   {"epsilon", "l0", "L", "N": [...], "phi", "C_xi", "work"}

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlpf/hierarchy.hpp"

namespace mlpf {

struct StatsDocument {
    std::string model;
    std::string algorithm;
    bool change_of_measure = false;
    std::vector<LevelStats> levels;
};

namespace detail {

inline nlohmann::json number_or_null(double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline double number_or_nan(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::numeric_limits<double>::quiet_NaN();
    return j.at(key).get<double>();
}

}  // namespace detail

inline nlohmann::json to_json(const StatsDocument& d) {
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& s : d.levels) {
        levels.push_back({{"l", s.level},
                          {"V", detail::number_or_null(s.V)},
                          {"B", detail::number_or_null(s.B)},
                          {"W", detail::number_or_null(s.W)},
                          {"V_base", detail::number_or_null(s.V_base)},
                          {"W_base", detail::number_or_null(s.W_base)},
                          {"extrapolated", s.extrapolated}});
    }
    return {{"model", d.model},
            {"algorithm", d.algorithm},
            {"change_of_measure", d.change_of_measure},
            {"levels", levels}};
}

inline StatsDocument stats_from_json(const nlohmann::json& j) {
    StatsDocument d;
    d.model = j.value("model", "");
    d.algorithm = j.value("algorithm", "");
    d.change_of_measure = j.value("change_of_measure", false);
    if (!j.contains("levels") || !j.at("levels").is_array())
        throw std::invalid_argument("stats document needs a 'levels' array");
    for (const auto& e : j.at("levels")) {
        LevelStats s;
        s.level = e.at("l").get<int>();
        s.V = detail::number_or_nan(e, "V");
        s.B = detail::number_or_nan(e, "B");
        s.W = detail::number_or_nan(e, "W");
        s.V_base = detail::number_or_nan(e, "V_base");
        s.W_base = detail::number_or_nan(e, "W_base");
        s.extrapolated = e.value("extrapolated", false);
        d.levels.push_back(s);
    }
    return d;
}

inline nlohmann::json to_json(const MlpfPlan& p) {
    return {{"epsilon", p.epsilon}, {"l0", p.l0},   {"L", p.L},       {"N", p.N},
            {"phi", p.phi},         {"C_xi", p.C_xi}, {"work", p.work}};
}

inline MlpfPlan plan_from_json(const nlohmann::json& j) {
    MlpfPlan p;
    p.epsilon = j.at("epsilon").get<double>();
    p.l0 = j.at("l0").get<int>();
    p.L = j.at("L").get<int>();
    p.N = j.at("N").get<std::vector<long long>>();
    p.phi = j.at("phi").get<double>();
    p.C_xi = j.at("C_xi").get<double>();
    p.work = j.value("work", 0.0);
    if (p.L < p.l0 || p.N.size() != static_cast<std::size_t>(p.L - p.l0 + 1))
        throw std::invalid_argument("plan: N must have one entry per level l0..L");
    return p;
}

inline nlohmann::json read_json(const std::filesystem::path& p) {
    std::ifstream is(p);
    if (!is) throw std::runtime_error("cannot read " + p.string());
    return nlohmann::json::parse(is);
}

inline void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << j.dump(2) << '\n';
}

}  // namespace mlpf
