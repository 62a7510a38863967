#pragma once

// Run configuration, profiles and the key=value config file format.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "mlpf/filtering.hpp"
#include "mlpf/girsanov.hpp"
#include "mlpf/models.hpp"

namespace mlpf {

enum class Profile { Desk, Paper };

inline Profile parse_profile(std::string_view s) {
    if (s == "desk") return Profile::Desk;
    if (s == "paper") return Profile::Paper;
    throw std::invalid_argument("unknown profile '" + std::string(s) + "' (expected desk|paper)");
}

enum class CostSource { Model, Measured };

struct RunConfig {
    ModelKind model = ModelKind::OU;
    Coupler algorithm = Coupler::Wasserstein;
    bool change_of_measure = false;
    std::optional<double> spring;

    double T = 50.0;
    double delta = 0.5;
    std::uint64_t seed = 1;
    int series = 3;
    int repeats = 50;
    std::size_t particles = 1024;
    int level_min = 0;
    int level_max = 6;
    int data_level = 10;

    int tolerance_series = 30;
    int k_max = 5;
    double eps1 = 0.03;
    double C_xi = 2.0;
    CostSource cost = CostSource::Model;
    int extrapolate_to = 12;
    bool dw_consecutive_L = false;

    std::optional<double> theta, sigma, tau2, dw_k1, dw_k2;

    int jobs = 1;
    bool audit = false;
    std::string out_dir = "out";

    int observations() const {
        const double d = T / delta;
        const auto D = static_cast<int>(std::llround(d));
        if (D < 1 || std::abs(d - D) > 1e-9)
            throw std::invalid_argument("T must be a positive multiple of delta");
        return D;
    }

    ModelSpec model_spec() const {
        ModelSpec m;
        switch (model) {
            case ModelKind::OU:
                m = ModelSpec::ou(theta.value_or(1.0), sigma.value_or(0.5), tau2.value_or(0.2));
                break;
            case ModelKind::NDT:
                m = ModelSpec::ndt(theta.value_or(1.0), sigma.value_or(1.0), tau2.value_or(0.1));
                break;
            case ModelKind::DW: {
                const DwParams d;
                m = ModelSpec::double_well(sigma.value_or(1.0), tau2.value_or(0.2),
                                           DwParams(dw_k1.value_or(d.k1()), dw_k2.value_or(d.k2())));
                break;
            }
        }
        return m;
    }

    ResamplePolicy policy() const {
        return change_of_measure ? ResamplePolicy::always(algorithm)
                                 : ResamplePolicy::defaults(model, algorithm);
    }

    double spring_strength() const {
        if (spring) return *spring;
        return default_spring(model_spec());
    }

    /// Lowest level at which a coupled filter is valid.
    int first_coupled_level() const { return std::max(1, level_min); }

    void validate() const {
        observations();
        if (series < 1 || repeats < 2) throw std::invalid_argument("need series >= 1 and repeats >= 2");
        if (particles < 2) throw std::invalid_argument("need at least 2 particles");
        if (level_min < 0 || level_max < level_min) throw std::invalid_argument("bad level range");
        if (jobs < 1) throw std::invalid_argument("jobs must be positive");
        if (change_of_measure) {
            if (!model_spec().constant_diffusion())
                throw std::invalid_argument("change of measure needs a constant diffusion coefficient");
            if (model != ModelKind::DW)
                throw std::invalid_argument("change of measure is only meaningful for the double well");
        }
        if (spring && !change_of_measure)
            throw std::invalid_argument("--spring needs --change-of-measure");
        model_spec();
    }
};

/// Profile defaults. The desk profile keeps runs to minutes.
inline RunConfig profile_defaults(Profile p, ModelKind k) {
    RunConfig c;
    c.model = k;
    if (p == Profile::Desk) {
        c.T = 50.0;
        c.series = 3;
        c.repeats = 50;
        c.particles = 1024;
        c.tolerance_series = 30;
        c.level_max = k == ModelKind::DW ? 4 : 6;
    } else {
        c.T = 500.0;
        c.series = 5;
        c.repeats = 100;
        c.particles = 8192;
        c.tolerance_series = 100;
        c.level_max = k == ModelKind::DW ? 6 : 8;
    }
    c.dw_consecutive_L = k == ModelKind::DW;
    return c;
}

inline std::map<std::string, std::string> read_key_values(std::istream& is) {
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

inline std::map<std::string, std::string> read_key_value_file(const std::filesystem::path& p) {
    std::ifstream is(p);
    if (!is) throw std::runtime_error("cannot read config " + p.string());
    return read_key_values(is);
}

/// Applies key=value overrides. Unknown keys are errors.
inline void apply_key_values(RunConfig& c, const std::map<std::string, std::string>& kv) {
    auto num = [](const std::string& k, const std::string& v) {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("config: bad number for " + k);
        return d;
    };
    auto integer = [&](const std::string& k, const std::string& v) {
        const double d = num(k, v);
        if (d != std::floor(d)) throw std::invalid_argument("config: " + k + " must be an integer");
        return static_cast<long long>(d);
    };
    auto boolean = [](const std::string& k, const std::string& v) {
        if (v == "1" || v == "true" || v == "yes") return true;
        if (v == "0" || v == "false" || v == "no") return false;
        throw std::invalid_argument("config: " + k + " must be a boolean");
    };
    for (const auto& [k, v] : kv) {
        if (k == "model") c.model = parse_model_kind(v);
        else if (k == "algorithm") c.algorithm = parse_coupler(v);
        else if (k == "change_of_measure") c.change_of_measure = boolean(k, v);
        else if (k == "spring") c.spring = num(k, v);
        else if (k == "T") c.T = num(k, v);
        else if (k == "delta") c.delta = num(k, v);
        else if (k == "seed") c.seed = static_cast<std::uint64_t>(integer(k, v));
        else if (k == "series") c.series = static_cast<int>(integer(k, v));
        else if (k == "repeats") c.repeats = static_cast<int>(integer(k, v));
        else if (k == "particles") c.particles = static_cast<std::size_t>(integer(k, v));
        else if (k == "level_min") c.level_min = static_cast<int>(integer(k, v));
        else if (k == "level_max") c.level_max = static_cast<int>(integer(k, v));
        else if (k == "data_level") c.data_level = static_cast<int>(integer(k, v));
        else if (k == "tolerance_series") c.tolerance_series = static_cast<int>(integer(k, v));
        else if (k == "k_max") c.k_max = static_cast<int>(integer(k, v));
        else if (k == "eps1") c.eps1 = num(k, v);
        else if (k == "C_xi") c.C_xi = num(k, v);
        else if (k == "cost") {
            if (v == "model") c.cost = CostSource::Model;
            else if (v == "measured") c.cost = CostSource::Measured;
            else throw std::invalid_argument("config: cost must be model|measured");
        }
        else if (k == "extrapolate_to") c.extrapolate_to = static_cast<int>(integer(k, v));
        else if (k == "dw_consecutive_L") c.dw_consecutive_L = boolean(k, v);
        else if (k == "theta") c.theta = num(k, v);
        else if (k == "sigma") c.sigma = num(k, v);
        else if (k == "tau2") c.tau2 = num(k, v);
        else if (k == "dw_k1") c.dw_k1 = num(k, v);
        else if (k == "dw_k2") c.dw_k2 = num(k, v);
        else if (k == "jobs") c.jobs = static_cast<int>(integer(k, v));
        else if (k == "audit") c.audit = boolean(k, v);
        else if (k == "out") c.out_dir = v;
        else throw std::invalid_argument("config: unknown key '" + k + "'");
    }
}

}  // namespace mlpf
