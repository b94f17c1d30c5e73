#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "environments.hpp"
#include "policies.hpp"
#include "safety_values.hpp"

namespace bandit {

/// Raised for malformed configs and CLI flag combinations (exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValueFunctionSpec {
    SafetyValueFunction::Kind kind = SafetyValueFunction::Kind::mean;
    double rho = 1.0;
    double alpha = 0.1;
    EstimatorForm form = EstimatorForm::biased;

    SafetyValueFunction to_svf() const {
        switch (kind) {
            case SafetyValueFunction::Kind::mean: return SafetyValueFunction::mean();
            case SafetyValueFunction::Kind::mean_variance:
                return SafetyValueFunction::mean_variance(rho, form);
            case SafetyValueFunction::Kind::cvar: return SafetyValueFunction::cvar(alpha);
        }
        return SafetyValueFunction::mean();
    }
};

struct EnvironmentSpec {
    enum class Type { two_arm, mixture, csv, arms };
    Type type = Type::two_arm;
    double r = 0.4;                        // two_arm
    std::size_t k = 20;                    // mixture
    std::string csv_path, value_column, group_column;  // csv
    std::vector<ArmDistribution> arms;     // literal arm list
};

/// One replicated comparison: an environment, one value function that
/// governs regret accounting, and one or more policies run side by side.
struct ExperimentConfig {
    EnvironmentSpec environment;
    ValueFunctionSpec value_function;
    std::vector<PolicySpec> policies;
    std::uint64_t horizon = 1000;
    std::uint64_t replications = 1;
    std::uint64_t seed = 42;
    std::string output_dir = "results";
    bool full_traces = false;
};

// Reserved run-id lanes under the master seed. Run streams use
// (policy_index << 32) | run_id, so anything with the top bit set cannot
// collide with them.
inline constexpr std::uint64_t kEnvStreamId = 0x8000000000000000ull;
inline constexpr std::uint64_t kTrueValueStreamId = 0x8000000000000001ull;

inline Environment build_environment(const EnvironmentSpec& spec, std::uint64_t master_seed) {
    switch (spec.type) {
        case EnvironmentSpec::Type::two_arm: return make_two_arm_benchmark(spec.r);
        case EnvironmentSpec::Type::mixture: {
            RngStream rng = derive_run_rng(master_seed, kEnvStreamId);
            return make_mixture_benchmark(spec.k, rng);
        }
        case EnvironmentSpec::Type::csv:
            return load_empirical_csv(spec.csv_path, spec.value_column, spec.group_column);
        case EnvironmentSpec::Type::arms: {
            if (spec.arms.size() < 2) throw ConfigError("environment needs at least 2 arms");
            Environment env;
            env.arms = spec.arms;
            for (std::size_t i = 0; i < env.arms.size(); ++i) {
                env.labels.push_back("arm" + std::to_string(i));
            }
            return env;
        }
    }
    throw ConfigError("unreachable environment type");
}

/// Fills policy parameters the config left implicit: marab's alpha follows a
/// cvar value function, mv_lcb/expexp's rho follows a mean-variance one, and
/// expexp's exploration length defaults to (T/14)^(2/3).
inline void resolve_policy_defaults(PolicySpec& spec, const ValueFunctionSpec& vf,
                                    std::uint64_t horizon, bool rho_given, bool alpha_given) {
    if (!alpha_given && vf.kind == SafetyValueFunction::Kind::cvar) spec.alpha = vf.alpha;
    if (!rho_given && vf.kind == SafetyValueFunction::Kind::mean_variance) spec.rho = vf.rho;
    if (spec.type == PolicyType::expexp && spec.tau == 0) {
        spec.tau = static_cast<std::uint64_t>(
            std::llround(std::pow(static_cast<double>(horizon) / 14.0, 2.0 / 3.0)));
        if (spec.tau == 0) spec.tau = 1;
    }
}

namespace detail {

using nlohmann::json;

inline void require_keys(const json& j, std::initializer_list<const char*> allowed,
                         const std::string& context) {
    if (!j.is_object()) throw ConfigError(context + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed) {
            if (it.key() == k) {
                known = true;
                break;
            }
        }
        if (!known) throw ConfigError("unknown key '" + it.key() + "' in " + context);
    }
}

inline const json& need(const json& j, const char* key, const std::string& context) {
    const auto it = j.find(key);
    if (it == j.end()) throw ConfigError("missing key '" + std::string(key) + "' in " + context);
    return *it;
}

template <typename T>
T as(const json& j, const std::string& context) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ConfigError("bad value for " + context);
    }
}

inline ArmDistribution parse_arm(const json& j, const std::string& context) {
    const auto type = as<std::string>(need(j, "type", context), context + ".type");
    try {
        if (type == "deterministic") {
            require_keys(j, {"type", "value"}, context);
            return ArmDistribution::deterministic(as<double>(need(j, "value", context), context));
        }
        if (type == "uniform") {
            require_keys(j, {"type", "lo", "hi"}, context);
            return ArmDistribution::uniform(as<double>(need(j, "lo", context), context),
                                            as<double>(need(j, "hi", context), context));
        }
        if (type == "bernoulli") {
            require_keys(j, {"type", "p"}, context);
            return ArmDistribution::bernoulli(as<double>(need(j, "p", context), context));
        }
        if (type == "truncated_gaussian_mixture") {
            require_keys(j, {"type", "components"}, context);
            std::vector<GaussianComponent> comps;
            for (const auto& c : need(j, "components", context)) {
                require_keys(c, {"weight", "mean", "stddev"}, context + ".components[]");
                comps.push_back({as<double>(need(c, "weight", context), context),
                                 as<double>(need(c, "mean", context), context),
                                 as<double>(need(c, "stddev", context), context)});
            }
            return ArmDistribution::truncated_gaussian_mixture(std::move(comps));
        }
        if (type == "empirical") {
            require_keys(j, {"type", "samples"}, context);
            return ArmDistribution::empirical(
                as<std::vector<double>>(need(j, "samples", context), context));
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(context + ": " + e.what());
    }
    throw ConfigError("unknown arm type '" + type + "' in " + context);
}

inline EnvironmentSpec parse_environment(const json& j) {
    EnvironmentSpec spec;
    const auto type = as<std::string>(need(j, "type", "environment"), "environment.type");
    if (type == "two_arm") {
        require_keys(j, {"type", "r"}, "environment");
        spec.type = EnvironmentSpec::Type::two_arm;
        spec.r = as<double>(need(j, "r", "environment"), "environment.r");
    } else if (type == "mixture") {
        require_keys(j, {"type", "k"}, "environment");
        spec.type = EnvironmentSpec::Type::mixture;
        spec.k = as<std::size_t>(need(j, "k", "environment"), "environment.k");
    } else if (type == "csv") {
        require_keys(j, {"type", "path", "value_column", "group_column"}, "environment");
        spec.type = EnvironmentSpec::Type::csv;
        spec.csv_path = as<std::string>(need(j, "path", "environment"), "environment.path");
        spec.value_column =
            as<std::string>(need(j, "value_column", "environment"), "environment.value_column");
        spec.group_column =
            as<std::string>(need(j, "group_column", "environment"), "environment.group_column");
    } else if (type == "arms") {
        require_keys(j, {"type", "arms"}, "environment");
        spec.type = EnvironmentSpec::Type::arms;
        std::size_t i = 0;
        for (const auto& a : need(j, "arms", "environment")) {
            spec.arms.push_back(parse_arm(a, "environment.arms[" + std::to_string(i++) + "]"));
        }
    } else {
        throw ConfigError("unknown environment type '" + type + "'");
    }
    return spec;
}

inline ValueFunctionSpec parse_value_function(const json& j) {
    ValueFunctionSpec spec;
    const auto type = as<std::string>(need(j, "type", "value_function"), "value_function.type");
    if (type == "mean") {
        require_keys(j, {"type"}, "value_function");
        spec.kind = SafetyValueFunction::Kind::mean;
    } else if (type == "mean_variance") {
        require_keys(j, {"type", "rho", "estimator_form"}, "value_function");
        spec.kind = SafetyValueFunction::Kind::mean_variance;
        if (j.contains("rho")) spec.rho = as<double>(j["rho"], "value_function.rho");
        if (j.contains("estimator_form")) {
            const auto form = as<std::string>(j["estimator_form"], "value_function.estimator_form");
            if (form == "biased") {
                spec.form = EstimatorForm::biased;
            } else if (form == "unbiased") {
                spec.form = EstimatorForm::unbiased;
            } else {
                throw ConfigError("estimator_form must be 'biased' or 'unbiased'");
            }
        }
    } else if (type == "cvar") {
        require_keys(j, {"type", "alpha"}, "value_function");
        spec.kind = SafetyValueFunction::Kind::cvar;
        if (j.contains("alpha")) spec.alpha = as<double>(j["alpha"], "value_function.alpha");
        if (!(spec.alpha > 0.0) || spec.alpha > 1.0) {
            throw ConfigError("value_function.alpha must be in (0,1]");
        }
    } else {
        throw ConfigError("unknown value_function type '" + type + "'");
    }
    return spec;
}

inline PolicySpec parse_policy(const json& j, const ValueFunctionSpec& vf, std::uint64_t horizon,
                               const std::string& context) {
    PolicySpec spec;
    const auto type = as<std::string>(need(j, "type", context), context + ".type");
    if (type == "besa_plus") {
        spec.type = PolicyType::besa_plus;
    } else if (type == "besa") {
        spec.type = PolicyType::besa;
    } else if (type == "ucb1") {
        spec.type = PolicyType::ucb1;
    } else if (type == "thompson") {
        spec.type = PolicyType::thompson;
    } else if (type == "mv_lcb") {
        spec.type = PolicyType::mv_lcb;
    } else if (type == "expexp") {
        spec.type = PolicyType::expexp;
    } else if (type == "marab") {
        spec.type = PolicyType::marab;
    } else {
        throw ConfigError("unknown policy type '" + type + "' in " + context);
    }
    require_keys(j, {"type", "rho", "alpha", "C", "lcb_scale", "tau"}, context);
    const bool rho_given = j.contains("rho");
    const bool alpha_given = j.contains("alpha");
    if (rho_given) spec.rho = as<double>(j["rho"], context + ".rho");
    if (alpha_given) spec.alpha = as<double>(j["alpha"], context + ".alpha");
    if (j.contains("C")) spec.C = as<double>(j["C"], context + ".C");
    if (j.contains("lcb_scale")) spec.lcb_scale = as<double>(j["lcb_scale"], context + ".lcb_scale");
    if (j.contains("tau")) spec.tau = as<std::uint64_t>(j["tau"], context + ".tau");
    resolve_policy_defaults(spec, vf, horizon, rho_given, alpha_given);
    return spec;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
    detail::require_keys(j,
                         {"seed", "horizon", "replications", "output_dir", "full_traces",
                          "environment", "value_function", "policies"},
                         "config");
    ExperimentConfig config;
    config.seed = detail::as<std::uint64_t>(detail::need(j, "seed", "config"), "config.seed");
    config.horizon =
        detail::as<std::uint64_t>(detail::need(j, "horizon", "config"), "config.horizon");
    config.replications =
        detail::as<std::uint64_t>(detail::need(j, "replications", "config"), "config.replications");
    if (config.horizon < 1) throw ConfigError("horizon must be >= 1");
    if (config.replications < 1) throw ConfigError("replications must be >= 1");
    if (config.replications >= (1ull << 32)) throw ConfigError("replications must fit in 32 bits");
    if (j.contains("output_dir")) {
        config.output_dir = detail::as<std::string>(j["output_dir"], "config.output_dir");
    }
    if (j.contains("full_traces")) {
        config.full_traces = detail::as<bool>(j["full_traces"], "config.full_traces");
    }
    config.environment = detail::parse_environment(detail::need(j, "environment", "config"));
    config.value_function =
        detail::parse_value_function(detail::need(j, "value_function", "config"));
    const auto& policies = detail::need(j, "policies", "config");
    if (!policies.is_array() || policies.empty()) {
        throw ConfigError("config.policies must be a nonempty array");
    }
    std::size_t i = 0;
    for (const auto& p : policies) {
        config.policies.push_back(detail::parse_policy(
            p, config.value_function, config.horizon, "policies[" + std::to_string(i++) + "]"));
    }
    return config;
}

inline ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return parse_experiment_config(j);
}

}  // namespace bandit
