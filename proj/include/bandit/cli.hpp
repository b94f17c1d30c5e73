#pragma once

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "concentration.hpp"
#include "config.hpp"
#include "harness.hpp"

namespace bandit {

namespace detail {

inline void run_and_export(const ExperimentConfig& config) {
    const AggregateResult result = run_experiment(config);
    export_results(result, config.output_dir);
    std::cout << "environment: " << result.environment.size() << " arms, value function "
              << config.value_function.to_svf().name() << ", v* = "
              << fmt_double(result.truth.v_star) << "\n";
    const std::size_t last = result.checkpoints.size() - 1;
    for (const auto& pol : result.policies) {
        std::cout << pol.name << ": mean regret at T=" << result.checkpoints[last] << " is "
                  << fmt_double(pol.mean_regret[last]) << " (std " << fmt_double(pol.std_regret[last])
                  << "), optimal play " << fmt_double(pol.optimal_play_pct[last]) << "%\n";
    }
    std::cout << "wrote " << config.output_dir << "/summary.csv\n";
}

inline PolicySpec make_policy(PolicyType type, const ValueFunctionSpec& vf, std::uint64_t horizon) {
    PolicySpec spec;
    spec.type = type;
    resolve_policy_defaults(spec, vf, horizon, /*rho_given=*/false, /*alpha_given=*/false);
    return spec;
}

}  // namespace detail

/// Entry point behind the bandit-bench executable. Exit codes: 0 success,
/// 1 runtime failure, 2 malformed flags or config.
inline int cli_main(int argc, const char* const* argv) {
    CLI::App app{"Subsampling-duel bandit benchmarks with risk-sensitive value functions"};
    app.require_subcommand(1);

    // run --config
    auto* cmd_run = app.add_subcommand("run", "Run an experiment described by a JSON config file");
    std::string config_path;
    cmd_run->add_option("--config", config_path, "Path to the JSON experiment config")->required();

    // bench-two-arm
    auto* cmd_two = app.add_subcommand(
        "bench-two-arm", "Deterministic(r) vs Uniform(0,1) under the mean, BESA+ vs BESA");
    double two_r = 0.2;
    std::uint64_t two_T = 5000, two_runs = 200, two_seed = 42;
    std::string two_out = "results/two-arm";
    bool two_full_traces = false;
    cmd_two->add_option("--r", two_r, "Deterministic arm reward, in [0, 0.5)")->required();
    cmd_two->add_option("--T", two_T, "Horizon");
    cmd_two->add_option("--runs", two_runs, "Replications");
    cmd_two->add_option("--seed", two_seed, "Master seed");
    cmd_two->add_option("--out", two_out, "Output directory");
    cmd_two->add_flag("--full-traces", two_full_traces, "Record every step in trace files");

    // bench-mixture
    auto* cmd_mix = app.add_subcommand(
        "bench-mixture", "k-arm truncated Gaussian mixture benchmark (CVaR or mean-variance)");
    std::uint64_t mix_k = 20, mix_T = 5000, mix_runs = 10, mix_seed = 1;
    std::optional<double> mix_alpha, mix_rho;
    double mix_C = 1.0;
    std::string mix_out = "results/mixture";
    bool mix_full_traces = false;
    cmd_mix->add_option("--k", mix_k, "Number of arms");
    cmd_mix->add_option("--alpha", mix_alpha, "CVaR level; selects the CVaR experiment");
    cmd_mix->add_option("--rho", mix_rho, "Mean-variance trade-off; selects the MV experiment");
    cmd_mix->add_option("--C", mix_C, "MARAB exploration constant");
    cmd_mix->add_option("--T", mix_T, "Horizon");
    cmd_mix->add_option("--runs", mix_runs, "Replications");
    cmd_mix->add_option("--seed", mix_seed, "Master seed");
    cmd_mix->add_option("--out", mix_out, "Output directory");
    cmd_mix->add_flag("--full-traces", mix_full_traces, "Record every step in trace files");

    // bench-clinical
    auto* cmd_clin = app.add_subcommand(
        "bench-clinical", "Grouped survival-style CSV under mean-variance, full policy suite");
    std::string clin_csv, clin_value_col, clin_group_col;
    double clin_rho = 1.0;
    std::uint64_t clin_T = 5000, clin_runs = 200, clin_seed = 42;
    std::string clin_out = "results/clinical";
    bool clin_full_traces = false;
    cmd_clin->add_option("--csv", clin_csv, "CSV file with a header row")->required();
    cmd_clin->add_option("--value-column", clin_value_col, "Numeric column to bucket")->required();
    cmd_clin->add_option("--group-column", clin_group_col, "Column defining one arm per group")
        ->required();
    cmd_clin->add_option("--rho", clin_rho, "Mean-variance trade-off");
    cmd_clin->add_option("--T", clin_T, "Horizon");
    cmd_clin->add_option("--runs", clin_runs, "Replications");
    cmd_clin->add_option("--seed", clin_seed, "Master seed");
    cmd_clin->add_option("--out", clin_out, "Output directory");
    cmd_clin->add_flag("--full-traces", clin_full_traces, "Record every step in trace files");

    // verify-bounds
    auto* cmd_verify = app.add_subcommand(
        "verify-bounds", "Monte Carlo check of the concentration bounds; one CSV row per cell");
    std::vector<std::string> vb_kinds{"iid", "subsample"};
    std::vector<std::uint64_t> vb_n{10, 100, 1000};
    std::vector<std::uint64_t> vb_m;
    std::vector<double> vb_delta{0.01, 0.05, 0.1};
    std::uint64_t vb_trials = 20000, vb_seed = 42;
    std::string vb_svf = "mean", vb_arm = "uniform", vb_out;
    double vb_rho = 1.0, vb_alpha = 0.1, vb_p = 0.5;
    cmd_verify->add_option("--kind", vb_kinds, "Bound kinds to check: iid and/or subsample");
    cmd_verify->add_option("--n", vb_n, "Sample sizes");
    cmd_verify->add_option("--m", vb_m, "Subsample sizes, aligned with --n (default n/2)");
    cmd_verify->add_option("--delta", vb_delta, "Confidence levels");
    cmd_verify->add_option("--trials", vb_trials, "Monte Carlo trials per cell (>= 1000)");
    cmd_verify->add_option("--svf", vb_svf, "Value function: mean, mean_variance or cvar");
    cmd_verify->add_option("--rho", vb_rho, "rho for mean_variance");
    cmd_verify->add_option("--alpha", vb_alpha, "alpha for cvar");
    cmd_verify->add_option("--arm", vb_arm, "Sampled arm: uniform or bernoulli");
    cmd_verify->add_option("--p", vb_p, "Bernoulli success probability");
    cmd_verify->add_option("--seed", vb_seed, "Master seed");
    cmd_verify->add_option("--out", vb_out, "Write rows to this file instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        if (*cmd_run) {
            detail::run_and_export(load_config_file(config_path));
        } else if (*cmd_two) {
            if (!(two_r >= 0.0) || !(two_r < 0.5)) throw ConfigError("--r must lie in [0, 0.5)");
            ExperimentConfig config;
            config.environment.type = EnvironmentSpec::Type::two_arm;
            config.environment.r = two_r;
            config.value_function.kind = SafetyValueFunction::Kind::mean;
            config.horizon = two_T;
            config.replications = two_runs;
            config.seed = two_seed;
            config.output_dir = two_out;
            config.full_traces = two_full_traces;
            config.policies = {
                detail::make_policy(PolicyType::besa_plus, config.value_function, two_T),
                detail::make_policy(PolicyType::besa, config.value_function, two_T)};
            detail::run_and_export(config);
        } else if (*cmd_mix) {
            if (mix_alpha.has_value() == mix_rho.has_value()) {
                throw ConfigError("bench-mixture needs exactly one of --alpha or --rho");
            }
            ExperimentConfig config;
            config.environment.type = EnvironmentSpec::Type::mixture;
            config.environment.k = mix_k;
            config.horizon = mix_T;
            config.replications = mix_runs;
            config.seed = mix_seed;
            config.output_dir = mix_out;
            config.full_traces = mix_full_traces;
            if (mix_alpha) {
                config.value_function.kind = SafetyValueFunction::Kind::cvar;
                config.value_function.alpha = *mix_alpha;
                PolicySpec marab = detail::make_policy(PolicyType::marab, config.value_function, mix_T);
                marab.C = mix_C;
                config.policies = {
                    detail::make_policy(PolicyType::besa_plus, config.value_function, mix_T),
                    detail::make_policy(PolicyType::besa, config.value_function, mix_T), marab};
            } else {
                config.value_function.kind = SafetyValueFunction::Kind::mean_variance;
                config.value_function.rho = *mix_rho;
                config.policies = {
                    detail::make_policy(PolicyType::besa_plus, config.value_function, mix_T),
                    detail::make_policy(PolicyType::besa, config.value_function, mix_T),
                    detail::make_policy(PolicyType::mv_lcb, config.value_function, mix_T),
                    detail::make_policy(PolicyType::expexp, config.value_function, mix_T)};
            }
            detail::run_and_export(config);
        } else if (*cmd_clin) {
            ExperimentConfig config;
            config.environment.type = EnvironmentSpec::Type::csv;
            config.environment.csv_path = clin_csv;
            config.environment.value_column = clin_value_col;
            config.environment.group_column = clin_group_col;
            config.value_function.kind = SafetyValueFunction::Kind::mean_variance;
            config.value_function.rho = clin_rho;
            config.horizon = clin_T;
            config.replications = clin_runs;
            config.seed = clin_seed;
            config.output_dir = clin_out;
            config.full_traces = clin_full_traces;
            for (PolicyType type : {PolicyType::besa_plus, PolicyType::besa, PolicyType::ucb1,
                                    PolicyType::thompson, PolicyType::mv_lcb, PolicyType::expexp}) {
                config.policies.push_back(detail::make_policy(type, config.value_function, clin_T));
            }
            try {
                detail::run_and_export(config);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());  // unreadable/malformed csv is a config problem
            }
        } else if (*cmd_verify) {
            SafetyValueFunction svf = SafetyValueFunction::mean();
            if (vb_svf == "mean_variance") {
                svf = SafetyValueFunction::mean_variance(vb_rho);
            } else if (vb_svf == "cvar") {
                svf = SafetyValueFunction::cvar(vb_alpha);
            } else if (vb_svf != "mean") {
                throw ConfigError("--svf must be mean, mean_variance or cvar");
            }
            ArmDistribution arm = ArmDistribution::uniform(0.0, 1.0);
            if (vb_arm == "bernoulli") {
                arm = ArmDistribution::bernoulli(vb_p);
            } else if (vb_arm != "uniform") {
                throw ConfigError("--arm must be uniform or bernoulli");
            }
            if (!vb_m.empty() && vb_m.size() != vb_n.size()) {
                throw ConfigError("--m must list one value per --n");
            }
            std::ofstream file;
            if (!vb_out.empty()) {
                file.open(vb_out, std::ios::binary);
                if (!file) throw ConfigError("cannot write " + vb_out);
            }
            std::ostream& out = vb_out.empty() ? std::cout : file;
            out << "kind,n,m,delta,trials,violation_rate,threshold\n";
            std::uint64_t cell = 0;
            for (const auto& kind_name : vb_kinds) {
                BoundKind kind;
                if (kind_name == "iid") {
                    kind = BoundKind::iid;
                } else if (kind_name == "subsample") {
                    kind = BoundKind::subsample;
                } else {
                    throw ConfigError("--kind must be iid or subsample");
                }
                for (std::size_t i = 0; i < vb_n.size(); ++i) {
                    const std::size_t n = vb_n[i];
                    const std::size_t m = vb_m.empty() ? std::max<std::size_t>(n / 2, 1) : vb_m[i];
                    for (double delta : vb_delta) {
                        const RngStream rng = derive_run_rng(vb_seed, cell++);
                        const BoundCheck check =
                            verify_bound_monte_carlo(kind, svf, arm, n,
                                                     kind == BoundKind::subsample
                                                         ? std::optional<std::size_t>(m)
                                                         : std::nullopt,
                                                     delta, vb_trials, rng);
                        out << kind_name << ',' << n << ','
                            << (kind == BoundKind::subsample ? std::to_string(m) : std::string())
                            << ',' << detail::fmt_double(delta) << ',' << vb_trials << ','
                            << detail::fmt_double(check.violation_rate) << ','
                            << detail::fmt_double(check.threshold) << '\n';
                    }
                }
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace bandit
