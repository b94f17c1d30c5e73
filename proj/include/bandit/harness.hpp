#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "config.hpp"
#include "environments.hpp"
#include "policies.hpp"
#include "rng.hpp"
#include "safety_values.hpp"

namespace bandit {

/// True arm values under the experiment's value function, cached once per
/// environment. Optimal arms are those whose value ties the maximum exactly.
struct EnvironmentTruth {
    std::vector<TrueValue> values;
    double v_star = 0.0;
    std::vector<bool> optimal;

    static EnvironmentTruth compute(const Environment& env, const SafetyValueFunction& svf,
                                    std::uint64_t master_seed) {
        EnvironmentTruth truth;
        RngStream tv_rng = derive_run_rng(master_seed, kTrueValueStreamId);
        truth.values.reserve(env.size());
        for (std::size_t a = 0; a < env.size(); ++a) {
            RngStream arm_rng = tv_rng.substream(a);
            truth.values.push_back(true_value(env.arms[a], svf, arm_rng));
        }
        truth.v_star = -std::numeric_limits<double>::infinity();
        for (const auto& tv : truth.values) truth.v_star = std::max(truth.v_star, tv.value);
        for (const auto& tv : truth.values) truth.optimal.push_back(tv.value == truth.v_star);
        return truth;
    }
};

struct StepRecord {
    std::uint64_t t;
    ArmId arm;
    double reward;
    double inst_regret;
    double cum_regret;
};

/// Everything observed in one run: step records on the recording grid,
/// cumulative regret and optimal-play counts at every checkpoint, and final
/// per-arm pull counts.
struct RegretTrace {
    std::uint64_t run_id = 0;
    std::vector<StepRecord> records;
    std::vector<double> cp_cum_regret;
    std::vector<std::uint64_t> cp_optimal_plays;
    std::vector<std::uint64_t> final_counts;
    std::uint64_t optimal_plays = 0;
    double final_cum_regret = 0.0;
};

/// Steps at which aggregates are reported: every step up to 10^4, then a
/// geometric grid of at most 1000 points.
inline std::vector<std::uint64_t> make_checkpoints(std::uint64_t T) {
    std::vector<std::uint64_t> cps;
    if (T <= 10'000) {
        cps.reserve(T);
        for (std::uint64_t t = 1; t <= T; ++t) cps.push_back(t);
        return cps;
    }
    const double log_T = std::log(static_cast<double>(T));
    std::uint64_t prev = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto t = static_cast<std::uint64_t>(
            std::llround(std::exp(log_T * static_cast<double>(i) / 999.0)));
        const std::uint64_t clamped = std::clamp<std::uint64_t>(t, 1, T);
        if (clamped != prev) cps.push_back(clamped);
        prev = clamped;
    }
    if (cps.back() != T) cps.push_back(T);
    return cps;
}

/// One deterministic episode. The stream is derived from
/// (seed, policy_index << 32 | run_id), so replications and side-by-side
/// policies never share randomness.
inline RegretTrace run_episode(const Environment& env, const EnvironmentTruth& truth,
                               const SafetyValueFunction& svf, const PolicySpec& policy_spec,
                               std::uint64_t horizon, std::uint64_t master_seed,
                               std::uint64_t run_id, std::uint64_t policy_index,
                               const std::vector<std::uint64_t>& checkpoints,
                               bool record_all_steps) {
    RngStream rng = derive_run_rng(master_seed, (policy_index << 32) | run_id);
    Policy policy(policy_spec, svf, env.size());

    RegretTrace trace;
    trace.run_id = run_id;
    trace.cp_cum_regret.reserve(checkpoints.size());
    trace.cp_optimal_plays.reserve(checkpoints.size());

    double cum = 0.0;
    std::uint64_t optimal = 0;
    std::size_t next_cp = 0;
    for (std::uint64_t t = 1; t <= horizon; ++t) {
        const ArmId arm = policy.select(t, rng);
        const double reward = env.arms[arm].sample(rng);
        policy.observe(arm, reward, rng);

        const double inst = truth.v_star - truth.values[arm].value;
        cum += inst;
        if (truth.optimal[arm]) ++optimal;

        const bool at_cp = next_cp < checkpoints.size() && checkpoints[next_cp] == t;
        if (record_all_steps || at_cp) {
            trace.records.push_back({t, arm, reward, inst, cum});
        }
        if (at_cp) {
            trace.cp_cum_regret.push_back(cum);
            trace.cp_optimal_plays.push_back(optimal);
            ++next_cp;
        }
    }

    for (const auto& h : policy.histories()) trace.final_counts.push_back(h.count());
    trace.optimal_plays = optimal;
    trace.final_cum_regret = cum;
    return trace;
}

namespace detail {

inline unsigned worker_count(std::size_t jobs) {
    unsigned workers = std::thread::hardware_concurrency();
    if (workers == 0) workers = 1;
    if (const char* env = std::getenv("BANDIT_THREADS")) {
        char* end = nullptr;
        const unsigned long parsed = std::strtoul(env, &end, 10);
        if (end && *end == '\0' && parsed >= 1) {
            workers = static_cast<unsigned>(parsed);
        }
    }
    return static_cast<unsigned>(std::min<std::size_t>(workers, jobs));
}

/// Runs f(0..count-1), possibly on several threads. Results must be written
/// to preallocated slots; the outcome cannot depend on scheduling.
template <typename F>
void parallel_for(std::size_t count, F&& f) {
    const unsigned workers = worker_count(count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

inline double percentile(std::vector<double> sorted, double q) {
    const std::size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double pos = q * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= n) return sorted[n - 1];
    return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace detail

struct PolicyAggregate {
    PolicySpec spec;
    std::string name;  // unique within the experiment
    std::vector<double> mean_regret;
    std::vector<double> std_regret;
    std::vector<double> p10, p50, p90;
    std::vector<double> optimal_play_pct;
    std::vector<RegretTrace> traces;
};

struct AggregateResult {
    std::vector<std::uint64_t> checkpoints;
    std::vector<PolicyAggregate> policies;
    EnvironmentTruth truth;
    Environment environment;
};

/// Runs every policy for `replications` independent episodes and aggregates
/// cumulative regret and optimal-play percentage at each checkpoint.
/// Replications run concurrently (capped by BANDIT_THREADS); aggregation is
/// a fixed-order reduction, so results do not depend on the worker count.
inline AggregateResult run_experiment(const ExperimentConfig& config) {
    const Environment env = build_environment(config.environment, config.seed);
    const SafetyValueFunction svf = config.value_function.to_svf();
    const EnvironmentTruth truth = EnvironmentTruth::compute(env, svf, config.seed);
    const std::vector<std::uint64_t> checkpoints = make_checkpoints(config.horizon);

    AggregateResult result;
    result.checkpoints = checkpoints;
    result.truth = truth;
    result.environment = env;

    const std::uint64_t R = config.replications;
    for (std::size_t p = 0; p < config.policies.size(); ++p) {
        PolicyAggregate agg;
        agg.spec = config.policies[p];
        agg.name = agg.spec.name();
        agg.traces.resize(R);

        detail::parallel_for(R, [&](std::size_t run) {
            agg.traces[run] =
                run_episode(env, truth, svf, agg.spec, config.horizon, config.seed, run, p,
                            checkpoints, config.full_traces);
        });

        const std::size_t C = checkpoints.size();
        agg.mean_regret.resize(C);
        agg.std_regret.resize(C);
        agg.p10.resize(C);
        agg.p50.resize(C);
        agg.p90.resize(C);
        agg.optimal_play_pct.resize(C);
        std::vector<double> values(R);
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t run = 0; run < R; ++run) values[run] = agg.traces[run].cp_cum_regret[c];
            double mean = 0.0;
            for (double v : values) mean += v;
            mean /= static_cast<double>(R);
            double ss = 0.0;
            for (double v : values) ss += (v - mean) * (v - mean);
            agg.mean_regret[c] = mean;
            agg.std_regret[c] = R > 1 ? std::sqrt(ss / static_cast<double>(R - 1)) : 0.0;
            std::sort(values.begin(), values.end());
            agg.p10[c] = detail::percentile(values, 0.10);
            agg.p50[c] = detail::percentile(values, 0.50);
            agg.p90[c] = detail::percentile(values, 0.90);
            double pct = 0.0;
            for (std::size_t run = 0; run < R; ++run) {
                pct += 100.0 * static_cast<double>(agg.traces[run].cp_optimal_plays[c]) /
                       static_cast<double>(checkpoints[c]);
            }
            agg.optimal_play_pct[c] = pct / static_cast<double>(R);
        }

        result.policies.push_back(std::move(agg));
    }

    // Disambiguate repeated policy types in the output schema.
    for (std::size_t i = 0; i < result.policies.size(); ++i) {
        std::size_t seen = 0;
        for (std::size_t jj = 0; jj < i; ++jj) {
            if (result.policies[jj].spec.type == result.policies[i].spec.type) ++seen;
        }
        if (seen > 0) result.policies[i].name += "_" + std::to_string(seen + 1);
    }
    return result;
}

/// Writes summary.csv, per-run trace files and one plot-ready data file per
/// figure into `directory`. Output is byte-stable: re-exporting the same
/// result yields identical files.
inline void export_results(const AggregateResult& result, const std::string& directory) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(directory) / "traces", ec);
    if (ec) throw std::runtime_error("cannot create output directory: " + directory);

    auto open = [](const fs::path& path) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        return out;
    };

    {
        std::ofstream out = open(fs::path(directory) / "summary.csv");
        out << "policy,t,mean_regret,std_regret,p10,p50,p90,optimal_play_pct\n";
        for (const auto& pol : result.policies) {
            for (std::size_t c = 0; c < result.checkpoints.size(); ++c) {
                out << pol.name << ',' << result.checkpoints[c] << ','
                    << detail::fmt_double(pol.mean_regret[c]) << ','
                    << detail::fmt_double(pol.std_regret[c]) << ','
                    << detail::fmt_double(pol.p10[c]) << ',' << detail::fmt_double(pol.p50[c])
                    << ',' << detail::fmt_double(pol.p90[c]) << ','
                    << detail::fmt_double(pol.optimal_play_pct[c]) << '\n';
            }
        }
    }

    for (const auto& pol : result.policies) {
        for (const auto& trace : pol.traces) {
            std::ofstream out =
                open(fs::path(directory) / "traces" /
                     (pol.name + "_" + std::to_string(trace.run_id) + ".csv"));
            out << "t,arm,reward,cum_regret\n";
            for (const auto& rec : trace.records) {
                out << rec.t << ',' << rec.arm << ',' << detail::fmt_double(rec.reward) << ','
                    << detail::fmt_double(rec.cum_regret) << '\n';
            }
        }
    }

    auto write_plot = [&](const std::string& file, auto value_of) {
        std::ofstream out = open(fs::path(directory) / file);
        out << "t";
        for (const auto& pol : result.policies) out << ',' << pol.name;
        out << '\n';
        for (std::size_t c = 0; c < result.checkpoints.size(); ++c) {
            out << result.checkpoints[c];
            for (const auto& pol : result.policies) out << ',' << detail::fmt_double(value_of(pol, c));
            out << '\n';
        }
    };
    write_plot("plot_mean_regret.csv",
               [](const PolicyAggregate& pol, std::size_t c) { return pol.mean_regret[c]; });
    write_plot("plot_optimal_play.csv",
               [](const PolicyAggregate& pol, std::size_t c) { return pol.optimal_play_pct[c]; });
}

}  // namespace bandit
