#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "rng.hpp"
#include "safety_values.hpp"

namespace bandit {

/// Raised when a reward cannot be produced (e.g. rejection sampling from a
/// mixture component that has essentially no mass inside [0,1]).
struct SamplingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GaussianComponent {
    double weight;
    double mean;
    double stddev;
};

/// Generative model of one arm's reward in [0,1].
class ArmDistribution {
public:
    struct Deterministic {
        double value;
    };
    struct Uniform {
        double lo, hi;
    };
    struct Bernoulli {
        double p;
    };
    /// Mixture of Gaussians conditioned on [0,1] (rejection sampling, not
    /// clipping; clipping would put atoms on the boundary).
    struct TruncatedGaussianMixture {
        std::vector<GaussianComponent> components;
    };
    /// Uniform resampling with replacement from a recorded list.
    struct Empirical {
        std::vector<double> samples;
    };

    static ArmDistribution deterministic(double value) {
        require(value >= 0.0 && value <= 1.0, "deterministic reward must lie in [0,1]");
        return ArmDistribution(Deterministic{value});
    }

    static ArmDistribution uniform(double lo, double hi) {
        require(lo >= 0.0 && hi <= 1.0 && lo <= hi, "uniform support must satisfy 0 <= lo <= hi <= 1");
        return ArmDistribution(Uniform{lo, hi});
    }

    static ArmDistribution bernoulli(double p) {
        require(p >= 0.0 && p <= 1.0, "bernoulli p must lie in [0,1]");
        return ArmDistribution(Bernoulli{p});
    }

    static ArmDistribution truncated_gaussian_mixture(std::vector<GaussianComponent> components) {
        require(!components.empty(), "mixture needs at least one component");
        double total = 0.0;
        for (const auto& c : components) {
            require(c.weight >= 0.0, "mixture weights must be nonnegative");
            require(c.stddev >= 0.0, "mixture stddevs must be nonnegative");
            total += c.weight;
        }
        require(std::abs(total - 1.0) <= 1e-12, "mixture weights must sum to 1");
        return ArmDistribution(TruncatedGaussianMixture{std::move(components)});
    }

    static ArmDistribution empirical(std::vector<double> samples) {
        require(!samples.empty(), "empirical arm needs at least one sample");
        for (double x : samples) require(x >= 0.0 && x <= 1.0, "empirical samples must lie in [0,1]");
        return ArmDistribution(Empirical{std::move(samples)});
    }

    /// One reward draw. Guaranteed in [0,1].
    double sample(RngStream& rng) const {
        return std::visit(
            [&rng](const auto& d) -> double { return sample_impl(d, rng); }, dist_);
    }

    template <typename T>
    const T* get_if() const {
        return std::get_if<T>(&dist_);
    }

    std::string describe() const {
        return std::visit([](const auto& d) { return describe_impl(d); }, dist_);
    }

    static constexpr std::size_t kRejectionCap = 1'000'000;

private:
    using Variant =
        std::variant<Deterministic, Uniform, Bernoulli, TruncatedGaussianMixture, Empirical>;

    explicit ArmDistribution(Variant dist) : dist_(std::move(dist)) {}

    static void require(bool ok, const char* msg) {
        if (!ok) throw std::invalid_argument(msg);
    }

    static double sample_impl(const Deterministic& d, RngStream&) { return d.value; }
    static double sample_impl(const Uniform& d, RngStream& rng) {
        return rng.uniform_real(d.lo, d.hi);
    }
    static double sample_impl(const Bernoulli& d, RngStream& rng) {
        return rng.bernoulli(d.p) ? 1.0 : 0.0;
    }
    static double sample_impl(const TruncatedGaussianMixture& d, RngStream& rng) {
        const double u = rng.uniform01();
        double acc = 0.0;
        const GaussianComponent* chosen = &d.components.back();
        for (const auto& c : d.components) {
            acc += c.weight;
            if (u < acc) {
                chosen = &c;
                break;
            }
        }
        for (std::size_t attempt = 0; attempt < kRejectionCap; ++attempt) {
            const double x = rng.normal(chosen->mean, chosen->stddev);
            if (x >= 0.0 && x <= 1.0) return x;
        }
        throw SamplingError("truncated mixture rejection sampling exceeded attempt cap; component (mean=" +
                            std::to_string(chosen->mean) + ", stddev=" + std::to_string(chosen->stddev) +
                            ") has essentially no mass in [0,1]");
    }
    static double sample_impl(const Empirical& d, RngStream& rng) {
        return d.samples[static_cast<std::size_t>(rng.uniform_below(d.samples.size()))];
    }

    static std::string describe_impl(const Deterministic& d) {
        return "deterministic(" + std::to_string(d.value) + ")";
    }
    static std::string describe_impl(const Uniform& d) {
        return "uniform(" + std::to_string(d.lo) + "," + std::to_string(d.hi) + ")";
    }
    static std::string describe_impl(const Bernoulli& d) {
        return "bernoulli(" + std::to_string(d.p) + ")";
    }
    static std::string describe_impl(const TruncatedGaussianMixture& d) {
        return "truncated_gaussian_mixture(" + std::to_string(d.components.size()) + " components)";
    }
    static std::string describe_impl(const Empirical& d) {
        return "empirical(" + std::to_string(d.samples.size()) + " samples)";
    }

    Variant dist_;
};

struct Environment {
    std::vector<ArmDistribution> arms;
    std::vector<std::string> labels;  // optional; empty or one per arm

    std::size_t size() const { return arms.size(); }
};

/// Deterministic(r) versus Uniform(0,1); the uniform arm is optimal under
/// the mean with gap 0.5 - r.
inline Environment make_two_arm_benchmark(double r) {
    if (!(r >= 0.0) || !(r < 0.5)) {
        throw std::invalid_argument("two-arm benchmark requires r in [0, 0.5)");
    }
    Environment env;
    env.arms.push_back(ArmDistribution::deterministic(r));
    env.arms.push_back(ArmDistribution::uniform(0.0, 1.0));
    env.labels = {"deterministic", "uniform"};
    return env;
}

/// k arms, each a 4-component equal-weight truncated Gaussian mixture with
/// component means ~ U[0,1] and stddevs ~ U[0.5,1]. Draw order per arm:
/// (mean, stddev) for each component in turn.
inline Environment make_mixture_benchmark(std::size_t k, RngStream& rng) {
    if (k < 2) throw std::invalid_argument("mixture benchmark requires k >= 2");
    Environment env;
    env.arms.reserve(k);
    for (std::size_t a = 0; a < k; ++a) {
        std::vector<GaussianComponent> comps;
        comps.reserve(4);
        for (int c = 0; c < 4; ++c) {
            const double mean = rng.uniform01();
            const double stddev = rng.uniform_real(0.5, 1.0);
            comps.push_back({0.25, mean, stddev});
        }
        env.arms.push_back(ArmDistribution::truncated_gaussian_mixture(std::move(comps)));
        env.labels.push_back("arm" + std::to_string(a));
    }
    return env;
}

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    std::string out = s.substr(b, e - b);
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"') {
        out = out.substr(1, out.size() - 2);
    }
    return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (char ch : line) {
        if (ch == '"') {
            quoted = !quoted;
            field.push_back(ch);
        } else if (ch == ',' && !quoted) {
            fields.push_back(trim(field));
            field.clear();
        } else if (ch != '\r') {
            field.push_back(ch);
        }
    }
    fields.push_back(trim(field));
    return fields;
}

inline bool parse_double(const std::string& s, double& out) {
    const char* b = s.data();
    const char* e = s.data() + s.size();
    const auto res = std::from_chars(b, e, out);
    return res.ec == std::errc() && res.ptr == e;
}

}  // namespace detail

/// Loads a grouped numeric column from a CSV file (header row required) and
/// builds one empirical arm per group. Raw values are bucketed into ten
/// equal-width bins over the pooled min-max range; bin i in {1..10} maps to
/// the reward (i - 0.5)/10. A zero-width range puts everything in bin 1.
/// Arms are ordered by first appearance of each group.
inline Environment load_empirical_csv(const std::string& path, const std::string& value_column,
                                      const std::string& group_column) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open csv file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("csv file is empty: " + path);
    const auto header = detail::split_csv_line(line);
    std::size_t value_idx = header.size(), group_idx = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == value_column) value_idx = i;
        if (header[i] == group_column) group_idx = i;
    }
    if (value_idx == header.size()) {
        throw std::invalid_argument("csv missing value column '" + value_column + "'");
    }
    if (group_idx == header.size()) {
        throw std::invalid_argument("csv missing group column '" + group_column + "'");
    }

    std::vector<std::string> group_order;
    std::map<std::string, std::vector<double>> by_group;
    std::vector<std::size_t> bad_rows;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv_line(line);
        double value = 0.0;
        if (fields.size() <= std::max(value_idx, group_idx) ||
            !detail::parse_double(fields[value_idx], value)) {
            bad_rows.push_back(row);
            continue;
        }
        const std::string& group = fields[group_idx];
        if (by_group.find(group) == by_group.end()) group_order.push_back(group);
        by_group[group].push_back(value);
    }
    if (!bad_rows.empty()) {
        std::ostringstream msg;
        msg << "csv has unparseable rows:";
        for (std::size_t r : bad_rows) msg << ' ' << r;
        throw std::invalid_argument(msg.str());
    }
    if (group_order.size() < 2) throw std::invalid_argument("csv has fewer than 2 groups");

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& [_, values] : by_group) {
        for (double v : values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    const double width = (hi - lo) / 10.0;

    Environment env;
    for (const auto& name : group_order) {
        std::vector<double> rewards;
        rewards.reserve(by_group[name].size());
        for (double v : by_group[name]) {
            std::size_t bucket = 1;
            if (width > 0.0) {
                bucket = std::min<std::size_t>(
                    10, static_cast<std::size_t>(std::floor((v - lo) / width)) + 1);
            }
            rewards.push_back((static_cast<double>(bucket) - 0.5) / 10.0);
        }
        env.arms.push_back(ArmDistribution::empirical(std::move(rewards)));
        env.labels.push_back(name);
    }
    return env;
}

enum class ValueMethod { analytic, monte_carlo };

struct TrueValue {
    double value = 0.0;
    ValueMethod method = ValueMethod::analytic;
    double ci_halfwidth = 0.0;
};

/// Monte Carlo value of `svf` on `arm`: the estimator applied to all
/// `samples` draws, with a 95% normal-approximation CI half-width from 100
/// equal batches.
inline TrueValue true_value_monte_carlo(const ArmDistribution& arm, const SafetyValueFunction& svf,
                                        RngStream& rng, std::size_t samples = 1'000'000) {
    constexpr std::size_t kBatches = 100;
    const std::size_t per_batch = std::max<std::size_t>(samples / kBatches, 2);
    std::vector<double> draws(per_batch * kBatches);
    for (double& d : draws) d = arm.sample(rng);

    std::vector<double> batch_values(kBatches);
    for (std::size_t b = 0; b < kBatches; ++b) {
        batch_values[b] = svf.estimate(
            std::span<const double>(draws.data() + b * per_batch, per_batch));
    }
    double bm = 0.0;
    for (double v : batch_values) bm += v;
    bm /= static_cast<double>(kBatches);
    double ss = 0.0;
    for (double v : batch_values) ss += (v - bm) * (v - bm);
    const double se = std::sqrt(ss / (kBatches - 1)) / std::sqrt(static_cast<double>(kBatches));

    return TrueValue{svf.estimate(draws), ValueMethod::monte_carlo, 1.96 * se};
}

namespace detail {

inline bool analytic_true_value(const ArmDistribution& arm, const SafetyValueFunction& svf,
                                double& out) {
    using Kind = SafetyValueFunction::Kind;
    if (const auto* d = arm.get_if<ArmDistribution::Deterministic>()) {
        out = d->value;  // point mass: every functional evaluates to the point
        return true;
    }
    if (const auto* e = arm.get_if<ArmDistribution::Empirical>()) {
        // True value of the uniform-over-list distribution. For CVaR this is
        // the order-statistic estimator on the full list, which makes regret
        // accounting on recorded data exact.
        const auto& xs = e->samples;
        const std::size_t n = xs.size();
        double mu = 0.0;
        for (double x : xs) mu += x;
        mu /= static_cast<double>(n);
        switch (svf.kind()) {
            case Kind::mean: out = mu; return true;
            case Kind::mean_variance: {
                double ss = 0.0;
                for (double x : xs) ss += (x - mu) * (x - mu);
                out = mu - svf.rho() * ss / static_cast<double>(n);
                return true;
            }
            case Kind::cvar: out = SafetyValueFunction::cvar(svf.alpha()).estimate(xs); return true;
        }
    }
    if (const auto* u = arm.get_if<ArmDistribution::Uniform>()) {
        const double mid = (u->lo + u->hi) / 2.0;
        const double var = (u->hi - u->lo) * (u->hi - u->lo) / 12.0;
        switch (svf.kind()) {
            case Kind::mean: out = mid; return true;
            case Kind::mean_variance: out = mid - svf.rho() * var; return true;
            case Kind::cvar: return false;
        }
    }
    if (const auto* b = arm.get_if<ArmDistribution::Bernoulli>()) {
        switch (svf.kind()) {
            case Kind::mean: out = b->p; return true;
            case Kind::mean_variance: out = b->p - svf.rho() * b->p * (1.0 - b->p); return true;
            case Kind::cvar: return false;
        }
    }
    return false;
}

}  // namespace detail

/// True value of `svf` on `arm` for regret accounting: closed form where one
/// exists, otherwise Monte Carlo at 10^6 samples. `rng` is only touched on
/// the Monte Carlo path.
inline TrueValue true_value(const ArmDistribution& arm, const SafetyValueFunction& svf,
                            RngStream& rng) {
    double v = 0.0;
    if (detail::analytic_true_value(arm, svf, v)) {
        return TrueValue{v, ValueMethod::analytic, 0.0};
    }
    return true_value_monte_carlo(arm, svf, rng);
}

}  // namespace bandit
