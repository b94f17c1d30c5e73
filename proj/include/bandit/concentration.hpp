#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "environments.hpp"
#include "rng.hpp"
#include "safety_values.hpp"

namespace bandit {

/// Constants of the suboptimal-play analysis for a value gap and sensitivity
/// constant: omega = gap^2/(4 gamma^2), m = 16 gamma^2/gap^2 (so the play
/// threshold is u_t = m ln t), kappa = omega/m, and the geometric-series
/// constant C = e^omega / (1 - e^(-3 omega)).
struct BoundParams {
    double delta_gap;
    double gamma;
    std::uint64_t horizon;

    BoundParams(double delta_gap_, double gamma_, std::uint64_t horizon_ = 0)
        : delta_gap(delta_gap_), gamma(gamma_), horizon(horizon_) {
        if (!(delta_gap > 0.0)) throw std::invalid_argument("BoundParams: delta_gap must be > 0");
        if (!(gamma > 0.0)) throw std::invalid_argument("BoundParams: gamma must be > 0");
    }

    double omega() const { return delta_gap * delta_gap / (4.0 * gamma * gamma); }
    double m() const { return 16.0 * gamma * gamma / (delta_gap * delta_gap); }
    double kappa() const { return omega() / m(); }
    double big_c() const { return std::exp(omega()) / (1.0 - std::exp(-3.0 * omega())); }

    /// Analysis burn-in: max(ln(T)/kappa, exp(4 gamma^2 ln2 / gap^2), 3 u_T).
    double c_delta_gamma(std::uint64_t T) const {
        const double log_T = std::log(static_cast<double>(T));
        const double exponent = 4.0 * gamma * gamma * std::numbers::ln2 / (delta_gap * delta_gap);
        return std::max({log_T / kappa(), std::exp(exponent), 3.0 * m() * log_T});
    }
};

/// P[f - E f >= eps] for a bounded-difference function of n independent
/// variables with per-coordinate sensitivity c.
inline double mcdiarmid_tail(std::size_t n, double c, double eps) {
    if (n < 1) throw std::invalid_argument("mcdiarmid_tail: n must be >= 1");
    if (!(c > 0.0)) throw std::invalid_argument("mcdiarmid_tail: c must be > 0");
    if (eps < 0.0) throw std::invalid_argument("mcdiarmid_tail: eps must be >= 0");
    const double p = std::exp(-2.0 * eps * eps / (static_cast<double>(n) * c * c));
    return std::clamp(p, 0.0, 1.0);
}

/// Deviation eps such that the estimate drops below its center by eps with
/// probability at most delta: gamma * sqrt(ln(1/delta) / (2n)).
inline double mcdiarmid_deviation(std::size_t n, double gamma, double delta) {
    if (n < 1) throw std::invalid_argument("mcdiarmid_deviation: n must be >= 1");
    if (!(delta > 0.0) || !(delta < 1.0)) {
        throw std::invalid_argument("mcdiarmid_deviation: delta must be in (0,1)");
    }
    return gamma * std::sqrt(std::log(1.0 / delta) / (2.0 * static_cast<double>(n)));
}

/// Tail for an m-of-n subsample without replacement:
/// exp(-2 eps^2 / (min(m, n-m) c^2)). At m = n the subsample is the whole
/// multiset, so any permutation-invariant estimate cannot deviate at all.
inline double subsample_tail(std::size_t m, std::size_t n, double c, double eps) {
    if (m < 1 || m > n) throw std::invalid_argument("subsample_tail: need 1 <= m <= n");
    if (!(c > 0.0)) throw std::invalid_argument("subsample_tail: c must be > 0");
    if (eps < 0.0) throw std::invalid_argument("subsample_tail: eps must be >= 0");
    const std::size_t eff = std::min(m, n - m);
    if (eff == 0) return eps > 0.0 ? 0.0 : 1.0;
    const double p = std::exp(-2.0 * eps * eps / (static_cast<double>(eff) * c * c));
    return std::clamp(p, 0.0, 1.0);
}

/// Cap u_t = m ln t on suboptimal plays up to step t.
inline double suboptimal_play_threshold(const BoundParams& params, std::uint64_t t) {
    if (t < 2) throw std::invalid_argument("suboptimal_play_threshold: t must be >= 2");
    return params.m() * std::log(static_cast<double>(t));
}

/// Direct summation of beta(T, omega, C) = sum_t C e^(-kappa t / ln t)
/// (1 - e^(-t omega)) over t in [t_start, T].
inline double beta_series(const BoundParams& params, std::uint64_t t_start, std::uint64_t T) {
    if (t_start < 2 || t_start > T) {
        throw std::invalid_argument("beta_series: need 2 <= t_start <= T");
    }
    const double omega = params.omega();
    const double kappa = params.kappa();
    const double C = params.big_c();
    double sum = 0.0;
    for (std::uint64_t t = t_start; t <= T; ++t) {
        const double tf = static_cast<double>(t);
        sum += C * std::exp(-kappa * tf / std::log(tf)) * (1.0 - std::exp(-tf * omega));
    }
    return sum;
}

/// Composite regret-bound curve
///   gap * (sum 2/t + u_T + c + beta(c..T) + ln T)
/// evaluated on a horizon grid. The theoretical constants are huge at small
/// gaps; with `cap_to_trivial` the curve reports the trivial bound gap*T
/// whenever the burn-in constant c exceeds T, which keeps plot overlays
/// readable.
inline std::vector<double> regret_bound_curve(const BoundParams& params,
                                              std::span<const std::uint64_t> T_grid,
                                              bool cap_to_trivial = false) {
    for (std::uint64_t T : T_grid) {
        if (T < 3) throw std::invalid_argument("regret_bound_curve: grid points must be >= 3");
    }
    std::vector<double> out;
    out.reserve(T_grid.size());
    const double gap = params.delta_gap;
    for (std::uint64_t T : T_grid) {
        const double Tf = static_cast<double>(T);
        const double c = params.c_delta_gamma(T);
        if (cap_to_trivial && c >= Tf) {
            out.push_back(gap * Tf);
            continue;
        }
        double harmonic = 0.0;
        for (std::uint64_t t = 1; t <= T; ++t) harmonic += 2.0 / static_cast<double>(t);
        const double u_T = suboptimal_play_threshold(params, T);
        double beta = 0.0;
        if (std::isfinite(c)) {
            const auto start = static_cast<std::uint64_t>(
                std::clamp(std::ceil(c), 2.0, Tf + 1.0));
            if (start <= T) beta = beta_series(params, std::max<std::uint64_t>(start, 2), T);
        }
        out.push_back(gap * (harmonic + u_T + c + beta + std::log(Tf)));
    }
    return out;
}

enum class BoundKind { iid, subsample };

struct BoundCheck {
    double violation_rate = 0.0;
    double threshold = 0.0;  // delta + 3 * sqrt(delta (1-delta) / trials)
    bool ok() const { return violation_rate <= threshold; }
};

/// Monte Carlo check of the two deviation bounds. The iid kind counts how
/// often an n-sample estimate falls below the true value by the McDiarmid
/// deviation at level delta; the subsample kind counts how often an m-of-n
/// subsample estimate falls below the full-sample estimate by the
/// without-replacement deviation. Trials are processed in shards of 1000
/// with derived streams, so the result does not depend on how work is
/// scheduled.
inline BoundCheck verify_bound_monte_carlo(BoundKind kind, const SafetyValueFunction& svf,
                                           const ArmDistribution& arm, std::size_t n,
                                           std::optional<std::size_t> m, double delta,
                                           std::size_t trials, const RngStream& rng) {
    if (trials < 1000) throw std::invalid_argument("verify_bound_monte_carlo: need trials >= 1000");
    if (!(delta > 0.0) || !(delta < 1.0)) {
        throw std::invalid_argument("verify_bound_monte_carlo: delta must be in (0,1)");
    }
    const std::size_t sub = kind == BoundKind::subsample ? m.value_or(n / 2) : n;
    if (kind == BoundKind::subsample && (sub < 1 || sub > n)) {
        throw std::invalid_argument("verify_bound_monte_carlo: need 1 <= m <= n");
    }

    BoundCheck check;
    check.threshold = delta + 3.0 * std::sqrt(delta * (1.0 - delta) / static_cast<double>(trials));
    if (kind == BoundKind::subsample && sub == n) {
        // The m = n subsample is the whole multiset, so a permutation-invariant
        // estimate cannot deviate from the full-sample one at all.
        return check;
    }

    const double gamma = svf.gamma();
    double true_v = 0.0;
    if (kind == BoundKind::iid) {
        RngStream tv_rng = rng.substream(0xFFFFFFFFull);
        true_v = true_value(arm, svf, tv_rng).value;
    }
    const double iid_eps = mcdiarmid_deviation(n, gamma, delta);
    const double eff = static_cast<double>(std::min(sub, n - sub));
    const double sub_eps =
        gamma * std::sqrt(eff * std::log(1.0 / delta) / (2.0 * static_cast<double>(sub) * static_cast<double>(sub)));

    constexpr std::size_t kShard = 1000;
    std::size_t violations = 0;
    std::vector<double> draws(n);
    for (std::size_t shard = 0, done = 0; done < trials; ++shard) {
        RngStream sr = rng.substream(shard);
        const std::size_t todo = std::min(kShard, trials - done);
        for (std::size_t i = 0; i < todo; ++i) {
            for (double& d : draws) d = arm.sample(sr);
            if (kind == BoundKind::iid) {
                if (svf.estimate(draws) <= true_v - iid_eps) ++violations;
            } else {
                const double full = svf.estimate(draws);
                const auto subsampled = subsample_without_replacement(draws, sub, sr);
                if (svf.estimate(subsampled) <= full - sub_eps) ++violations;
            }
        }
        done += todo;
    }

    check.violation_rate = static_cast<double>(violations) / static_cast<double>(trials);
    return check;
}

}  // namespace bandit
