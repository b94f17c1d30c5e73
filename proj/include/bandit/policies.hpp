#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rng.hpp"
#include "safety_values.hpp"

namespace bandit {

using ArmId = std::size_t;

/// Append-only record of one arm's observed rewards.
class ArmHistory {
public:
    void append(double reward) {
        if (!(reward >= 0.0) || reward > 1.0) {
            throw std::invalid_argument("reward outside [0,1]");
        }
        rewards_.push_back(reward);
    }

    std::size_t count() const { return rewards_.size(); }
    bool empty() const { return rewards_.empty(); }
    std::span<const double> rewards() const { return rewards_; }

private:
    std::vector<double> rewards_;
};

namespace detail {

/// Subsampled comparison shared by the BESA-style duels: equal-size fresh
/// subsamples, argmax of the estimates, ties to the arm with fewer total
/// tries, residual ties to a fair coin.
inline ArmId subsampled_duel(ArmId a, ArmId b, const std::vector<ArmHistory>& histories,
                             const SafetyValueFunction& svf, RngStream& rng) {
    const std::size_t n = std::min(histories[a].count(), histories[b].count());
    const std::vector<double> sub_a = subsample_without_replacement(histories[a].rewards(), n, rng);
    const std::vector<double> sub_b = subsample_without_replacement(histories[b].rewards(), n, rng);
    assert(sub_a.size() == sub_b.size());
    const double va = svf.estimate(sub_a);
    const double vb = svf.estimate(sub_b);
    if (va > vb) return a;
    if (vb > va) return b;
    if (histories[a].count() < histories[b].count()) return a;
    if (histories[b].count() < histories[a].count()) return b;
    return rng.uniform01() < 0.5 ? a : b;
}

}  // namespace detail

/// One BESA+ step for two arms. Arms with no samples or fewer than ln(t)
/// samples are forced, checking a before b; otherwise both histories are
/// subsampled down to the smaller count and the higher estimate wins.
inline ArmId besa_plus_duel(ArmId a, ArmId b, const std::vector<ArmHistory>& histories,
                            std::uint64_t t, const SafetyValueFunction& svf, RngStream& rng) {
    if (t < 1) throw std::invalid_argument("besa_plus_duel: t must be >= 1");
    const double log_t = std::log(static_cast<double>(t));
    if (histories[a].empty() || static_cast<double>(histories[a].count()) < log_t) return a;
    if (histories[b].empty() || static_cast<double>(histories[b].count()) < log_t) return b;
    return detail::subsampled_duel(a, b, histories, svf, rng);
}

/// Original BESA without the forced-exploration guard. Both arms must have
/// been pulled at least once (the runner initializes every arm).
inline ArmId besa_duel(ArmId a, ArmId b, const std::vector<ArmHistory>& histories,
                       const SafetyValueFunction& svf, RngStream& rng) {
    if (histories[a].empty() || histories[b].empty()) {
        throw std::logic_error("besa_duel called with an empty history; arms must be initialized");
    }
    return detail::subsampled_duel(a, b, histories, svf, rng);
}

enum class DuelKind { besa_plus, besa };

struct TournamentStats {
    std::size_t rounds = 0;
    std::size_t duels = 0;
    std::size_t first_round_byes = 0;
};

/// Single-elimination bracket over `arms`: uniformly shuffled seeding, an odd
/// arm gets a bye, winners advance. ceil(log2(k)) rounds, at most k-1 duels.
inline ArmId tournament_select(std::span<const ArmId> arms, const std::vector<ArmHistory>& histories,
                               std::uint64_t t, const SafetyValueFunction& svf, RngStream& rng,
                               DuelKind duel, TournamentStats* stats = nullptr) {
    if (arms.empty()) throw std::invalid_argument("tournament_select: need at least one arm");
    std::vector<ArmId> bracket(arms.begin(), arms.end());
    shuffle(bracket, rng);

    TournamentStats local;
    while (bracket.size() > 1) {
        ++local.rounds;
        std::vector<ArmId> winners;
        winners.reserve((bracket.size() + 1) / 2);
        for (std::size_t i = 0; i + 1 < bracket.size(); i += 2) {
            ++local.duels;
            winners.push_back(duel == DuelKind::besa_plus
                                  ? besa_plus_duel(bracket[i], bracket[i + 1], histories, t, svf, rng)
                                  : besa_duel(bracket[i], bracket[i + 1], histories, svf, rng));
        }
        if (bracket.size() % 2 == 1) {
            winners.push_back(bracket.back());
            if (local.rounds == 1) ++local.first_round_byes;
        }
        bracket = std::move(winners);
    }
    if (stats) *stats = local;
    return bracket.front();
}

enum class PolicyType { besa_plus, besa, ucb1, thompson, mv_lcb, expexp, marab };

/// Per-policy parameters. Fields are read by the variants that use them:
/// rho (mv_lcb, expexp), lcb_scale (mv_lcb; 0 means the default 5 + rho),
/// alpha and C (marab), tau (expexp; 0 means (T/14)^(2/3) once the horizon
/// is known).
struct PolicySpec {
    PolicyType type = PolicyType::besa_plus;
    double rho = 1.0;
    double alpha = 0.1;
    double C = 1.0;
    double lcb_scale = 0.0;
    std::uint64_t tau = 0;

    std::string name() const {
        switch (type) {
            case PolicyType::besa_plus: return "besa_plus";
            case PolicyType::besa: return "besa";
            case PolicyType::ucb1: return "ucb1";
            case PolicyType::thompson: return "thompson";
            case PolicyType::mv_lcb: return "mv_lcb";
            case PolicyType::expexp: return "expexp";
            case PolicyType::marab: return "marab";
        }
        return "?";
    }
};

/// Thompson pseudo-counts; every observed reward x triggers one
/// Bernoulli(x) draw that increments successes or failures.
struct ThompsonState {
    std::vector<std::uint64_t> successes;
    std::vector<std::uint64_t> failures;

    explicit ThompsonState(std::size_t k = 0) : successes(k, 0), failures(k, 0) {}
};

namespace detail {

inline double history_mean(const ArmHistory& h) {
    double s = 0.0;
    for (double x : h.rewards()) s += x;
    return s / static_cast<double>(h.count());
}

inline double history_variance_biased(const ArmHistory& h) {
    const double mu = history_mean(h);
    double ss = 0.0;
    for (double x : h.rewards()) ss += (x - mu) * (x - mu);
    return ss / static_cast<double>(h.count());
}

inline ArmId first_unplayed(const std::vector<ArmHistory>& histories) {
    for (ArmId a = 0; a < histories.size(); ++a) {
        if (histories[a].empty()) return a;
    }
    return histories.size();
}

}  // namespace detail

/// Baseline selection rules. Every variant plays each arm once before its
/// index formula applies. Thompson needs its pseudo-count state; the others
/// work from the histories alone.
inline ArmId baseline_select(const PolicySpec& spec, const std::vector<ArmHistory>& histories,
                             std::uint64_t t, RngStream& rng,
                             const ThompsonState* thompson = nullptr) {
    const std::size_t k = histories.size();
    const double tf = static_cast<double>(t);

    if (spec.type == PolicyType::expexp) {
        const std::uint64_t tau = spec.tau == 0 ? 1000 : spec.tau;
        if (t <= tau) return static_cast<ArmId>(rng.uniform_below(k));
        if (const ArmId u = detail::first_unplayed(histories); u < k) return u;
        ArmId best = 0;
        double best_score = std::numeric_limits<double>::infinity();
        for (ArmId a = 0; a < k; ++a) {
            const double score =
                detail::history_variance_biased(histories[a]) - spec.rho * detail::history_mean(histories[a]);
            if (score < best_score) {
                best_score = score;
                best = a;
            }
        }
        return best;
    }

    if (const ArmId u = detail::first_unplayed(histories); u < k) return u;

    switch (spec.type) {
        case PolicyType::ucb1: {
            ArmId best = 0;
            double best_score = -std::numeric_limits<double>::infinity();
            for (ArmId a = 0; a < k; ++a) {
                const double n = static_cast<double>(histories[a].count());
                const double score = detail::history_mean(histories[a]) + std::sqrt(2.0 * std::log(tf) / n);
                if (score > best_score) {
                    best_score = score;
                    best = a;
                }
            }
            return best;
        }
        case PolicyType::thompson: {
            if (!thompson) throw std::logic_error("thompson policy needs its state");
            ArmId best = 0;
            double best_score = -1.0;
            for (ArmId a = 0; a < k; ++a) {
                const double draw = rng.beta(1.0 + static_cast<double>(thompson->successes[a]),
                                             1.0 + static_cast<double>(thompson->failures[a]));
                if (draw > best_score) {
                    best_score = draw;
                    best = a;
                }
            }
            return best;
        }
        case PolicyType::mv_lcb: {
            // Minimizes the variance-first measure sigma^2 - rho*mu minus a
            // confidence width, with delta_t = 1/t^2.
            const double scale = spec.lcb_scale > 0.0 ? spec.lcb_scale : 5.0 + spec.rho;
            const double log_inv_delta = 2.0 * std::log(tf);
            ArmId best = 0;
            double best_score = std::numeric_limits<double>::infinity();
            for (ArmId a = 0; a < k; ++a) {
                const double n = static_cast<double>(histories[a].count());
                const double mv = detail::history_variance_biased(histories[a]) -
                                  spec.rho * detail::history_mean(histories[a]);
                const double score = mv - scale * std::sqrt(std::max(log_inv_delta, 0.0) / (2.0 * n));
                if (score < best_score) {
                    best_score = score;
                    best = a;
                }
            }
            return best;
        }
        case PolicyType::marab: {
            const SafetyValueFunction cvar = SafetyValueFunction::cvar(spec.alpha);
            ArmId best = 0;
            double best_score = -std::numeric_limits<double>::infinity();
            for (ArmId a = 0; a < k; ++a) {
                const double n = static_cast<double>(histories[a].count());
                const double score =
                    cvar.estimate(histories[a].rewards()) + spec.C * std::sqrt(std::log(tf) / n);
                if (score > best_score) {
                    best_score = score;
                    best = a;
                }
            }
            return best;
        }
        default:
            throw std::logic_error("baseline_select called with a BESA-family policy");
    }
}

/// Appends a reward to the chosen arm's history.
inline void update(std::vector<ArmHistory>& histories, ArmId arm, double reward) {
    histories.at(arm).append(reward);
}

/// Stateful action-selection rule driving one run: owns the histories and
/// any variant state, selects with `select`, learns with `observe`.
class Policy {
public:
    Policy(PolicySpec spec, SafetyValueFunction svf, std::size_t num_arms)
        : spec_(std::move(spec)), svf_(std::move(svf)), histories_(num_arms), thompson_(num_arms) {
        if (num_arms < 1) throw std::invalid_argument("policy needs at least one arm");
        for (ArmId a = 0; a < num_arms; ++a) arm_ids_.push_back(a);
    }

    ArmId select(std::uint64_t t, RngStream& rng) {
        const std::size_t k = histories_.size();
        if (k == 1) return 0;
        switch (spec_.type) {
            case PolicyType::besa_plus: {
                if (k == 2) return besa_plus_duel(0, 1, histories_, t, svf_, rng);
                // Forced exploration extends the two-arm guard: top up the
                // least-pulled arm that is still under ln(t) before running
                // the bracket.
                const double log_t = std::log(static_cast<double>(t));
                ArmId forced = k;
                std::size_t forced_count = std::numeric_limits<std::size_t>::max();
                for (ArmId a = 0; a < k; ++a) {
                    const std::size_t n = histories_[a].count();
                    if ((n == 0 || static_cast<double>(n) < log_t) && n < forced_count) {
                        forced = a;
                        forced_count = n;
                    }
                }
                if (forced < k) return forced;
                return tournament_select(arm_ids_, histories_, t, svf_, rng, DuelKind::besa_plus);
            }
            case PolicyType::besa: {
                if (const ArmId u = detail::first_unplayed(histories_); u < k) return u;
                if (k == 2) return besa_duel(0, 1, histories_, svf_, rng);
                return tournament_select(arm_ids_, histories_, t, svf_, rng, DuelKind::besa);
            }
            default:
                return baseline_select(spec_, histories_, t, rng, &thompson_);
        }
    }

    void observe(ArmId arm, double reward, RngStream& rng) {
        update(histories_, arm, reward);
        if (spec_.type == PolicyType::thompson) {
            if (rng.bernoulli(reward)) {
                ++thompson_.successes[arm];
            } else {
                ++thompson_.failures[arm];
            }
        }
    }

    const std::vector<ArmHistory>& histories() const { return histories_; }
    const PolicySpec& spec() const { return spec_; }

private:
    PolicySpec spec_;
    SafetyValueFunction svf_;
    std::vector<ArmHistory> histories_;
    ThompsonState thompson_;
    std::vector<ArmId> arm_ids_;
};

}  // namespace bandit
