#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <bandit/concentration.hpp>
#include <bandit/environments.hpp>
#include <bandit/rng.hpp>
#include <bandit/safety_values.hpp>

using namespace bandit;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("mcdiarmid tail arithmetic") {
    CHECK_THAT(mcdiarmid_tail(100, 0.01, 0.1), WithinAbs(std::exp(-2.0), 1e-12));
    CHECK(mcdiarmid_tail(100, 0.01, 0.0) == 1.0);
    CHECK_THAT(mcdiarmid_tail(1, 1.0, 1.0), WithinAbs(std::exp(-2.0), 1e-12));
    CHECK_THROWS_AS(mcdiarmid_tail(0, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(mcdiarmid_tail(1, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("mcdiarmid deviation and the tail round-trip") {
    CHECK_THAT(mcdiarmid_deviation(50, 1.0, 0.05), WithinAbs(0.17310, 2e-4));
    CHECK(mcdiarmid_deviation(50, 1.0, 0.9999999) < 1e-3);
    for (std::size_t n : {1, 10, 100}) {
        for (double gamma : {1.0, 1.5, 10.0}) {
            for (double delta : {0.01, 0.1, 0.5}) {
                const double eps = mcdiarmid_deviation(n, gamma, delta);
                CHECK_THAT(mcdiarmid_tail(n, gamma / static_cast<double>(n), eps),
                           WithinAbs(delta, 1e-12));
            }
        }
    }
}

TEST_CASE("subsample tail arithmetic") {
    CHECK(subsample_tail(10, 10, 0.1, 0.1) == 0.0);
    CHECK(subsample_tail(10, 10, 0.1, 0.0) == 1.0);
    CHECK_THAT(subsample_tail(5, 100, 0.2, 0.2), WithinAbs(std::exp(-0.4), 1e-12));
    // smaller min(m, n-m) means a smaller tail at equal eps
    CHECK(subsample_tail(50, 60, 0.1, 0.2) < subsample_tail(50, 100, 0.1, 0.2));
    CHECK_THROWS_AS(subsample_tail(0, 10, 0.1, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(subsample_tail(11, 10, 0.1, 0.1), std::invalid_argument);
}

TEST_CASE("bound params derive the analysis constants") {
    const BoundParams p(0.5, 1.0);
    CHECK_THAT(p.omega(), WithinAbs(0.0625, 1e-15));
    CHECK_THAT(p.m(), WithinAbs(64.0, 1e-12));
    CHECK_THAT(p.kappa(), WithinAbs(0.0009765625, 1e-15));
    CHECK_THAT(p.big_c(), WithinAbs(std::exp(0.0625) / (1.0 - std::exp(-0.1875)), 1e-12));

    const BoundParams q(0.1, 1.5);
    CHECK_THAT(q.m(), WithinAbs(3600.0, 1e-9));

    for (double gap : {0.05, 0.3, 1.0}) {
        for (double gamma : {1.0, 2.0, 10.0}) {
            const BoundParams bp(gap, gamma);
            CHECK(bp.omega() > 0.0);
            CHECK(bp.m() > 0.0);
            CHECK(bp.kappa() > 0.0);
            CHECK(std::isfinite(bp.big_c()));
            CHECK(bp.big_c() > 0.0);
        }
    }
    CHECK_THROWS_AS(BoundParams(0.0, 1.0), std::invalid_argument);
}

TEST_CASE("suboptimal play threshold is m log t and grows") {
    const BoundParams p(0.5, 1.0);
    CHECK_THAT(suboptimal_play_threshold(p, 10), WithinAbs(64.0 * std::log(10.0), 1e-9));
    const BoundParams q(0.1, 1.5);
    CHECK_THAT(suboptimal_play_threshold(q, 10), WithinAbs(3600.0 * std::log(10.0), 1e-6));
    double prev = 0.0;
    for (std::uint64_t t = 2; t < 2000; t += 97) {
        const double u = suboptimal_play_threshold(p, t);
        CHECK(u >= prev);
        prev = u;
    }
    CHECK_THROWS_AS(suboptimal_play_threshold(p, 1), std::invalid_argument);
}

TEST_CASE("beta series single term matches direct arithmetic") {
    const BoundParams p(0.5, 1.0);
    const double omega = 0.0625;
    const double kappa = 0.0009765625;
    const double C = std::exp(omega) / (1.0 - std::exp(-3.0 * omega));
    const double expected =
        C * std::exp(-kappa * 10.0 / std::log(10.0)) * (1.0 - std::exp(-10.0 * omega));
    CHECK_THAT(beta_series(p, 10, 10), WithinAbs(expected, 1e-12));
    CHECK_THROWS_AS(beta_series(p, 1, 10), std::invalid_argument);
    CHECK_THROWS_AS(beta_series(p, 20, 10), std::invalid_argument);
}

TEST_CASE("beta series is nonnegative and nondecreasing in T") {
    const BoundParams p(0.5, 1.0);
    double prev = 0.0;
    for (std::uint64_t T = 10; T <= 2000; T += 151) {
        const double b = beta_series(p, 10, T);
        CHECK(b >= prev);
        prev = b;
    }
}

TEST_CASE("beta from the analysis burn-in is within the harmonic bound") {
    // The proof splits beta over [c, T] into a head of at most ln(T) packets
    // of geometric sums and a harmonic tail; numerically the sum from the
    // burn-in stays far below (C/kappa)(ln(T)/e/(1-1/e) + ln(2T) + 1).
    const BoundParams p(0.5, 1.0);
    for (std::uint64_t T : {100000ull, 200000ull}) {
        const double c = p.c_delta_gamma(T);
        REQUIRE(c < static_cast<double>(T));
        const auto start = static_cast<std::uint64_t>(std::ceil(c));
        const double beta = beta_series(p, start, T);
        const double log_T = std::log(static_cast<double>(T));
        const double lemma_bound =
            p.big_c() / p.kappa() *
            (log_T / std::numbers::e / (1.0 - 1.0 / std::numbers::e) +
             std::log(2.0 * static_cast<double>(T)) + 1.0);
        CHECK(beta >= 0.0);
        CHECK(beta <= lemma_bound);
    }
}

TEST_CASE("regret bound curve shape") {
    const BoundParams p(0.5, 1.0);
    const std::vector<std::uint64_t> grid{100, 1000, 10000};
    const auto curve = regret_bound_curve(p, grid);
    CHECK(curve[0] <= curve[1]);
    CHECK(curve[1] <= curve[2]);
    // log-dominated growth: two decades of horizon change the bound far less
    // than the trivial linear factor
    CHECK(curve[2] / curve[0] < (std::log(1e4) / std::log(1e2)) * 10.0);

    // smaller gap, pointwise larger curve
    const BoundParams smaller_gap(0.4, 1.0);
    const auto curve_small = regret_bound_curve(smaller_gap, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(curve_small[i] > curve[i]);

    // capped variant reports the trivial bound when the burn-in exceeds T
    const auto capped = regret_bound_curve(p, grid, /*cap_to_trivial=*/true);
    CHECK(capped[0] == 0.5 * 100.0);
    CHECK(capped[1] == 0.5 * 1000.0);

    const std::vector<std::uint64_t> bad_grid{2};
    CHECK_THROWS_AS(regret_bound_curve(p, bad_grid), std::invalid_argument);
}

TEST_CASE("monte carlo verifier stays under the tolerance") {
    const RngStream rng = derive_run_rng(51, 0);

    const auto iid = verify_bound_monte_carlo(BoundKind::iid, SafetyValueFunction::mean(),
                                              ArmDistribution::bernoulli(0.5), 100, std::nullopt,
                                              0.05, 5000, rng);
    CHECK(iid.violation_rate <= iid.threshold);

    const auto mv = verify_bound_monte_carlo(BoundKind::iid, SafetyValueFunction::mean_variance(1.0),
                                             ArmDistribution::uniform(0.0, 1.0), 50, std::nullopt,
                                             0.1, 5000, rng);
    CHECK(mv.violation_rate <= mv.threshold);

    const auto sub = verify_bound_monte_carlo(BoundKind::subsample, SafetyValueFunction::mean(),
                                              ArmDistribution::uniform(0.0, 1.0), 60,
                                              std::optional<std::size_t>(30), 0.05, 5000, rng);
    CHECK(sub.violation_rate <= sub.threshold);

    // m = n: the subsample is the full multiset, no deviation is possible
    const auto degenerate = verify_bound_monte_carlo(
        BoundKind::subsample, SafetyValueFunction::mean(), ArmDistribution::uniform(0.0, 1.0), 40,
        std::optional<std::size_t>(40), 0.05, 2000, rng);
    CHECK(degenerate.violation_rate == 0.0);

    CHECK_THROWS_AS(verify_bound_monte_carlo(BoundKind::iid, SafetyValueFunction::mean(),
                                             ArmDistribution::bernoulli(0.5), 10, std::nullopt,
                                             0.05, 100, rng),
                    std::invalid_argument);
}
