#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace bandit {

/// First output of a splitmix64 generator seeded with `x`, advancing `x`.
inline std::uint64_t splitmix64_next(std::uint64_t& x) {
    x += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Seeded random stream for one run.
///
/// The generator is pinned to std::mt19937_64 seeded through a documented
/// splitmix64 mix of (master_seed, run_id); the uniform, bounded-integer,
/// normal, gamma and beta draws below are implemented here rather than with
/// std::*_distribution so that sequences do not depend on the standard
/// library vendor. Changing any of this invalidates recorded traces and the
/// golden-trace test, so it is a breaking change.
///
/// A stream is single-owner: never share one across concurrent tasks. Use
/// derive_run_rng / substream to give each task its own.
class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::uint64_t run_id)
        : master_seed_(master_seed), run_id_(run_id), gen_(mix(master_seed, run_id)) {}

    std::uint64_t master_seed() const { return master_seed_; }
    std::uint64_t run_id() const { return run_id_; }

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform double in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform_real(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Unbiased integer in [0, n), n >= 1, by rejection.
    std::uint64_t uniform_below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_below: n must be positive");
        const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
        for (;;) {
            const std::uint64_t x = next_u64();
            if (x >= threshold) return x % n;
        }
    }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Normal draw via the Marsaglia polar method (no cached spare).
    double normal(double mean, double stddev) {
        for (;;) {
            const double u = 2.0 * uniform01() - 1.0;
            const double v = 2.0 * uniform01() - 1.0;
            const double s = u * u + v * v;
            if (s > 0.0 && s < 1.0) {
                return mean + stddev * u * std::sqrt(-2.0 * std::log(s) / s);
            }
        }
    }

    /// Gamma(alpha, 1) for alpha >= 1 (Marsaglia-Tsang squeeze).
    double gamma(double alpha) {
        if (alpha < 1.0) throw std::invalid_argument("gamma: alpha must be >= 1");
        const double d = alpha - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = 0.0, v = 0.0;
            do {
                x = normal(0.0, 1.0);
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform01();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    double beta(double a, double b) {
        const double x = gamma(a);
        const double y = gamma(b);
        return x / (x + y);
    }

    /// Deterministic child stream; depends only on the seed path and `index`,
    /// not on how many draws this stream has produced.
    RngStream substream(std::uint64_t index) const {
        return RngStream(mix(master_seed_, run_id_), index);
    }

private:
    static std::uint64_t mix(std::uint64_t master, std::uint64_t run) {
        std::uint64_t s = master;
        const std::uint64_t m = splitmix64_next(s);
        s = m ^ (run + 0x9E3779B97F4A7C15ull);
        return splitmix64_next(s);
    }

    std::uint64_t master_seed_;
    std::uint64_t run_id_;
    std::mt19937_64 gen_;
};

/// Stream for run `run_id` under `master_seed`. Pure; safe to call
/// concurrently. Seeding: mt19937_64(splitmix64(splitmix64(master) ^
/// (run_id + 0x9E3779B97F4A7C15))).
inline RngStream derive_run_rng(std::uint64_t master_seed, std::uint64_t run_id) {
    return RngStream(master_seed, run_id);
}

/// Draws j elements from `source` without replacement, uniformly over
/// j-subsets, leaving `source` untouched. Partial Fisher-Yates over virtual
/// index positions; O(j) extra space.
inline std::vector<double> subsample_without_replacement(std::span<const double> source,
                                                         std::size_t j, RngStream& rng) {
    const std::size_t n = source.size();
    if (j == 0) throw std::invalid_argument("subsample_without_replacement: j must be positive");
    if (j > n) throw std::invalid_argument("subsample_without_replacement: j exceeds source size");

    std::unordered_map<std::size_t, std::size_t> displaced;
    displaced.reserve(2 * j);
    auto position = [&](std::size_t idx) {
        const auto it = displaced.find(idx);
        return it == displaced.end() ? idx : it->second;
    };

    std::vector<double> out;
    out.reserve(j);
    for (std::size_t i = 0; i < j; ++i) {
        const std::size_t k = i + static_cast<std::size_t>(rng.uniform_below(n - i));
        const std::size_t pick = position(k);
        displaced[k] = position(i);
        out.push_back(source[pick]);
    }
    return out;
}

/// In-place Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& items, RngStream& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t k = static_cast<std::size_t>(rng.uniform_below(i));
        std::swap(items[i - 1], items[k]);
    }
}

}  // namespace bandit
