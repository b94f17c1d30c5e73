#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bandit {

enum class EstimatorForm { biased, unbiased };

/// Scores a reward distribution (or a finite sample of one) on [0,1].
///
/// Three instances: the mean, the mean-variance trade-off mu - rho*sigma^2,
/// and the lower conditional value at risk at level alpha. Each carries a
/// sensitivity constant gamma such that replacing a single sample among n
/// moves the estimate by at most gamma/n; that constant feeds every
/// concentration bound in this library.
///
/// gamma per variant:
///   mean                    1
///   mean-variance, biased   1 + rho/2
///   mean-variance, unbiased 1 + rho
///   cvar(alpha)             1/alpha
///
/// The unbiased mean-variance constant is ours: the worst single-coordinate
/// shift of the unbiased variance on [0,1] is 1/n (attained by n-1 equal
/// samples and one outlier), so the combined estimator moves by at most
/// (1 + rho)/n.
///
/// Estimators sort their input before accumulating, so they are exactly
/// permutation invariant, not merely up to rounding.
class SafetyValueFunction {
public:
    enum class Kind { mean, mean_variance, cvar };

    static SafetyValueFunction mean() { return SafetyValueFunction(Kind::mean, 0.0, 0.0, EstimatorForm::biased); }

    static SafetyValueFunction mean_variance(double rho, EstimatorForm form = EstimatorForm::biased) {
        if (rho < 0.0) throw std::invalid_argument("mean_variance: rho must be >= 0");
        return SafetyValueFunction(Kind::mean_variance, rho, 0.0, form);
    }

    static SafetyValueFunction cvar(double alpha) {
        if (!(alpha > 0.0) || alpha > 1.0) throw std::invalid_argument("cvar: alpha must be in (0, 1]");
        return SafetyValueFunction(Kind::cvar, 0.0, alpha, EstimatorForm::biased);
    }

    Kind kind() const { return kind_; }
    double rho() const { return rho_; }
    double alpha() const { return alpha_; }
    EstimatorForm form() const { return form_; }

    double gamma() const {
        switch (kind_) {
            case Kind::mean: return 1.0;
            case Kind::mean_variance:
                return form_ == EstimatorForm::biased ? 1.0 + rho_ / 2.0 : 1.0 + rho_;
            case Kind::cvar: return 1.0 / alpha_;
        }
        return 1.0;
    }

    /// Worst-case move of the estimate when one of n samples is replaced.
    double bounded_difference(std::size_t n) const {
        check_count(n);
        return gamma() / static_cast<double>(n);
    }

    /// Sample estimate of the value. All samples must lie in [0,1]; the
    /// unbiased mean-variance form needs at least two samples.
    double estimate(std::span<const double> samples) const {
        check_count(samples.size());
        for (double x : samples) {
            if (!(x >= 0.0) || x > 1.0) {
                throw std::invalid_argument("estimate: sample outside [0,1]");
            }
        }
        std::vector<double> sorted(samples.begin(), samples.end());
        std::sort(sorted.begin(), sorted.end());
        const std::size_t n = sorted.size();

        switch (kind_) {
            case Kind::mean: return mean_of(sorted);
            case Kind::mean_variance: {
                const double mu = mean_of(sorted);
                double ss = 0.0;
                for (double x : sorted) ss += (x - mu) * (x - mu);
                const double denom =
                    form_ == EstimatorForm::biased ? static_cast<double>(n) : static_cast<double>(n - 1);
                return mu - rho_ * ss / denom;
            }
            case Kind::cvar: {
                const std::size_t m = cvar_tail_count(n);
                double s = 0.0;
                for (std::size_t i = 0; i < m; ++i) s += sorted[i];
                return s / static_cast<double>(m);
            }
        }
        return 0.0;
    }

    /// Number of lowest order statistics averaged by the CVaR estimator,
    /// ceil(n * alpha) clamped to [1, n].
    std::size_t cvar_tail_count(std::size_t n) const {
        const auto m = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * alpha_ - 1e-9));
        return std::clamp<std::size_t>(m, 1, n);
    }

    std::string name() const {
        switch (kind_) {
            case Kind::mean: return "mean";
            case Kind::mean_variance:
                return "mean_variance(rho=" + format(rho_) +
                       (form_ == EstimatorForm::biased ? ",biased)" : ",unbiased)");
            case Kind::cvar: return "cvar(alpha=" + format(alpha_) + ")";
        }
        return "?";
    }

private:
    SafetyValueFunction(Kind kind, double rho, double alpha, EstimatorForm form)
        : kind_(kind), rho_(rho), alpha_(alpha), form_(form) {}

    void check_count(std::size_t n) const {
        if (n == 0) throw std::invalid_argument("safety value estimate needs at least one sample");
        if (kind_ == Kind::mean_variance && form_ == EstimatorForm::unbiased && n < 2) {
            throw std::invalid_argument("unbiased mean-variance needs at least two samples");
        }
    }

    static double mean_of(const std::vector<double>& xs) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s / static_cast<double>(xs.size());
    }

    static std::string format(double v) {
        std::string s = std::to_string(v);
        while (s.size() > 1 && s.back() == '0') s.pop_back();
        if (!s.empty() && s.back() == '.') s.pop_back();
        return s;
    }

    Kind kind_;
    double rho_;
    double alpha_;
    EstimatorForm form_;
};

}  // namespace bandit
