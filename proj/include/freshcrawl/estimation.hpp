#pragma once

// Change-rate estimation from single-bit (partial) and count (full)
// refresh feedback, with the matching confidence widths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "freshcrawl/error.hpp"
#include "freshcrawl/process_sim.hpp"

namespace freshcrawl {

enum class ObservationMode { Partial, Full };

/// Windows between consecutive refreshes of one page together with either
/// change bits (partial) or change counts (full).
class ObservationLog {
public:
    static ObservationLog partial(std::vector<double> windows, std::vector<std::uint8_t> bits) {
        detail::require(windows.size() == bits.size(), "windows and bits differ in length");
        for (auto b : bits) detail::require(b <= 1, "observation bits must be 0 or 1");
        ObservationLog log(ObservationMode::Partial, std::move(windows));
        log.bits_ = std::move(bits);
        return log;
    }

    static ObservationLog full(std::vector<double> windows, std::vector<std::uint64_t> counts) {
        detail::require(windows.size() == counts.size(), "windows and counts differ in length");
        ObservationLog log(ObservationMode::Full, std::move(windows));
        log.counts_ = std::move(counts);
        return log;
    }

    /// Builds windows from refresh times, measuring the first from `origin`.
    static ObservationLog partial_from_times(std::span<const double> refresh_times, std::vector<std::uint8_t> bits,
                                             double origin = 0.0) {
        return partial(windows_from_times(refresh_times, origin), std::move(bits));
    }

    static std::vector<double> windows_from_times(std::span<const double> times, double origin = 0.0) {
        std::vector<double> windows;
        windows.reserve(times.size());
        double previous = origin;
        for (double y : times) {
            windows.push_back(y - previous);
            previous = y;
        }
        return windows;
    }

    ObservationMode mode() const noexcept { return mode_; }
    std::size_t size() const noexcept { return windows_.size(); }
    std::span<const double> windows() const noexcept { return windows_; }
    std::span<const std::uint8_t> bits() const noexcept { return bits_; }
    std::span<const std::uint64_t> counts() const noexcept { return counts_; }
    double total_time() const noexcept { return std::accumulate(windows_.begin(), windows_.end(), 0.0); }

private:
    ObservationLog(ObservationMode mode, std::vector<double> windows) : mode_(mode), windows_(std::move(windows)) {
        detail::require(!windows_.empty(), "observation log must contain at least one window");
        for (double w : windows_) detail::require(w > 0.0 && std::isfinite(w), "observation windows must be positive");
    }

    ObservationMode mode_;
    std::vector<double> windows_;
    std::vector<std::uint8_t> bits_;
    std::vector<std::uint64_t> counts_;
};

/// Partial observations aggregated by window width.
struct WindowTally {
    double window = 0.0;
    std::size_t trials = 0;
    std::size_t changed = 0;
};

inline std::vector<WindowTally> tally(const ObservationLog& log) {
    detail::require(log.mode() == ObservationMode::Partial, "tally requires a partial-observation log");
    std::map<double, WindowTally> groups;
    for (std::size_t n = 0; n < log.size(); ++n) {
        auto& group = groups[log.windows()[n]];
        group.window = log.windows()[n];
        ++group.trials;
        group.changed += log.bits()[n];
    }
    std::vector<WindowTally> out;
    out.reserve(groups.size());
    for (auto& [w, group] : groups) out.push_back(group);
    return out;
}

enum class EstimatorKind { MomentMatch, MLE, FullObs };

struct RateEstimate {
    double xi_hat = 0.0;
    double xi_tilde = 0.0;  // +inf when no window was change-free, 0 when none changed
    double confidence_width = std::numeric_limits<double>::infinity();
    double delta = 0.1;
    EstimatorKind method = EstimatorKind::MomentMatch;
    // Final root bracket of the solver; both equal xi_tilde on sentinel paths.
    double bracket_low = 0.0;
    double bracket_high = 0.0;
};

struct EstimateOptions {
    RateBounds bounds;
    double tolerance = 1e-10;
    double delta = 0.1;
};

namespace detail {

inline void check_options(const EstimateOptions& options) {
    require(options.bounds.xi_min > 0.0 && options.bounds.xi_min < options.bounds.xi_max,
            "rate bounds must satisfy 0 < xi_min < xi_max");
    require(options.tolerance > 0.0, "solver tolerance must be positive");
    require(options.delta > 0.0 && options.delta < 1.0, "delta must lie in (0, 1)");
}

/// Bisection for the root of a strictly decreasing function on (0, inf).
/// Starts from [xi_min/2, 2 xi_max] and widens geometrically when the root
/// lies outside. Returns the final bracket of width <= tolerance.
template <typename Decreasing>
std::pair<double, double> bracket_root(Decreasing&& g, const EstimateOptions& options) {
    double lo = options.bounds.xi_min / 2.0;
    double hi = 2.0 * options.bounds.xi_max;
    for (int i = 0; i < 2000 && g(lo) <= 0.0; ++i) {
        hi = lo;
        lo /= 2.0;
    }
    for (int i = 0; i < 2000 && g(hi) >= 0.0; ++i) {
        lo = hi;
        hi *= 2.0;
    }
    if (!(g(lo) > 0.0 && g(hi) < 0.0)) throw Error(ErrorKind::Numerical, "failed to bracket rate estimate root");
    while (hi - lo > options.tolerance) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (g(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return {lo, hi};
}

inline RateEstimate finish(double lo, double hi, EstimatorKind method, const EstimateOptions& options) {
    RateEstimate est;
    est.method = method;
    est.delta = options.delta;
    est.bracket_low = lo;
    est.bracket_high = hi;
    est.xi_tilde = std::isfinite(hi) ? 0.5 * (lo + hi) : hi;
    est.xi_hat = options.bounds.clamp(est.xi_tilde);
    return est;
}

inline RateEstimate sentinel(double xi_tilde, EstimatorKind method, const EstimateOptions& options) {
    return finish(xi_tilde, xi_tilde, method, options);
}

}  // namespace detail

/// Width of the moment-matching confidence interval:
/// ((1/N) sum w e^{-xi_max w})^{-1} sqrt(ln(2/delta) / (2N)).
inline double confidence_width_partial(std::span<const double> windows, double xi_max, double delta) {
    detail::require(!windows.empty(), "confidence width needs at least one window");
    detail::require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
    double weight = 0.0;
    for (double w : windows) {
        detail::require(w > 0.0, "observation windows must be positive");
        weight += w * std::exp(-xi_max * w);
    }
    const auto n = static_cast<double>(windows.size());
    weight /= n;
    if (weight <= 0.0) return std::numeric_limits<double>::infinity();
    return std::sqrt(std::log(2.0 / delta) / (2.0 * n)) / weight;
}

inline double confidence_width_partial(std::span<const WindowTally> tallies, double xi_max, double delta) {
    detail::require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
    double weight = 0.0;
    double n = 0.0;
    for (const auto& t : tallies) {
        weight += static_cast<double>(t.trials) * t.window * std::exp(-xi_max * t.window);
        n += static_cast<double>(t.trials);
    }
    detail::require(n > 0.0, "confidence width needs at least one window");
    weight /= n;
    if (weight <= 0.0) return std::numeric_limits<double>::infinity();
    return std::sqrt(std::log(2.0 / delta) / (2.0 * n)) / weight;
}

/// Smallest positive multiple of `step` that is >= value (with a relative
/// tolerance so exact multiples are kept).
inline double round_up_to_multiple(double value, double step) {
    detail::require(step > 0.0, "rounding step must be positive");
    const double ratio = value / step;
    double count = std::ceil(ratio - 1e-9 * std::max(1.0, ratio));
    if (count < 1.0) count = 1.0;
    return count * step;
}

/// Per-page width after following the uniform-interval policy for `tau`,
/// union-bounded over m pages.
inline double confidence_width_ui(std::size_t m, double bandwidth, double tau, double xi_max, double delta) {
    detail::require(m >= 1 && bandwidth > 0.0 && tau > 0.0, "invalid uniform-interval configuration");
    detail::require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
    const double md = static_cast<double>(m);
    const double tau_used = round_up_to_multiple(tau, md / bandwidth);
    return std::exp(xi_max * md / bandwidth) *
           std::sqrt(bandwidth * std::log(2.0 * md / delta) / (2.0 * tau_used * md));
}

/// Moment matching: solves (1/N) sum e^{-xi w_n} = fraction of change-free
/// windows, then clips to the rate bounds.
inline RateEstimate moment_match_estimate(std::span<const WindowTally> tallies, const EstimateOptions& options = {}) {
    detail::check_options(options);
    double n = 0.0;
    double zeros = 0.0;
    for (const auto& t : tallies) {
        detail::require(t.window > 0.0 && t.changed <= t.trials, "invalid window tally");
        n += static_cast<double>(t.trials);
        zeros += static_cast<double>(t.trials - t.changed);
    }
    if (n <= 0.0) throw Error(ErrorKind::InvalidArgument, "moment matching needs at least one observation");

    RateEstimate est;
    if (zeros == 0.0) {
        est = detail::sentinel(std::numeric_limits<double>::infinity(), EstimatorKind::MomentMatch, options);
    } else if (zeros == n) {
        est = detail::sentinel(0.0, EstimatorKind::MomentMatch, options);
    } else {
        const double p_hat = zeros / n;
        auto excess = [&](double xi) {
            double s = 0.0;
            for (const auto& t : tallies) s += static_cast<double>(t.trials) * std::exp(-xi * t.window);
            return s / n - p_hat;
        };
        auto [lo, hi] = detail::bracket_root(excess, options);
        est = detail::finish(lo, hi, EstimatorKind::MomentMatch, options);
    }
    est.confidence_width = confidence_width_partial(tallies, options.bounds.xi_max, options.delta);
    return est;
}

inline RateEstimate moment_match_estimate(const ObservationLog& log, const EstimateOptions& options = {}) {
    return moment_match_estimate(tally(log), options);
}

/// Maximum likelihood over the concave log-likelihood
/// sum_{o=1} ln(1 - e^{-xi w}) - sum_{o=0} xi w. The estimator has no
/// finite-sample interval, so its width is left infinite.
inline RateEstimate mle_estimate(std::span<const WindowTally> tallies, const EstimateOptions& options = {}) {
    detail::check_options(options);
    std::size_t n = 0;
    std::size_t changed = 0;
    for (const auto& t : tallies) {
        detail::require(t.window > 0.0 && t.changed <= t.trials, "invalid window tally");
        n += t.trials;
        changed += t.changed;
    }
    if (n == 0) throw Error(ErrorKind::InvalidArgument, "maximum likelihood needs at least one observation");
    if (changed == n) return detail::sentinel(std::numeric_limits<double>::infinity(), EstimatorKind::MLE, options);
    if (changed == 0) return detail::sentinel(0.0, EstimatorKind::MLE, options);

    auto score = [&](double xi) {
        double s = 0.0;
        for (const auto& t : tallies) {
            s += static_cast<double>(t.changed) * t.window / std::expm1(xi * t.window);
            s -= static_cast<double>(t.trials - t.changed) * t.window;
        }
        return s;
    };
    auto [lo, hi] = detail::bracket_root(score, options);
    return detail::finish(lo, hi, EstimatorKind::MLE, options);
}

inline RateEstimate mle_estimate(const ObservationLog& log, const EstimateOptions& options = {}) {
    return mle_estimate(tally(log), options);
}

inline double log_likelihood(const ObservationLog& log, double xi) {
    detail::require(log.mode() == ObservationMode::Partial, "likelihood requires a partial-observation log");
    double total = 0.0;
    for (std::size_t n = 0; n < log.size(); ++n) {
        const double w = log.windows()[n];
        total += log.bits()[n] ? std::log(-std::expm1(-xi * w)) : -xi * w;
    }
    return total;
}

/// psi(t) = ((1 + t) ln(1 + t) - t) / (t^2 / 2), with psi(0) = 1.
inline double psi(double t) {
    detail::require(t > -1.0, "psi is defined for t > -1");
    if (std::abs(t) < 1e-6) return 1.0 - t / 3.0 + t * t / 6.0;
    return ((1.0 + t) * std::log1p(t) - t) / (t * t / 2.0);
}

inline double confidence_width_full(double total_time, double xi_min, double xi_max, double delta) {
    detail::require(total_time > 0.0, "total observation time must be positive");
    detail::require(xi_min > 0.0 && xi_min <= xi_max, "rate bounds must satisfy 0 < xi_min <= xi_max");
    detail::require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
    const double curvature = psi(xi_max / xi_min - 1.0);
    return std::sqrt(2.0 * xi_max * std::log(2.0 / delta) / (total_time * curvature));
}

/// Full observability: total change count over total time, clipped.
inline RateEstimate full_obs_estimate(const ObservationLog& log, const EstimateOptions& options = {}) {
    detail::require(log.mode() == ObservationMode::Full, "full-observation estimator needs a count log");
    detail::require(options.bounds.xi_min > 0.0 && options.bounds.xi_min <= options.bounds.xi_max,
                    "rate bounds must satisfy 0 < xi_min <= xi_max");
    const double total_time = log.total_time();
    double events = 0.0;
    for (auto c : log.counts()) events += static_cast<double>(c);
    RateEstimate est;
    est.method = EstimatorKind::FullObs;
    est.delta = options.delta;
    est.xi_tilde = events / total_time;
    est.bracket_low = est.bracket_high = est.xi_tilde;
    est.xi_hat = options.bounds.clamp(est.xi_tilde);
    est.confidence_width =
        confidence_width_full(total_time, options.bounds.xi_min, options.bounds.xi_max, options.delta);
    return est;
}

}  // namespace freshcrawl
