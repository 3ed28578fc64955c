#pragma once

// Identifiability of the change rate under a refresh-interval schedule, and
// the grouped statistics that make the rate recoverable when it is.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "freshcrawl/error.hpp"
#include "freshcrawl/estimation.hpp"

namespace freshcrawl {

enum class ScheduleKind { Constant, LogGrowth, PowerGrowth, Explicit };

/// A sequence of refresh intervals w_1, w_2, ...
struct ScheduleFamily {
    ScheduleKind kind = ScheduleKind::Constant;
    double parameter = 1.0;        // c for Constant, exponent for PowerGrowth
    std::vector<double> explicit_windows;

    static ScheduleFamily constant(double c) {
        detail::require(c > 0.0 && std::isfinite(c), "constant window must be positive");
        return {ScheduleKind::Constant, c, {}};
    }
    // w_n = ln n, indexed from n = 2 so every window is positive.
    static ScheduleFamily log_growth() { return {ScheduleKind::LogGrowth, 0.0, {}}; }
    // w_n = n^exponent.
    static ScheduleFamily power_growth(double exponent) {
        detail::require(std::isfinite(exponent), "exponent must be finite");
        return {ScheduleKind::PowerGrowth, exponent, {}};
    }
    static ScheduleFamily explicit_list(std::vector<double> windows) {
        for (double w : windows) detail::require(w > 0.0 && std::isfinite(w), "windows must be positive");
        return {ScheduleKind::Explicit, 0.0, std::move(windows)};
    }

    /// The n-th window, n = 1, 2, ...
    double window(std::size_t n) const {
        detail::require(n >= 1, "window index starts at 1");
        const auto nd = static_cast<double>(n);
        switch (kind) {
            case ScheduleKind::Constant: return parameter;
            case ScheduleKind::LogGrowth: return std::log(nd + 1.0);
            case ScheduleKind::PowerGrowth: return std::pow(nd, parameter);
            case ScheduleKind::Explicit:
                detail::require(n <= explicit_windows.size(), "explicit schedule is shorter than requested");
                return explicit_windows[n - 1];
        }
        return parameter;
    }

    std::vector<double> prefix(std::size_t count) const {
        std::vector<double> out(count);
        for (std::size_t n = 0; n < count; ++n) out[n] = window(n + 1);
        return out;
    }
};

enum class Learnability { Learnable, NonVanishingBias };

inline const char* to_string(Learnability l) {
    return l == Learnability::Learnable ? "learnable" : "non_vanishing_bias";
}

/// Bias persists iff the short windows have finite total length and the long
/// windows have summable no-change probabilities. Both series are decided in
/// closed form, so only the analytic families are accepted.
inline Learnability classify_schedule(const ScheduleFamily& family, double xi) {
    detail::require(xi > 0.0 && std::isfinite(xi), "change rate must be positive");
    bool short_sum_finite = true;
    bool long_sum_finite = true;
    switch (family.kind) {
        case ScheduleKind::Constant:
            // Infinitely many windows of one size: one of the two series diverges.
            short_sum_finite = family.parameter >= 1.0;
            long_sum_finite = family.parameter < 1.0;
            break;
        case ScheduleKind::LogGrowth:
            // Finitely many ln n < 1; e^{-xi ln n} = n^{-xi} is summable iff xi > 1.
            short_sum_finite = true;
            long_sum_finite = xi > 1.0;
            break;
        case ScheduleKind::PowerGrowth: {
            const double a = family.parameter;
            if (a > 0.0) {
                short_sum_finite = true;
                long_sum_finite = true;
            } else if (a == 0.0) {
                short_sum_finite = true;
                long_sum_finite = false;
            } else {
                short_sum_finite = a < -1.0;
                long_sum_finite = true;
            }
            break;
        }
        case ScheduleKind::Explicit:
            throw Error(ErrorKind::UnsupportedAnalysis,
                        "series convergence cannot be decided from a finite explicit schedule");
    }
    return short_sum_finite && long_sum_finite ? Learnability::NonVanishingBias : Learnability::Learnable;
}

enum class GroupingMode { SmallWindows, LargeWindows };

using IndexGroups = std::vector<std::vector<std::size_t>>;

/// Greedy left-to-right packing of window indices.
/// SmallWindows: windows < 1, group length sums in (1, 2).
/// LargeWindows: windows >= 1, sums of e^{-xi w} in [1/e, 2/e). A single term
/// can reach 1/e only when xi < 1; such a term forms its own group, or is
/// skipped when it is already >= 2/e.
inline IndexGroups group_intervals(std::span<const double> windows, GroupingMode mode, double xi = 1.0) {
    IndexGroups groups;
    std::vector<std::size_t> current;
    double sum = 0.0;
    if (mode == GroupingMode::SmallWindows) {
        for (std::size_t n = 0; n < windows.size(); ++n) {
            const double w = windows[n];
            detail::require(w > 0.0, "windows must be positive");
            if (w >= 1.0) continue;
            current.push_back(n);
            sum += w;
            if (sum > 1.0) {
                groups.push_back(std::move(current));
                current.clear();
                sum = 0.0;
            }
        }
        return groups;
    }

    detail::require(xi > 0.0, "grouping large windows needs a positive rate");
    const double lower = std::exp(-1.0);
    const double upper = 2.0 * lower;
    for (std::size_t n = 0; n < windows.size(); ++n) {
        const double w = windows[n];
        detail::require(w > 0.0, "windows must be positive");
        if (w < 1.0) continue;
        const double term = std::exp(-xi * w);
        if (term >= upper) continue;
        if (term >= lower) {
            groups.push_back({n});
            continue;
        }
        current.push_back(n);
        sum += term;
        if (sum >= lower) {
            groups.push_back(std::move(current));
            current.clear();
            sum = 0.0;
        }
    }
    return groups;
}

/// Inverts the grouped statistic.
/// SmallWindows: the fraction of groups without any change is matched to
/// (1/K) sum e^{-xi W_k}, W_k the group length.
/// LargeWindows: the fraction of groups where every window changed is
/// matched to (1/K) sum (1 - e^{-xi w})^{|J_k|}; uniform windows only.
inline RateEstimate grouped_statistic_estimate(const IndexGroups& groups, std::span<const double> windows,
                                               std::span<const std::uint8_t> bits, GroupingMode mode,
                                               const EstimateOptions& options = {}) {
    detail::check_options(options);
    detail::require(windows.size() == bits.size(), "windows and bits differ in length");
    if (groups.empty()) throw Error(ErrorKind::InsufficientData, "no complete groups to estimate from");

    if (mode == GroupingMode::SmallWindows) {
        std::vector<WindowTally> tallies;
        tallies.reserve(groups.size());
        for (const auto& group : groups) {
            WindowTally t;
            t.trials = 1;
            for (std::size_t n : group) {
                detail::require(n < windows.size(), "group index out of range");
                t.window += windows[n];
                if (bits[n]) t.changed = 1;
            }
            tallies.push_back(t);
        }
        auto est = moment_match_estimate(tallies, options);
        est.confidence_width = std::numeric_limits<double>::infinity();
        return est;
    }

    const double w = windows[groups.front().front()];
    std::vector<double> sizes;
    double all_changed = 0.0;
    for (const auto& group : groups) {
        bool every = true;
        for (std::size_t n : group) {
            detail::require(n < windows.size(), "group index out of range");
            if (windows[n] != w)
                throw Error(ErrorKind::UnsupportedAnalysis, "large-window inversion supports uniform windows only");
            every = every && bits[n];
        }
        sizes.push_back(static_cast<double>(group.size()));
        if (every) all_changed += 1.0;
    }
    const double k = static_cast<double>(groups.size());
    const double target = all_changed / k;
    if (all_changed == 0.0) return detail::sentinel(0.0, EstimatorKind::MomentMatch, options);
    if (all_changed == k)
        return detail::sentinel(std::numeric_limits<double>::infinity(), EstimatorKind::MomentMatch, options);
    auto gap = [&](double xi) {
        const double p = -std::expm1(-xi * w);
        double s = 0.0;
        for (double size : sizes) s += std::pow(p, size);
        return target - s / k;
    };
    auto [lo, hi] = detail::bracket_root(gap, options);
    return detail::finish(lo, hi, EstimatorKind::MomentMatch, options);
}

}  // namespace freshcrawl
