#pragma once

// Poisson change/request/refresh simulation, cache freshness tracking and
// the exact and stationary expected-utility formulas.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/binomial.hpp>

#include "freshcrawl/error.hpp"
#include "freshcrawl/random.hpp"

namespace freshcrawl {

struct RateBounds {
    double xi_min = 0.1;
    double xi_max = 1.0;

    double clamp(double xi) const { return std::clamp(xi, xi_min, xi_max); }
};

/// True change rates, request rates and the known bounds on change rates.
class PageEnsemble {
public:
    PageEnsemble(std::vector<double> change_rates, std::vector<double> request_rates, RateBounds bounds)
        : change_rates_(std::move(change_rates)), request_rates_(std::move(request_rates)), bounds_(bounds) {
        detail::require(!change_rates_.empty(), "ensemble must contain at least one page");
        detail::require(change_rates_.size() == request_rates_.size(),
                        "change and request rate vectors differ in length");
        detail::require(bounds_.xi_min > 0.0 && bounds_.xi_min <= bounds_.xi_max,
                        "rate bounds must satisfy 0 < xi_min <= xi_max");
        for (std::size_t i = 0; i < change_rates_.size(); ++i) {
            const double xi = change_rates_[i];
            detail::require(xi >= bounds_.xi_min && xi <= bounds_.xi_max,
                            "change rate of page " + std::to_string(i) + " outside [xi_min, xi_max]");
            detail::require(request_rates_[i] > 0.0,
                            "request rate of page " + std::to_string(i) + " must be positive");
        }
    }

    std::size_t size() const noexcept { return change_rates_.size(); }
    std::span<const double> change_rates() const noexcept { return change_rates_; }
    std::span<const double> request_rates() const noexcept { return request_rates_; }
    const RateBounds& bounds() const noexcept { return bounds_; }

    double total_request_rate() const {
        double total = 0.0;
        for (double z : request_rates_) total += z;
        return total;
    }

private:
    std::vector<double> change_rates_;
    std::vector<double> request_rates_;
    RateBounds bounds_;
};

enum class PolicyKind { Rates, Intervals };

/// Either a Poisson refresh-rate vector or a fixed refresh-interval vector,
/// both spending bandwidth R.
class Policy {
public:
    static constexpr double kBandwidthTolerance = 1e-9;

    static Policy rates(std::vector<double> rho, double bandwidth) {
        detail::require(bandwidth > 0.0, "bandwidth must be positive");
        double total = 0.0;
        for (double r : rho) {
            detail::require(r >= 0.0 && std::isfinite(r), "refresh rates must be finite and nonnegative");
            total += r;
        }
        detail::require(std::abs(total - bandwidth) <= kBandwidthTolerance * bandwidth,
                        "refresh rates must sum to the bandwidth");
        return Policy(PolicyKind::Rates, std::move(rho), bandwidth);
    }

    static Policy intervals(std::vector<double> kappa, double bandwidth) {
        detail::require(bandwidth > 0.0, "bandwidth must be positive");
        double total = 0.0;
        for (double k : kappa) {
            detail::require(k > 0.0 && std::isfinite(k), "refresh intervals must be finite and positive");
            total += 1.0 / k;
        }
        detail::require(std::abs(total - bandwidth) <= kBandwidthTolerance * bandwidth,
                        "inverse refresh intervals must sum to the bandwidth");
        return Policy(PolicyKind::Intervals, std::move(kappa), bandwidth);
    }

    PolicyKind kind() const noexcept { return kind_; }
    std::span<const double> values() const noexcept { return values_; }
    double bandwidth() const noexcept { return bandwidth_; }
    std::size_t size() const noexcept { return values_.size(); }

private:
    Policy(PolicyKind kind, std::vector<double> values, double bandwidth)
        : kind_(kind), values_(std::move(values)), bandwidth_(bandwidth) {}

    PolicyKind kind_;
    std::vector<double> values_;
    double bandwidth_;
};

struct Horizon {
    double start = 0.0;
    double end = 0.0;

    double length() const noexcept { return end - start; }
};

/// Homogeneous Poisson event times in (t_start, t_start + horizon], drawn
/// from the supplied engine.
inline std::vector<double> sample_poisson_events(double rate, double horizon, Engine& engine, double t_start = 0.0) {
    detail::require(rate >= 0.0 && std::isfinite(rate), "Poisson rate must be finite and nonnegative");
    detail::require(horizon > 0.0, "horizon must be positive");
    std::vector<double> times;
    if (rate == 0.0) return times;
    std::exponential_distribution<double> gap(rate);
    const double t_end = t_start + horizon;
    double t = t_start + gap(engine);
    while (t <= t_end) {
        times.push_back(t);
        t += gap(engine);
    }
    return times;
}

inline std::vector<double> sample_poisson_events(double rate, double horizon, std::uint64_t rng_seed) {
    Engine engine(rng_seed);
    return sample_poisson_events(rate, horizon, engine);
}

/// P(Fresh at t0 + elapsed | Fresh(t0) = initially_fresh) under Poisson
/// refreshes at `rho` and changes at `xi`.
inline double freshness_probability_exact(double rho, double xi, bool initially_fresh, double elapsed) {
    detail::require(xi > 0.0, "change rate must be positive");
    detail::require(rho >= 0.0, "refresh rate must be nonnegative");
    detail::require(elapsed >= 0.0, "elapsed time must be nonnegative");
    const double stationary = rho / (rho + xi);
    const double s = initially_fresh ? 1.0 : 0.0;
    return stationary + (s - stationary) * std::exp(-(rho + xi) * elapsed);
}

/// Same as above for a fractional initial state (probability of being fresh).
inline double freshness_probability_mixture(double rho, double xi, double fresh_probability, double elapsed) {
    return fresh_probability * freshness_probability_exact(rho, xi, true, elapsed) +
           (1.0 - fresh_probability) * freshness_probability_exact(rho, xi, false, elapsed);
}

struct PageTrace {
    std::vector<double> changes;
    std::vector<double> requests;
    std::vector<double> refreshes;
    std::vector<std::uint8_t> request_fresh;  // one per request
    std::vector<std::uint8_t> observations;   // one per refresh
    bool initially_fresh = false;
};

struct SimulationTrace {
    std::vector<PageTrace> pages;
    Horizon horizon;
    std::uint64_t rng_seed = 0;
};

namespace detail {

// Equal timestamps are ordered change < refresh < request, which makes every
// comparison below inclusive on the refresh side.
inline void fill_freshness(PageTrace& page, double t_start) {
    page.observations.assign(page.refreshes.size(), 0);
    std::size_t c = 0;
    double previous = t_start;
    for (std::size_t n = 0; n < page.refreshes.size(); ++n) {
        const double y = page.refreshes[n];
        while (c < page.changes.size() && page.changes[c] <= previous) ++c;
        page.observations[n] = (c < page.changes.size() && page.changes[c] <= y) ? 1 : 0;
        previous = y;
    }

    page.request_fresh.assign(page.requests.size(), 0);
    std::size_t next_change = 0;
    std::size_t next_refresh = 0;
    double last_change = -std::numeric_limits<double>::infinity();
    double last_refresh = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < page.requests.size(); ++n) {
        const double z = page.requests[n];
        while (next_change < page.changes.size() && page.changes[next_change] <= z)
            last_change = page.changes[next_change++];
        while (next_refresh < page.refreshes.size() && page.refreshes[next_refresh] <= z)
            last_refresh = page.refreshes[next_refresh++];
        bool fresh = false;
        if (next_refresh > 0) {
            fresh = last_refresh >= last_change;
        } else {
            fresh = page.initially_fresh && next_change == 0;
        }
        page.request_fresh[n] = fresh ? 1 : 0;
    }
}

inline std::vector<double> interval_grid(double kappa, Horizon horizon) {
    std::vector<double> times;
    const double span_length = horizon.length();
    // Tolerance keeps the right endpoint when it is an exact multiple.
    const auto count = static_cast<std::size_t>(std::floor(span_length / kappa + 1e-9));
    times.reserve(count);
    for (std::size_t n = 1; n <= count; ++n) times.push_back(horizon.start + static_cast<double>(n) * kappa);
    return times;
}

}  // namespace detail

struct SimulationOptions {
    std::vector<bool> initially_fresh;  // empty: every page starts stale
    bool simulate_requests = true;
};

/// Simulates one page. The schedule callable maps (page, horizon, engine)
/// to an increasing list of refresh times inside the horizon.
template <typename Schedule>
PageTrace simulate_page(const PageEnsemble& ensemble, std::size_t page, Schedule&& schedule, Horizon horizon,
                        std::uint64_t rng_seed, const SimulationOptions& options = {}) {
    PageTrace trace;
    trace.initially_fresh = page < options.initially_fresh.size() && options.initially_fresh[page];

    Engine change_engine = make_engine(rng_seed, page, Stream::Change);
    trace.changes = sample_poisson_events(ensemble.change_rates()[page], horizon.length(), change_engine, horizon.start);
    if (options.simulate_requests) {
        Engine request_engine = make_engine(rng_seed, page, Stream::Request);
        trace.requests =
            sample_poisson_events(ensemble.request_rates()[page], horizon.length(), request_engine, horizon.start);
    }
    Engine refresh_engine = make_engine(rng_seed, page, Stream::Refresh);
    trace.refreshes = schedule(page, horizon, refresh_engine);
    detail::fill_freshness(trace, horizon.start);
    return trace;
}

/// Refresh-time generator for a policy: Poisson draws for rates, a fixed grid
/// t_start + n * kappa for intervals.
inline auto policy_schedule(const Policy& policy) {
    return [&policy](std::size_t page, Horizon horizon, Engine& engine) {
        const double value = policy.values()[page];
        if (policy.kind() == PolicyKind::Rates) return sample_poisson_events(value, horizon.length(), engine, horizon.start);
        return detail::interval_grid(value, horizon);
    };
}

template <typename Schedule>
SimulationTrace simulate_crawl_with(const PageEnsemble& ensemble, Schedule&& schedule, Horizon horizon,
                                    std::uint64_t rng_seed, const SimulationOptions& options = {}) {
    detail::require(horizon.end > horizon.start, "simulation horizon must be non-degenerate");
    SimulationTrace trace;
    trace.horizon = horizon;
    trace.rng_seed = rng_seed;
    trace.pages.reserve(ensemble.size());
    for (std::size_t i = 0; i < ensemble.size(); ++i)
        trace.pages.push_back(simulate_page(ensemble, i, schedule, horizon, rng_seed, options));
    return trace;
}

inline SimulationTrace simulate_crawl(const PageEnsemble& ensemble, const Policy& policy, Horizon horizon,
                                      std::uint64_t rng_seed, const SimulationOptions& options = {}) {
    detail::require(policy.size() == ensemble.size(), "policy and ensemble differ in page count");
    return simulate_crawl_with(ensemble, policy_schedule(policy), horizon, rng_seed, options);
}

inline std::size_t fresh_request_count(const PageTrace& page) {
    std::size_t total = 0;
    for (auto bit : page.request_fresh) total += bit;
    return total;
}

/// Fresh-served requests divided by the page count.
inline double empirical_utility(const SimulationTrace& trace) {
    if (trace.pages.empty()) return 0.0;
    std::size_t fresh = 0;
    for (const auto& page : trace.pages) fresh += fresh_request_count(page);
    return static_cast<double>(fresh) / static_cast<double>(trace.pages.size());
}

/// Streams page by page and keeps only the fresh-request count, so memory
/// stays proportional to the events of a single page.
inline double simulated_utility(const PageEnsemble& ensemble, const Policy& policy, Horizon horizon,
                                std::uint64_t rng_seed, const SimulationOptions& options = {}) {
    detail::require(policy.size() == ensemble.size(), "policy and ensemble differ in page count");
    std::size_t fresh = 0;
    auto schedule = policy_schedule(policy);
    for (std::size_t i = 0; i < ensemble.size(); ++i)
        fresh += fresh_request_count(simulate_page(ensemble, i, schedule, horizon, rng_seed, options));
    return static_cast<double>(fresh) / static_cast<double>(ensemble.size());
}

/// Stationary-approximation utility of a rate vector over `duration`.
inline double expected_utility_rate_policy(std::span<const double> rho, const PageEnsemble& ensemble, double duration) {
    detail::require(rho.size() == ensemble.size(), "rate vector and ensemble differ in page count");
    double total = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) {
        const double xi = ensemble.change_rates()[i];
        total += rho[i] * ensemble.request_rates()[i] / (rho[i] + xi);
    }
    return duration / static_cast<double>(ensemble.size()) * total;
}

/// (1 - e^{-x}) / x, continuous at 0.
inline double mean_survival(double x) {
    if (std::abs(x) < 1e-8) return 1.0 - x / 2.0 + x * x / 6.0;
    return -std::expm1(-x) / x;
}

/// Closed-form utility of a fixed-interval policy over a duration that is a
/// multiple of every interval.
inline double expected_utility_interval_policy(std::span<const double> kappa, const PageEnsemble& ensemble,
                                               double duration) {
    detail::require(kappa.size() == ensemble.size(), "interval vector and ensemble differ in page count");
    double total = 0.0;
    for (std::size_t i = 0; i < kappa.size(); ++i) {
        detail::require(kappa[i] > 0.0, "refresh intervals must be positive");
        total += ensemble.request_rates()[i] * mean_survival(ensemble.change_rates()[i] * kappa[i]);
    }
    return duration / static_cast<double>(ensemble.size()) * total;
}

/// Number of change-free windows among `windows` consecutive fixed windows of
/// width `window`, obtained by inverting the Binomial(windows, e^{-xi*window})
/// CDF at `u`. Disjoint windows of a Poisson process are independent, so this
/// has exactly the distribution of the event-level count; a shared `u`
/// couples runs that differ only in the number of windows.
inline std::size_t sample_zero_window_count(double xi, double window, std::size_t windows, double u) {
    detail::require(xi >= 0.0 && window > 0.0, "invalid change rate or window");
    detail::require(u > 0.0 && u < 1.0, "coupling variate must lie in (0, 1)");
    if (windows == 0) return 0;
    const double p_zero = std::exp(-xi * window);
    if (p_zero <= 0.0) return 0;
    if (p_zero >= 1.0) return windows;
    using namespace boost::math::policies;
    using QuantilePolicy = policy<discrete_quantile<integer_round_up>>;
    boost::math::binomial_distribution<double, QuantilePolicy> dist(static_cast<double>(windows), p_zero);
    const double k = boost::math::quantile(dist, u);
    return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(windows)));
}

/// Independent change bits for consecutive windows of a Poisson(xi) process.
inline std::vector<std::uint8_t> sample_window_bits(double xi, std::span<const double> windows, Engine& engine) {
    std::vector<std::uint8_t> bits(windows.size());
    for (std::size_t n = 0; n < windows.size(); ++n) {
        const double p_change = -std::expm1(-xi * windows[n]);
        bits[n] = open_uniform(engine) < p_change ? 1 : 0;
    }
    return bits;
}

/// CSV export: page_id,stream,time,bit (bit only on refresh rows).
inline void write_trace_csv(std::ostream& out, const SimulationTrace& trace) {
    out << "page_id,stream,time,bit\n";
    out.precision(17);
    for (std::size_t i = 0; i < trace.pages.size(); ++i) {
        const auto& page = trace.pages[i];
        for (double t : page.changes) out << i << ",change," << t << ",\n";
        for (double t : page.requests) out << i << ",request," << t << ",\n";
        for (std::size_t n = 0; n < page.refreshes.size(); ++n)
            out << i << ",refresh," << page.refreshes[n] << ',' << static_cast<int>(page.observations[n]) << '\n';
    }
}

}  // namespace freshcrawl
