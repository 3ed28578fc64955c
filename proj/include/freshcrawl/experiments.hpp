#pragma once

// Experiment drivers: exploration-horizon sweeps, scaling fits, coverage
// studies and estimator comparisons. Every result is a pure function of the
// configuration and the root seed.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>
#include <vector>

#include "freshcrawl/allocation.hpp"
#include "freshcrawl/error.hpp"
#include "freshcrawl/estimation.hpp"
#include "freshcrawl/policies.hpp"
#include "freshcrawl/process_sim.hpp"
#include "freshcrawl/random.hpp"

namespace freshcrawl {

struct SyntheticSpec {
    std::size_t pages = 100;
    double xi_low = 0.1;
    double xi_high = 1.0;
    double zeta_low = 0.5;
    double zeta_high = 1.5;
    RateBounds bounds{0.1, 1.0};
};

inline PageEnsemble sample_synthetic_ensemble(const SyntheticSpec& spec, std::uint64_t seed) {
    detail::require(spec.pages >= 1, "synthetic ensemble needs at least one page");
    detail::require(spec.xi_low > 0.0 && spec.xi_low <= spec.xi_high, "invalid change-rate range");
    detail::require(spec.zeta_low > 0.0 && spec.zeta_low <= spec.zeta_high, "invalid request-rate range");
    Engine engine = make_engine(seed, 0, Stream::Ensemble);
    std::uniform_real_distribution<double> xi_dist(spec.xi_low, spec.xi_high);
    std::uniform_real_distribution<double> zeta_dist(spec.zeta_low, spec.zeta_high);
    std::vector<double> xi(spec.pages);
    std::vector<double> zeta(spec.pages);
    for (std::size_t i = 0; i < spec.pages; ++i) {
        xi[i] = spec.bounds.clamp(xi_dist(engine));
        zeta[i] = zeta_dist(engine);
    }
    return PageEnsemble(std::move(xi), std::move(zeta), spec.bounds);
}

/// Runs fn(0..count-1) on `jobs` threads. Callers write results by index, so
/// output order never depends on scheduling. The first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t jobs, Fn&& fn) {
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    for (std::size_t j = 0; j < std::min(jobs, count); ++j) threads.emplace_back(worker);
    for (auto& th : threads) th.join();
    if (failure) std::rethrow_exception(failure);
}

inline std::vector<std::uint64_t> seed_list(std::uint64_t root, std::size_t count) {
    std::vector<std::uint64_t> seeds(count);
    for (std::size_t k = 0; k < count; ++k) seeds[k] = derive_seed(root, k);
    return seeds;
}

struct SummaryStats {
    double mean = 0.0;
    double stddev = 0.0;
    double median = 0.0;
};

inline double quantile(std::vector<double> values, double q) {
    detail::require(!values.empty(), "quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline SummaryStats summarize(const std::vector<double>& values) {
    detail::require(!values.empty(), "summary of an empty sample");
    SummaryStats s;
    for (double v : values) s.mean += v;
    s.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    s.median = quantile(values, 0.5);
    return s;
}

enum class SearchMode { Grid, Ternary };

struct SweepOptions {
    SearchMode mode = SearchMode::Ternary;
    std::vector<double> grid;  // exploration horizons for Grid mode
    std::size_t seeds = 50;
    std::uint64_t root_seed = 1;
    std::size_t jobs = 1;
};

struct SweepPoint {
    double tau = 0.0;
    SummaryStats regret;
    std::vector<double> regrets;  // one per seed, in seed order
};

struct SweepResult {
    std::vector<SweepPoint> points;  // sorted by tau
    double tau_star = 0.0;
    SweepPoint best;
};

/// `count` multiples of m / R spread geometrically over [m / R, fraction T].
inline std::vector<double> geometric_tau_grid(std::size_t m, double bandwidth, double horizon, std::size_t count,
                                              double fraction = 0.5) {
    detail::require(count >= 2, "a tau grid needs at least two points");
    const double step = static_cast<double>(m) / bandwidth;
    const double top = std::max(step, round_down_to_multiple(fraction * horizon, step));
    std::vector<double> grid;
    for (std::size_t k = 0; k < count; ++k) {
        const double x = step * std::pow(top / step, static_cast<double>(k) / static_cast<double>(count - 1));
        const double snapped = std::max(1.0, std::round(x / step)) * step;
        if (grid.empty() || snapped > grid.back() * (1.0 + 1e-12)) grid.push_back(snapped);
    }
    return grid;
}

/// Mean regret over seeds as a function of the exploration horizon. Ternary
/// mode searches the integer multiples of m / R in [m / R, T) assuming a
/// unimodal curve, stops at a bracket of at most two multiples and finishes
/// with a scan of what is left. Evaluations are memoized.
inline SweepResult sweep_exploration_horizon(const EtcConfig& base, const PageEnsemble& ensemble,
                                             const SweepOptions& options) {
    detail::require(options.seeds >= 1, "at least one seed is required");
    const double step = static_cast<double>(ensemble.size()) / base.bandwidth;
    const auto seeds = seed_list(options.root_seed, options.seeds);
    std::map<long long, SweepPoint> cache;

    auto evaluate = [&](long long multiple) -> const SweepPoint& {
        auto it = cache.find(multiple);
        if (it != cache.end()) return it->second;
        SweepPoint point;
        point.tau = static_cast<double>(multiple) * step;
        point.regrets.resize(seeds.size());
        EtcConfig config = base;
        config.tau = point.tau;
        parallel_for(seeds.size(), options.jobs,
                     [&](std::size_t k) { point.regrets[k] = run_etc(config, ensemble, seeds[k]).regret; });
        point.regret = summarize(point.regrets);
        return cache.emplace(multiple, std::move(point)).first->second;
    };

    if (options.mode == SearchMode::Grid) {
        detail::require(!options.grid.empty(), "grid mode needs at least one exploration horizon");
        for (double tau : options.grid) {
            detail::require(tau >= step * (1.0 - 1e-9), "grid exploration horizons must be at least m / R");
            detail::require(tau <= base.horizon * (1.0 + 1e-12), "grid exploration horizon exceeds the horizon");
            evaluate(std::llround(round_up_to_multiple(tau, step) / step));
        }
    } else {
        long long lo = 1;
        long long hi = std::max<long long>(1, std::llround(round_down_to_multiple(base.horizon, step) / step));
        if (hi > 1 && static_cast<double>(hi) * step >= base.horizon * (1.0 - 1e-12)) --hi;  // keep tau < T
        while (hi - lo > 2) {
            const long long third = (hi - lo) / 3;
            const long long m1 = lo + third;
            const long long m2 = hi - third;
            if (evaluate(m1).regret.mean < evaluate(m2).regret.mean)
                hi = m2;
            else
                lo = m1;
        }
        for (long long k = lo; k <= hi; ++k) evaluate(k);
    }

    SweepResult result;
    for (auto& [multiple, point] : cache) result.points.push_back(point);
    result.best = *std::min_element(result.points.begin(), result.points.end(), [](const auto& a, const auto& b) {
        return a.regret.mean < b.regret.mean;
    });
    result.tau_star = result.best.tau;
    return result;
}

struct ScalingFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

/// Least squares on (ln x, ln y).
inline ScalingFit fit_scaling(std::span<const double> xs, std::span<const double> ys) {
    detail::require(xs.size() == ys.size(), "fit inputs differ in length");
    detail::require(xs.size() >= 3, "a scaling fit needs at least three points");
    const double n = static_cast<double>(xs.size());
    double sx = 0.0, sy = 0.0;
    std::vector<double> lx(xs.size()), ly(ys.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        detail::require(xs[i] > 0.0 && ys[i] > 0.0, "scaling fit needs positive values");
        lx[i] = std::log(xs[i]);
        ly[i] = std::log(ys[i]);
        sx += lx[i];
        sy += ly[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    detail::require(sxx > 0.0, "scaling fit needs at least two distinct x values");
    ScalingFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

struct ScalingRow {
    double bandwidth = 0.0;
    double horizon = 0.0;
    double tau_star = 0.0;
    double regret = 0.0;  // mean regret at tau_star
    double normalized_regret = 0.0;
};

struct ScalingResult {
    std::vector<ScalingRow> rows;  // sorted by bandwidth then horizon
    std::vector<double> bandwidths;
    std::vector<ScalingFit> tau_fits;     // one per bandwidth
    std::vector<ScalingFit> regret_fits;  // normalized regret vs T, one per bandwidth
};

inline ScalingResult scaling_experiment(const EtcConfig& base, const PageEnsemble& ensemble,
                                        const std::vector<double>& bandwidths, const std::vector<double>& horizons,
                                        const SweepOptions& options) {
    detail::require(!bandwidths.empty(), "scaling needs at least one bandwidth");
    for (std::size_t k = 1; k < horizons.size(); ++k)
        detail::require(horizons[k] > horizons[k - 1], "horizons must be strictly increasing");
    ScalingResult out;
    out.bandwidths = bandwidths;
    for (double r : bandwidths) {
        std::vector<double> ts, taus, norm;
        for (double t : horizons) {
            EtcConfig config = base;
            config.bandwidth = r;
            config.horizon = t;
            SweepOptions sweep = options;
            sweep.mode = SearchMode::Ternary;
            const auto result = sweep_exploration_horizon(config, ensemble, sweep);
            ScalingRow row{r, t, result.tau_star, result.best.regret.mean, result.best.regret.mean / t};
            out.rows.push_back(row);
            ts.push_back(t);
            taus.push_back(row.tau_star);
            norm.push_back(row.normalized_regret);
        }
        out.tau_fits.push_back(fit_scaling(ts, taus));
        bool positive = std::all_of(norm.begin(), norm.end(), [](double v) { return v > 0.0; });
        if (!positive) throw Error(ErrorKind::Numerical, "normalized regret is not positive; log-log fit undefined");
        out.regret_fits.push_back(fit_scaling(ts, norm));
    }
    return out;
}

struct CoverageResult {
    std::size_t trials = 0;
    std::size_t misses = 0;
    double miss_rate = 0.0;
    double width = 0.0;  // width of the first trial (identical across trials for a fixed schedule)
};

/// Fraction of runs where |xi_hat - xi| exceeds the estimator's confidence
/// width. Observations are drawn window by window for the fixed schedule.
inline CoverageResult coverage_experiment(EstimatorKind kind, std::span<const double> windows, double xi,
                                          double delta, std::size_t trials, std::uint64_t seed,
                                          RateBounds bounds = {}) {
    detail::require(trials >= 1, "coverage needs at least one trial");
    detail::require(!windows.empty(), "coverage needs a non-empty schedule");
    EstimateOptions options;
    options.bounds = bounds;
    options.delta = delta;
    CoverageResult out;
    out.trials = trials;
    for (std::size_t k = 0; k < trials; ++k) {
        Engine engine = make_engine(seed, k, Stream::Observation);
        RateEstimate est;
        if (kind == EstimatorKind::FullObs) {
            std::vector<std::uint64_t> counts(windows.size());
            for (std::size_t n = 0; n < windows.size(); ++n) {
                std::poisson_distribution<std::uint64_t> count(xi * windows[n]);
                counts[n] = count(engine);
            }
            est = full_obs_estimate(ObservationLog::full({windows.begin(), windows.end()}, counts), options);
        } else {
            const auto log =
                ObservationLog::partial({windows.begin(), windows.end()}, sample_window_bits(xi, windows, engine));
            est = detail::estimate_with(kind, tally(log), options);
        }
        if (k == 0) out.width = est.confidence_width;
        if (std::abs(est.xi_hat - xi) > est.confidence_width) ++out.misses;
    }
    out.miss_rate = static_cast<double>(out.misses) / static_cast<double>(trials);
    return out;
}

struct UiUrComparison {
    double closed_ui = 0.0;
    double closed_ur = 0.0;
    double mc_ui = 0.0;
    double mc_ui_se = 0.0;
    double mc_ur = 0.0;
    double mc_ur_se = 0.0;
};

/// Closed-form and simulated utilities of the uniform-interval and
/// uniform-rate policies over [0, tau]. Each simulation starts from the state
/// its closed form assumes: a fresh copy for the interval grid (as if
/// refreshed at 0) and the stationary fresh probability for Poisson refreshes.
inline UiUrComparison compare_ui_ur(const PageEnsemble& ensemble, double bandwidth, double tau, std::size_t seeds,
                                    std::uint64_t root_seed, std::size_t jobs = 1) {
    const std::size_t m = ensemble.size();
    const double step = static_cast<double>(m) / bandwidth;
    const double tau_used = round_up_to_multiple(tau, step);
    const Policy ui = uniform_interval_policy(m, bandwidth);
    const Policy ur = uniform_rate_policy(m, bandwidth);
    UiUrComparison out;
    out.closed_ui = expected_utility_interval_policy(ui.values(), ensemble, tau_used);
    out.closed_ur = expected_utility_rate_policy(ur.values(), ensemble, tau_used);
    if (seeds == 0) return out;

    const auto seed_values = seed_list(root_seed, seeds);
    std::vector<double> ui_values(seeds), ur_values(seeds);
    parallel_for(seeds, jobs, [&](std::size_t k) {
        const Horizon horizon{0.0, tau_used};
        SimulationOptions fresh;
        fresh.initially_fresh.assign(m, true);
        ui_values[k] = simulated_utility(ensemble, ui, horizon, seed_values[k], fresh);

        SimulationOptions stationary;
        stationary.initially_fresh.resize(m);
        for (std::size_t i = 0; i < m; ++i) {
            Engine engine = make_engine(seed_values[k], i, Stream::Exploration);
            const double rho = ur.values()[i];
            stationary.initially_fresh[i] = open_uniform(engine) < rho / (rho + ensemble.change_rates()[i]);
        }
        ur_values[k] = simulated_utility(ensemble, ur, horizon, seed_values[k], stationary);
    });
    const auto ui_stats = summarize(ui_values);
    const auto ur_stats = summarize(ur_values);
    const double root_n = std::sqrt(static_cast<double>(seeds));
    out.mc_ui = ui_stats.mean;
    out.mc_ui_se = ui_stats.stddev / root_n;
    out.mc_ur = ur_stats.mean;
    out.mc_ur_se = ur_stats.stddev / root_n;
    return out;
}

struct EstimatorRow {
    double xi = 0.0;
    double rho = 0.0;  // refresh rate; the window is 1 / rho
    std::size_t observations = 0;
    double mle_q25 = 0.0, mle_q50 = 0.0, mle_q75 = 0.0;
    double mm_q25 = 0.0, mm_q50 = 0.0, mm_q75 = 0.0;
    double median_gap = 0.0;  // median |MLE - moment matching|
    double bound = 0.0;       // moment-matching confidence width
};

/// Absolute-error quantiles of both partial-observation estimators on fixed
/// refresh intervals 1 / rho.
inline std::vector<EstimatorRow> estimator_comparison(const std::vector<double>& xis, const std::vector<double>& rhos,
                                                      const std::vector<std::size_t>& sizes, std::size_t seeds,
                                                      double delta, std::uint64_t root_seed, RateBounds bounds = {},
                                                      std::size_t jobs = 1) {
    detail::require(seeds >= 1, "estimator comparison needs at least one seed");
    struct Point {
        double xi, rho;
        std::size_t n;
    };
    std::vector<Point> points;
    for (double xi : xis)
        for (double rho : rhos)
            for (std::size_t n : sizes) {
                detail::require(rho > 0.0 && n >= 1 && xi > 0.0, "invalid estimator comparison grid");
                points.push_back({xi, rho, n});
            }
    EstimateOptions options;
    options.bounds = bounds;
    options.delta = delta;

    std::vector<EstimatorRow> rows(points.size());
    parallel_for(points.size(), jobs, [&](std::size_t p) {
        const auto& pt = points[p];
        const double w = 1.0 / pt.rho;
        std::vector<double> mle_err(seeds), mm_err(seeds), gap(seeds);
        for (std::size_t k = 0; k < seeds; ++k) {
            Engine engine = make_engine(derive_seed(root_seed, p), k, Stream::Observation);
            const std::size_t zeros = sample_zero_window_count(pt.xi, w, pt.n, open_uniform(engine));
            const WindowTally tallies[] = {{w, pt.n, pt.n - zeros}};
            const double mle = mle_estimate(tallies, options).xi_hat;
            const double mm = moment_match_estimate(tallies, options).xi_hat;
            mle_err[k] = std::abs(mle - pt.xi);
            mm_err[k] = std::abs(mm - pt.xi);
            gap[k] = std::abs(mle - mm);
        }
        EstimatorRow row;
        row.xi = pt.xi;
        row.rho = pt.rho;
        row.observations = pt.n;
        row.mle_q25 = quantile(mle_err, 0.25);
        row.mle_q50 = quantile(mle_err, 0.5);
        row.mle_q75 = quantile(mle_err, 0.75);
        row.mm_q25 = quantile(mm_err, 0.25);
        row.mm_q50 = quantile(mm_err, 0.5);
        row.mm_q75 = quantile(mm_err, 0.75);
        row.median_gap = quantile(gap, 0.5);
        const std::vector<double> ws(pt.n, w);
        row.bound = confidence_width_partial(ws, bounds.xi_max, delta);
        rows[p] = row;
    });
    return rows;
}

// CSV writers. Rows follow the order of the result containers.

inline void write_sweep_csv(std::ostream& out, const SweepResult& result) {
    out << "tau,mean_regret,std_regret,median_regret,seeds\n";
    out.precision(12);
    for (const auto& p : result.points)
        out << p.tau << ',' << p.regret.mean << ',' << p.regret.stddev << ',' << p.regret.median << ','
            << p.regrets.size() << '\n';
}

inline void write_scaling_csv(std::ostream& out, const ScalingResult& result) {
    out << "bandwidth,horizon,tau_star,mean_regret,normalized_regret\n";
    out.precision(12);
    for (const auto& r : result.rows)
        out << r.bandwidth << ',' << r.horizon << ',' << r.tau_star << ',' << r.regret << ',' << r.normalized_regret
            << '\n';
}

inline void write_estimator_csv(std::ostream& out, const std::vector<EstimatorRow>& rows) {
    out << "xi,rho,n,mle_q25,mle_q50,mle_q75,mm_q25,mm_q50,mm_q75,median_gap,bound\n";
    out.precision(12);
    for (const auto& r : rows)
        out << r.xi << ',' << r.rho << ',' << r.observations << ',' << r.mle_q25 << ',' << r.mle_q50 << ','
            << r.mle_q75 << ',' << r.mm_q25 << ',' << r.mm_q50 << ',' << r.mm_q75 << ',' << r.median_gap << ','
            << r.bound << '\n';
}

inline void write_phases_csv(std::ostream& out, const std::vector<PhasedResult>& runs) {
    out << "seed,phase,start,end,objective,regret,cumulative_regret\n";
    out.precision(12);
    for (const auto& run : runs)
        for (const auto& p : run.phases)
            out << run.seed << ',' << p.index << ',' << p.start << ',' << p.end << ',' << p.objective << ','
                << p.regret << ',' << p.cumulative_regret << '\n';
}

}  // namespace freshcrawl
