#pragma once

// Baseline policies, burn-in, and the explore-then-commit and phased
// epsilon-greedy controllers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "freshcrawl/allocation.hpp"
#include "freshcrawl/error.hpp"
#include "freshcrawl/estimation.hpp"
#include "freshcrawl/process_sim.hpp"
#include "freshcrawl/random.hpp"

namespace freshcrawl {

/// Time after a policy switch until the stationary utility is within
/// `tolerance` of the exact one: (1/xi_min) ln(2 sum zeta / tolerance).
inline double burn_in_duration(double xi_min, std::span<const double> zeta, double tolerance) {
    detail::require(xi_min > 0.0, "xi_min must be positive");
    detail::require(tolerance > 0.0, "burn-in tolerance must be positive");
    double total = 0.0;
    for (double z : zeta) total += z;
    detail::require(total > 0.0, "total request rate must be positive");
    const double ratio = 2.0 * total / tolerance;
    if (ratio <= 1.0) return 0.0;
    return std::log(ratio) / xi_min;
}

inline Policy uniform_interval_policy(std::size_t m, double bandwidth) {
    detail::require(m >= 1 && bandwidth > 0.0, "uniform policy needs m >= 1 and R > 0");
    return Policy::intervals(std::vector<double>(m, static_cast<double>(m) / bandwidth), bandwidth);
}

inline Policy uniform_rate_policy(std::size_t m, double bandwidth) {
    detail::require(m >= 1 && bandwidth > 0.0, "uniform policy needs m >= 1 and R > 0");
    return Policy::rates(std::vector<double>(m, bandwidth / static_cast<double>(m)), bandwidth);
}

/// How the utility of the exploration phase is charged.
enum class ExplorationCharge {
    IntervalClosedForm,  // uniform-interval closed form
    UniformRate,         // stationary utility of the uniform-rate policy
    ZeroUtility,         // nothing served fresh while exploring
};

enum class SimulationMode {
    Aggregated,  // binomial counts of change-free windows, coupled across tau
    EventLevel,  // full event streams through simulate_page
};

struct EtcConfig {
    double bandwidth = 1.0;
    double horizon = 1.0;
    double delta = 0.1;
    std::optional<double> tau;  // empty: use the rounded theoretical optimum
    ExplorationCharge charge = ExplorationCharge::IntervalClosedForm;
    SimulationMode mode = SimulationMode::Aggregated;
    EstimatorKind estimator = EstimatorKind::MomentMatch;
    // Evaluate the commit phase by simulation instead of the stationary formula.
    bool simulate_commit = false;
    // Replaces the estimates, e.g. with the true rates.
    std::optional<std::vector<double>> injected_estimates;
    double tolerance = 1e-10;
};

struct EtcBound {
    double a = 0.0;
    double b = 0.0;
    double tau_star = 0.0;          // sqrt(B / A) sqrt(T)
    double tau_star_rounded = 0.0;  // rounded up to a multiple of m / R, capped at T
    double bound_at_tau_star = 0.0; // 2 sqrt(ABT) - B
    double leading_bound = 0.0;       // 2 sqrt(ABT)
};

inline double etc_bound_value(double a, double b, double horizon, double tau) {
    detail::require(tau > 0.0, "exploration horizon must be positive");
    return a * tau + b * horizon / tau - b;
}

/// Largest multiple of `step` not exceeding `value`, or 0 when none fits.
inline double round_down_to_multiple(double value, double step) {
    const double ratio = value / step;
    return std::floor(ratio + 1e-9 * std::max(1.0, ratio)) * step;
}

namespace detail {

inline void check_config(const EtcConfig& config, const PageEnsemble& ensemble) {
    require(config.bandwidth > 0.0, "bandwidth must be positive");
    require(config.delta > 0.0 && config.delta < 1.0, "delta must lie in (0, 1)");
    const double step = static_cast<double>(ensemble.size()) / config.bandwidth;
    require(config.horizon >= step * (1.0 - 1e-12), "horizon must cover at least one uniform-interval round");
}

// Round up to a multiple of m / R; a value that then overshoots the horizon
// falls back to the largest multiple that fits.
inline double snap_tau(double tau, double step, double horizon) {
    double snapped = round_up_to_multiple(tau, step);
    if (snapped > horizon * (1.0 + 1e-12)) snapped = round_down_to_multiple(horizon, step);
    return snapped;
}

}  // namespace detail

inline EtcBound regret_bound_etc(const EtcConfig& config, const PageEnsemble& ensemble) {
    detail::check_config(config, ensemble);
    const double m = static_cast<double>(ensemble.size());
    const double r = config.bandwidth;
    const double zeta_sum = ensemble.total_request_rate();
    const double xi_min = ensemble.bounds().xi_min;
    const double xi_max = ensemble.bounds().xi_max;
    EtcBound out;
    out.a = zeta_sum / m;
    out.b = zeta_sum / (2.0 * m * m * xi_min * xi_min) * std::exp(2.0 * xi_max * m / r) * r *
            std::log(2.0 * m / config.delta);
    out.tau_star = std::sqrt(out.b / out.a) * std::sqrt(config.horizon);
    out.tau_star_rounded = detail::snap_tau(out.tau_star, m / r, config.horizon);
    out.leading_bound = 2.0 * std::sqrt(out.a * out.b * config.horizon);
    out.bound_at_tau_star = out.leading_bound - out.b;
    return out;
}

struct RegretRecord {
    std::uint64_t seed = 0;
    double tau = 0.0;
    double horizon = 0.0;
    std::size_t windows_per_page = 0;
    std::vector<double> xi_hat;
    std::vector<double> committed_rates;
    double optimal_objective = 0.0;    // F(rho*; xi)
    double committed_objective = 0.0;  // F(rho_hat; xi)
    double optimal_utility = 0.0;      // T / m F(rho*; xi)
    double exploration_utility = 0.0;
    double commit_utility = 0.0;
    double exploration_regret = 0.0;
    double commit_regret = 0.0;
    double regret = 0.0;
    double theoretical_bound = 0.0;    // A tau + B T / tau - B
    double commit_regret_bound = 0.0;  // (T - tau) / m times the sensitivity bound
};

namespace detail {

inline RateEstimate estimate_with(EstimatorKind kind, std::span<const WindowTally> tallies,
                                  const EstimateOptions& options) {
    if (kind == EstimatorKind::MLE) return mle_estimate(tallies, options);
    if (kind == EstimatorKind::MomentMatch) return moment_match_estimate(tallies, options);
    throw Error(ErrorKind::UnsupportedAnalysis, "partial observations need moment matching or MLE");
}

inline double exploration_utility(ExplorationCharge charge, const PageEnsemble& ensemble, double bandwidth,
                                  double tau) {
    const std::size_t m = ensemble.size();
    const double md = static_cast<double>(m);
    switch (charge) {
        case ExplorationCharge::IntervalClosedForm:
            return expected_utility_interval_policy(std::vector<double>(m, md / bandwidth), ensemble, tau);
        case ExplorationCharge::UniformRate:
            return expected_utility_rate_policy(std::vector<double>(m, bandwidth / md), ensemble, tau);
        case ExplorationCharge::ZeroUtility: return 0.0;
    }
    return 0.0;
}

}  // namespace detail

/// Explore with the uniform-interval policy for tau, estimate every rate,
/// commit to the allocation that is optimal for the estimates until T.
inline RegretRecord run_etc(const EtcConfig& config, const PageEnsemble& ensemble, std::uint64_t rng_seed) {
    detail::check_config(config, ensemble);
    const std::size_t m = ensemble.size();
    const double md = static_cast<double>(m);
    const double r = config.bandwidth;
    const double horizon = config.horizon;
    const double step = md / r;
    const EtcBound bound = regret_bound_etc(config, ensemble);

    double tau = bound.tau_star_rounded;
    if (config.tau) {
        detail::require(*config.tau > 0.0, "exploration horizon must be positive");
        detail::require(*config.tau <= horizon * (1.0 + 1e-12), "exploration horizon exceeds the total horizon");
        tau = detail::snap_tau(*config.tau, step, horizon);
    }
    const auto windows = static_cast<std::size_t>(std::llround(tau / step));

    RegretRecord rec;
    rec.seed = rng_seed;
    rec.tau = tau;
    rec.horizon = horizon;
    rec.windows_per_page = windows;

    EstimateOptions est_options;
    est_options.bounds = ensemble.bounds();
    est_options.delta = config.delta;
    est_options.tolerance = config.tolerance;

    std::vector<PageTrace> exploration_pages;
    if (config.injected_estimates) {
        detail::require(config.injected_estimates->size() == m, "injected estimates differ in page count");
        rec.xi_hat = *config.injected_estimates;
    } else {
        rec.xi_hat.resize(m);
        const Policy explore = uniform_interval_policy(m, r);
        for (std::size_t i = 0; i < m; ++i) {
            const double xi = ensemble.change_rates()[i];
            WindowTally t{step, windows, 0};
            if (config.mode == SimulationMode::Aggregated) {
                Engine engine = make_engine(rng_seed, i, Stream::Exploration);
                t.changed = windows - sample_zero_window_count(xi, step, windows, open_uniform(engine));
            } else {
                SimulationOptions sim;
                sim.simulate_requests = config.simulate_commit;
                auto page = simulate_page(ensemble, i, policy_schedule(explore), Horizon{0.0, tau}, rng_seed, sim);
                detail::require(page.refreshes.size() == windows, "exploration grid size mismatch");
                for (auto bit : page.observations) t.changed += bit;
                if (config.simulate_commit) exploration_pages.push_back(std::move(page));
            }
            const WindowTally tallies[] = {t};
            rec.xi_hat[i] = detail::estimate_with(config.estimator, tallies, est_options).xi_hat;
        }
    }

    const auto zeta = ensemble.request_rates();
    const auto xi = ensemble.change_rates();
    const auto best = solve_freshness_allocation(zeta, xi, r);
    const auto chosen = solve_freshness_allocation(zeta, rec.xi_hat, r);
    rec.committed_rates = chosen.rates;
    rec.optimal_objective = best.objective_value;
    rec.committed_objective = evaluate_objective(ObjectiveKind::Freshness, chosen.rates, zeta, xi).value();
    rec.optimal_utility = horizon / md * rec.optimal_objective;

    const double commit_length = horizon - tau;
    if (config.simulate_commit && config.mode == SimulationMode::EventLevel) {
        rec.exploration_utility = 0.0;
        for (const auto& page : exploration_pages) rec.exploration_utility += fresh_request_count(page);
        rec.exploration_utility /= md;
    } else {
        rec.exploration_utility = detail::exploration_utility(config.charge, ensemble, r, tau);
    }
    rec.exploration_regret = tau / md * rec.optimal_objective - rec.exploration_utility;

    if (commit_length > 0.0) {
        if (config.simulate_commit) {
            SimulationOptions sim;
            sim.initially_fresh.assign(m, true);  // the exploration grid ends with a refresh at tau
            const Policy commit = Policy::rates(rec.committed_rates, r);
            rec.commit_utility = simulated_utility(ensemble, commit, Horizon{tau, horizon},
                                                   derive_seed(rng_seed, 1), sim);
        } else {
            rec.commit_utility = commit_length / md * rec.committed_objective;
        }
        rec.commit_regret = commit_length / md * rec.optimal_objective - rec.commit_utility;
        SensitivityContext context{r, ensemble.bounds().xi_min, ensemble.bounds().xi_max, 0.0};
        rec.commit_regret_bound =
            commit_length / md * suboptimality_bound(ObjectiveKind::Freshness, rec.xi_hat, xi, zeta, context);
    }
    rec.regret = rec.exploration_regret + rec.commit_regret;
    rec.theoretical_bound = etc_bound_value(bound.a, bound.b, horizon, tau);
    return rec;
}

struct PhasedConfig {
    double bandwidth = 1.0;
    double horizon = 1.0;
    double epsilon = 0.1;
    std::size_t phases = 1;
    double burn_in_fraction = 0.01;  // burn-in tolerance as a fraction of sum zeta
    EstimatorKind estimator = EstimatorKind::MomentMatch;
    double tolerance = 1e-10;
};

struct PhaseRecord {
    std::size_t index = 0;
    double start = 0.0;
    double end = 0.0;
    std::vector<double> rates;
    std::vector<double> xi_hat;  // estimates the rates were computed from; empty in phase 1
    double objective = 0.0;      // F(rates; xi)
    double regret = 0.0;
    double cumulative_regret = 0.0;
};

struct PhasedResult {
    std::uint64_t seed = 0;
    double phase_length = 0.0;
    std::vector<PhaseRecord> phases;
    double regret = 0.0;
};

/// Phase 1 runs the uniform-rate policy; every later phase mixes the policy
/// that is optimal for the pooled estimates with the uniform one. All phases
/// except the last last one burn-in period; the last runs until T.
inline PhasedResult run_phased_eps_greedy(const PhasedConfig& config, const PageEnsemble& ensemble,
                                          std::uint64_t rng_seed) {
    detail::require(config.bandwidth > 0.0, "bandwidth must be positive");
    detail::require(config.epsilon > 0.0 && config.epsilon <= 1.0, "epsilon must lie in (0, 1]");
    detail::require(config.phases >= 1, "at least one phase is required");
    detail::require(config.burn_in_fraction > 0.0, "burn-in fraction must be positive");
    const std::size_t m = ensemble.size();
    const double md = static_cast<double>(m);
    const double r = config.bandwidth;
    const auto zeta = ensemble.request_rates();
    const auto xi = ensemble.change_rates();
    const RateBounds bounds = ensemble.bounds();

    PhasedResult out;
    out.seed = rng_seed;
    out.phase_length = burn_in_duration(bounds.xi_min, zeta, config.burn_in_fraction * ensemble.total_request_rate());
    detail::require(out.phase_length * static_cast<double>(config.phases - 1) < config.horizon,
                    "horizon too short for the requested number of phases");

    const double optimal = solve_freshness_allocation(zeta, xi, r).objective_value;
    EstimateOptions est_options;
    est_options.bounds = bounds;
    est_options.tolerance = config.tolerance;

    std::vector<double> rates(m, r / md);
    std::vector<double> xi_hat;
    std::vector<std::vector<double>> windows(m);
    std::vector<std::vector<std::uint8_t>> bits(m);
    std::vector<double> last_refresh(m, 0.0);
    std::vector<Engine> refresh_engines;
    std::vector<Engine> change_engines;
    for (std::size_t i = 0; i < m; ++i) {
        refresh_engines.push_back(make_engine(rng_seed, i, Stream::Refresh));
        change_engines.push_back(make_engine(rng_seed, i, Stream::Observation));
    }

    double t = 0.0;
    for (std::size_t k = 0; k < config.phases; ++k) {
        const bool last = k + 1 == config.phases;
        const double end = last ? config.horizon : t + out.phase_length;
        PhaseRecord phase;
        phase.index = k + 1;
        phase.start = t;
        phase.end = end;
        phase.rates = rates;
        phase.xi_hat = xi_hat;
        phase.objective = evaluate_objective(ObjectiveKind::Freshness, rates, zeta, xi).value();
        phase.regret = (end - t) / md * (optimal - phase.objective);
        out.regret += phase.regret;
        phase.cumulative_regret = out.regret;
        out.phases.push_back(std::move(phase));
        if (last) break;

        // Observations only matter for the policy of the next phase.
        for (std::size_t i = 0; i < m; ++i) {
            if (rates[i] <= 0.0) continue;
            const auto times = sample_poisson_events(rates[i], end - t, refresh_engines[i], t);
            std::vector<double> new_windows;
            new_windows.reserve(times.size());
            for (double y : times) {
                new_windows.push_back(y - last_refresh[i]);
                last_refresh[i] = y;
            }
            const auto new_bits = sample_window_bits(xi[i], new_windows, change_engines[i]);
            windows[i].insert(windows[i].end(), new_windows.begin(), new_windows.end());
            bits[i].insert(bits[i].end(), new_bits.begin(), new_bits.end());
        }
        xi_hat.assign(m, 0.5 * (bounds.xi_min + bounds.xi_max));
        for (std::size_t i = 0; i < m; ++i) {
            if (windows[i].empty()) continue;
            const auto log = ObservationLog::partial(windows[i], bits[i]);
            xi_hat[i] = detail::estimate_with(config.estimator, tally(log), est_options).xi_hat;
        }
        const auto greedy = solve_freshness_allocation(zeta, xi_hat, r);
        for (std::size_t i = 0; i < m; ++i)
            rates[i] = (1.0 - config.epsilon) * greedy.rates[i] + config.epsilon * r / md;
        t = end;
    }
    return out;
}

}  // namespace freshcrawl
