#pragma once

// Bandwidth-constrained refresh-rate allocation for the freshness,
// harmonic-staleness and accumulated-delay objectives.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "freshcrawl/error.hpp"
#include "freshcrawl/process_sim.hpp"

namespace freshcrawl {

enum class ObjectiveKind { Freshness, Harmonic, Delay, IntervalFreshness };

/// Objective value with an explicit tag for -infinity.
class ObjectiveValue {
public:
    static ObjectiveValue finite(double v) { return ObjectiveValue(v, false); }
    static ObjectiveValue negative_infinity() { return ObjectiveValue(0.0, true); }

    bool is_negative_infinity() const noexcept { return negative_infinite_; }

    double value() const {
        if (negative_infinite_) throw Error(ErrorKind::Numerical, "objective value is -infinity");
        return value_;
    }

    friend bool operator<(const ObjectiveValue& a, const ObjectiveValue& b) {
        if (a.negative_infinite_) return !b.negative_infinite_;
        if (b.negative_infinite_) return false;
        return a.value_ < b.value_;
    }

private:
    ObjectiveValue(double v, bool neg_inf) : value_(v), negative_infinite_(neg_inf) {}

    double value_;
    bool negative_infinite_;
};

struct AllocationResult {
    std::vector<double> rates;
    double objective_value = 0.0;
    double kkt_residual = 0.0;
    double multiplier = 0.0;  // dual variable of the bandwidth constraint
};

namespace detail {

inline void check_instance(std::span<const double> zeta, std::span<const double> xi, double bandwidth) {
    require(!zeta.empty(), "allocation needs at least one page");
    require(zeta.size() == xi.size(), "request and change rate vectors differ in length");
    require(bandwidth > 0.0 && std::isfinite(bandwidth), "bandwidth must be positive");
    for (std::size_t i = 0; i < zeta.size(); ++i) {
        require(zeta[i] > 0.0 && std::isfinite(zeta[i]), "request rates must be positive");
        require(xi[i] > 0.0 && std::isfinite(xi[i]), "change rates must be positive");
    }
}

inline double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace detail

inline ObjectiveValue evaluate_objective(ObjectiveKind kind, std::span<const double> rho, std::span<const double> zeta,
                                         std::span<const double> xi) {
    detail::require(rho.size() == zeta.size() && rho.size() == xi.size(), "objective inputs differ in length");
    double total = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) {
        detail::require(rho[i] >= 0.0, "refresh rates must be nonnegative");
        switch (kind) {
            case ObjectiveKind::Freshness:
                total += zeta[i] * rho[i] / (rho[i] + xi[i]);
                break;
            case ObjectiveKind::Harmonic:
                if (rho[i] == 0.0) return ObjectiveValue::negative_infinity();
                total += zeta[i] * std::log(rho[i] / (rho[i] + xi[i]));
                break;
            case ObjectiveKind::Delay:
                if (rho[i] == 0.0) return ObjectiveValue::negative_infinity();
                total -= zeta[i] * xi[i] / rho[i];
                break;
            case ObjectiveKind::IntervalFreshness:
                if (rho[i] > 0.0) total += zeta[i] * mean_survival(xi[i] / rho[i]);
                break;
        }
    }
    return ObjectiveValue::finite(total);
}

/// Interval-policy freshness written in terms of refresh intervals.
inline double interval_objective(std::span<const double> kappa, std::span<const double> zeta,
                                 std::span<const double> xi) {
    detail::require(kappa.size() == zeta.size() && kappa.size() == xi.size(), "objective inputs differ in length");
    double total = 0.0;
    for (std::size_t i = 0; i < kappa.size(); ++i) total += zeta[i] * mean_survival(xi[i] * kappa[i]);
    return total;
}

/// Water-filling for max sum zeta rho / (rho + xi) s.t. sum rho = R, rho >= 0.
/// Stationarity gives rho_i = max(0, sqrt(zeta_i xi_i / lambda) - xi_i); pages
/// are activated in decreasing order of zeta_i / xi_i and lambda is solved in
/// closed form for each candidate active set.
inline AllocationResult solve_freshness_allocation(std::span<const double> zeta, std::span<const double> xi,
                                                   double bandwidth) {
    detail::check_instance(zeta, xi, bandwidth);
    const std::size_t m = zeta.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return zeta[a] / xi[a] > zeta[b] / xi[b]; });

    double root_sum = 0.0;
    double xi_sum = 0.0;
    double lambda = 0.0;
    std::size_t active = 0;
    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t i = order[k];
        const double next_root = root_sum + std::sqrt(zeta[i] * xi[i]);
        const double next_xi = xi_sum + xi[i];
        const double scale = next_root / (bandwidth + next_xi);
        const double candidate = scale * scale;
        if (zeta[i] / xi[i] <= candidate) break;
        root_sum = next_root;
        xi_sum = next_xi;
        lambda = candidate;
        active = k + 1;
    }

    AllocationResult result;
    result.multiplier = lambda;
    result.rates.assign(m, 0.0);
    const double inv_sqrt_lambda = (bandwidth + xi_sum) / root_sum;
    for (std::size_t k = 0; k < active; ++k) {
        const std::size_t i = order[k];
        result.rates[i] = std::max(0.0, std::sqrt(zeta[i] * xi[i]) * inv_sqrt_lambda - xi[i]);
    }

    double residual = std::abs(detail::sum(result.rates) - bandwidth) / bandwidth;
    for (std::size_t i = 0; i < m; ++i) {
        if (result.rates[i] > 0.0) {
            const double gradient = zeta[i] * xi[i] / ((result.rates[i] + xi[i]) * (result.rates[i] + xi[i]));
            residual = std::max(residual, std::abs(gradient - lambda) / lambda);
        } else {
            residual = std::max(residual, std::max(0.0, zeta[i] / xi[i] - lambda) / lambda);
        }
    }
    result.kkt_residual = residual;
    result.objective_value = evaluate_objective(ObjectiveKind::Freshness, result.rates, zeta, xi).value();
    return result;
}

/// max sum zeta ln(rho / (rho + xi)) s.t. sum rho = R. Every page is active;
/// the per-page stationarity condition zeta xi / (rho (rho + xi)) = lambda is a
/// quadratic in rho and lambda is found by bisection in log space.
inline AllocationResult solve_harmonic_allocation(std::span<const double> zeta, std::span<const double> xi,
                                                  double bandwidth) {
    detail::check_instance(zeta, xi, bandwidth);
    const std::size_t m = zeta.size();
    auto rate_at = [&](std::size_t i, double lambda) {
        const double c = 4.0 * zeta[i] * xi[i] / lambda;
        // Rationalized root of rho^2 + xi rho - zeta xi / lambda = 0.
        return c / (2.0 * (xi[i] + std::sqrt(xi[i] * xi[i] + c)));
    };
    auto total_at = [&](double lambda) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += rate_at(i, lambda);
        return s;
    };

    double scale = 0.0;
    for (std::size_t i = 0; i < m; ++i) scale = std::max(scale, zeta[i] * xi[i]);
    const double md = static_cast<double>(m);
    double hi = scale * md * md / (bandwidth * bandwidth) + scale;
    double lo = hi;
    while (total_at(hi) > bandwidth) hi *= 4.0;
    while (total_at(lo) < bandwidth) lo /= 4.0;

    double lambda = std::sqrt(lo * hi);
    for (int iter = 0; iter < 400; ++iter) {
        lambda = std::sqrt(lo * hi);
        const double total = total_at(lambda);
        if (std::abs(total - bandwidth) <= 1e-12 * bandwidth) break;
        if (total > bandwidth)
            lo = lambda;
        else
            hi = lambda;
        if (hi / lo - 1.0 < 1e-15) break;
    }

    AllocationResult result;
    result.multiplier = lambda;
    result.rates.resize(m);
    for (std::size_t i = 0; i < m; ++i) result.rates[i] = rate_at(i, lambda);

    double residual = std::abs(detail::sum(result.rates) - bandwidth) / bandwidth;
    for (std::size_t i = 0; i < m; ++i) {
        const double rho = result.rates[i];
        const double gradient = zeta[i] * xi[i] / (rho * (rho + xi[i]));
        residual = std::max(residual, std::abs(gradient - lambda) / lambda);
    }
    result.kkt_residual = residual;
    result.objective_value = evaluate_objective(ObjectiveKind::Harmonic, result.rates, zeta, xi).value();
    return result;
}

/// max -sum zeta xi / rho s.t. sum rho = R: rho_i proportional to sqrt(zeta_i xi_i).
inline AllocationResult solve_delay_allocation(std::span<const double> zeta, std::span<const double> xi,
                                               double bandwidth) {
    detail::check_instance(zeta, xi, bandwidth);
    const std::size_t m = zeta.size();
    std::vector<double> roots(m);
    for (std::size_t i = 0; i < m; ++i) roots[i] = std::sqrt(zeta[i] * xi[i]);
    const double root_sum = detail::sum(roots);

    AllocationResult result;
    result.rates.resize(m);
    for (std::size_t i = 0; i < m; ++i) result.rates[i] = bandwidth * roots[i] / root_sum;
    result.multiplier = root_sum * root_sum / (bandwidth * bandwidth);

    double residual = std::abs(detail::sum(result.rates) - bandwidth) / bandwidth;
    for (std::size_t i = 0; i < m; ++i) {
        const double gradient = zeta[i] * xi[i] / (result.rates[i] * result.rates[i]);
        residual = std::max(residual, std::abs(gradient - result.multiplier) / result.multiplier);
    }
    result.kkt_residual = residual;
    result.objective_value = evaluate_objective(ObjectiveKind::Delay, result.rates, zeta, xi).value();
    return result;
}

/// Closed-form optimum of the delay objective, -(sum sqrt(zeta xi))^2 / R.
inline double optimal_delay_objective(std::span<const double> zeta, std::span<const double> xi, double bandwidth) {
    detail::check_instance(zeta, xi, bandwidth);
    double root_sum = 0.0;
    for (std::size_t i = 0; i < zeta.size(); ++i) root_sum += std::sqrt(zeta[i] * xi[i]);
    return -root_sum * root_sum / bandwidth;
}

inline AllocationResult solve_allocation(ObjectiveKind kind, std::span<const double> zeta, std::span<const double> xi,
                                         double bandwidth) {
    switch (kind) {
        case ObjectiveKind::Freshness: return solve_freshness_allocation(zeta, xi, bandwidth);
        case ObjectiveKind::Harmonic: return solve_harmonic_allocation(zeta, xi, bandwidth);
        case ObjectiveKind::Delay: return solve_delay_allocation(zeta, xi, bandwidth);
        case ObjectiveKind::IntervalFreshness: break;
    }
    throw Error(ErrorKind::UnsupportedAnalysis, "interval freshness has no allocation solver");
}

/// Quantities the sensitivity bounds need beyond the rate vectors.
struct SensitivityContext {
    double bandwidth = 1.0;
    double xi_min = 0.1;
    double xi_max = 1.0;
    double zeta_min = 0.0;  // 0 means: take the minimum of the supplied request rates
};

/// Upper bound on obj(rho*; xi) - obj(rho_hat; xi) when rho_hat is optimal for
/// the estimates xi_hat.
inline double suboptimality_bound(ObjectiveKind kind, std::span<const double> xi_hat, std::span<const double> xi,
                                  std::span<const double> zeta, const SensitivityContext& context) {
    detail::require(xi_hat.size() == xi.size() && xi.size() == zeta.size(), "bound inputs differ in length");
    const std::size_t m = xi.size();
    switch (kind) {
        case ObjectiveKind::Freshness: {
            double total = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const double d = xi_hat[i] - xi[i];
                total += zeta[i] * d * d / (xi_hat[i] * std::min(xi_hat[i], xi[i]));
            }
            return total;
        }
        case ObjectiveKind::Harmonic: {
            const double r = context.bandwidth;
            const double lo = context.xi_min;
            double total = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const double d = xi[i] - xi_hat[i];
                total += zeta[i] * d * d;
            }
            return (lo + r) * r * r / std::pow(lo, 5) * total;
        }
        case ObjectiveKind::Delay: {
            double zeta_min = context.zeta_min;
            if (zeta_min <= 0.0) zeta_min = *std::min_element(zeta.begin(), zeta.end());
            double root_sum = 0.0;
            double squares = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                root_sum += std::sqrt(zeta[i]);
                const double d = xi[i] - xi_hat[i];
                squares += d * d;
            }
            const double constant = context.xi_max * context.xi_max * std::pow(root_sum, 4) /
                                    (context.bandwidth * zeta_min * std::pow(context.xi_min, 3));
            return constant * squares;
        }
        case ObjectiveKind::IntervalFreshness: break;
    }
    throw Error(ErrorKind::UnsupportedAnalysis, "interval freshness admits no quadratic sensitivity bound");
}

/// obj(rho*(xi); xi) - obj(rho*(xi_hat); xi).
inline double realized_suboptimality(ObjectiveKind kind, std::span<const double> xi_hat, std::span<const double> xi,
                                     std::span<const double> zeta, double bandwidth) {
    const auto best = solve_allocation(kind, zeta, xi, bandwidth);
    const auto chosen = solve_allocation(kind, zeta, xi_hat, bandwidth);
    const auto achieved = evaluate_objective(kind, chosen.rates, zeta, xi);
    return best.objective_value - achieved.value();
}

}  // namespace freshcrawl
