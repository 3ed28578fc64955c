#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "freshcrawl/freshcrawl.hpp"

using namespace freshcrawl;

namespace {

PageEnsemble ensemble20() {
    return sample_synthetic_ensemble(SyntheticSpec{20, 0.1, 1.0, 0.5, 1.5, RateBounds{0.1, 1.0}}, 11);
}

EtcConfig sweep_config() {
    EtcConfig c;
    c.bandwidth = 20.0;
    c.horizon = 3000.0;
    c.charge = ExplorationCharge::UniformRate;
    return c;
}

}  // namespace

TEST(FitScaling, PowerLawAndConstant) {
    const std::vector<double> xs{1, 10, 100, 1000};
    std::vector<double> ys;
    for (double x : xs) ys.push_back(3.0 * std::sqrt(x));
    const auto fit = fit_scaling(xs, ys);
    EXPECT_NEAR(fit.slope, 0.5, 1e-12);
    EXPECT_NEAR(fit.intercept, std::log(3.0), 1e-12);
    EXPECT_NEAR(fit.r_squared, 1.0, 1e-12);
    EXPECT_NEAR(fit_scaling(xs, std::vector<double>(4, 2.0)).slope, 0.0, 1e-15);
    EXPECT_THROW(fit_scaling(std::vector<double>{1, 2}, std::vector<double>{1, 2}), Error);
    EXPECT_THROW(fit_scaling(std::vector<double>{1, 2, 0}, std::vector<double>{1, 2, 3}), Error);
}

TEST(FitScaling, TheoreticalTauStarIsSquareRoot) {
    const auto ens = ensemble20();
    std::vector<double> ts, taus;
    for (double e = 2.0; e <= 6.0; e += 0.5) {
        EtcConfig c = sweep_config();
        c.horizon = std::pow(10.0, e);
        ts.push_back(c.horizon);
        taus.push_back(regret_bound_etc(c, ens).tau_star);
    }
    EXPECT_NEAR(fit_scaling(ts, taus).slope, 0.5, 1e-10);
}

TEST(Sweep, TernaryAgreesWithGrid) {
    const auto ens = ensemble20();
    const auto config = sweep_config();
    SweepOptions grid;
    grid.mode = SearchMode::Grid;
    grid.grid = geometric_tau_grid(20, config.bandwidth, config.horizon, 12);
    grid.seeds = 20;
    const auto by_grid = sweep_exploration_horizon(config, ens, grid);
    SweepOptions ternary = grid;
    ternary.mode = SearchMode::Ternary;
    const auto by_ternary = sweep_exploration_horizon(config, ens, ternary);

    const auto& g = grid.grid;
    std::size_t k = 0;
    while (g[k] != by_grid.tau_star) ++k;
    const double below = k > 0 ? g[k] - g[k - 1] : 0.0;
    const double above = k + 1 < g.size() ? g[k + 1] - g[k] : 0.0;
    EXPECT_LE(std::abs(by_ternary.tau_star - by_grid.tau_star), std::max(below, above));
    EXPECT_LE(by_ternary.best.regret.mean, by_grid.best.regret.mean + 1e-9);

    EXPECT_GT(by_grid.points.front().regret.mean, by_grid.best.regret.mean);
    EXPECT_GT(by_grid.points.back().regret.mean, by_grid.best.regret.mean);
    for (std::size_t i = 1; i < by_grid.points.size(); ++i) EXPECT_LT(by_grid.points[i - 1].tau, by_grid.points[i].tau);
}

TEST(Sweep, ParallelMatchesSerial) {
    const auto ens = ensemble20();
    SweepOptions options;
    options.mode = SearchMode::Grid;
    options.grid = {10, 50, 200};
    options.seeds = 16;
    const auto serial = sweep_exploration_horizon(sweep_config(), ens, options);
    options.jobs = 4;
    const auto parallel = sweep_exploration_horizon(sweep_config(), ens, options);
    ASSERT_EQ(serial.points.size(), parallel.points.size());
    for (std::size_t i = 0; i < serial.points.size(); ++i) EXPECT_EQ(serial.points[i].regrets, parallel.points[i].regrets);
    std::ostringstream a, b;
    write_sweep_csv(a, serial);
    write_sweep_csv(b, parallel);
    EXPECT_EQ(a.str(), b.str());
}

TEST(Sweep, GridRejectsTooShortTau) {
    SweepOptions options;
    options.mode = SearchMode::Grid;
    options.grid = {0.1};
    EXPECT_THROW(sweep_exploration_horizon(sweep_config(), ensemble20(), options), Error);
}

TEST(TauGrid, MultiplesOfRoundLength) {
    const auto grid = geometric_tau_grid(100, 30.0, 1e4, 12);
    const double step = 100.0 / 30.0;
    EXPECT_NEAR(grid.front(), step, 1e-12);
    for (double tau : grid) EXPECT_NEAR(tau / step, std::round(tau / step), 1e-9);
}

TEST(Coverage, WidthCoversAtConstantWindows) {
    const std::vector<double> w100(100, 4.0), w400(400, 4.0);
    const auto small = coverage_experiment(EstimatorKind::MomentMatch, w100, 0.5, 0.1, 1000, 3);
    const auto large = coverage_experiment(EstimatorKind::MomentMatch, w400, 0.5, 0.1, 1000, 3);
    EXPECT_LE(small.miss_rate, 0.13);
    EXPECT_LE(large.miss_rate, small.miss_rate + 1e-12);
    EXPECT_EQ(coverage_experiment(EstimatorKind::MLE, w100, 0.5, 0.1, 100, 3).miss_rate, 0.0);
}

TEST(Coverage, FullObservationWidthCovers) {
    const std::vector<double> w(50, 2.0);
    EXPECT_LE(coverage_experiment(EstimatorKind::FullObs, w, 0.4, 0.1, 1000, 4).miss_rate, 0.13);
}

TEST(CompareUiUr, ClosedFormsAndLimits) {
    PageEnsemble one({1.0}, {1.0}, RateBounds{0.1, 1.0});
    const auto c = compare_ui_ur(one, 1.0, 10.0, 0, 1);
    EXPECT_NEAR(c.closed_ui, 6.3212, 1e-4);
    EXPECT_NEAR(c.closed_ur, 5.0, 1e-12);
    PageEnsemble slow({1e-9}, {2.0}, RateBounds{1e-9, 1.0});
    const auto s = compare_ui_ur(slow, 1.0, 10.0, 0, 1);
    EXPECT_NEAR(s.closed_ui, 20.0, 1e-6);
    EXPECT_NEAR(s.closed_ur, 20.0, 1e-6);
}

TEST(CompareUiUr, DominanceAndMonteCarlo) {
    for (std::uint64_t k = 0; k < 100; ++k) {
        const auto ens = sample_synthetic_ensemble(SyntheticSpec{1 + k % 9, 0.05, 3.0, 0.1, 2.0, {0.05, 3.0}}, k);
        const auto c = compare_ui_ur(ens, 0.5 + 0.1 * k, 50.0, 0, 1);
        EXPECT_GE(c.closed_ui, c.closed_ur);
    }
    const auto ens = sample_synthetic_ensemble(SyntheticSpec{5, 0.1, 1.0, 0.5, 1.5, {0.1, 1.0}}, 2);
    const auto c = compare_ui_ur(ens, 5.0, 100.0, 300, 9);
    EXPECT_NEAR(c.mc_ui, c.closed_ui, 3.0 * c.mc_ui_se);
    EXPECT_NEAR(c.mc_ur, c.closed_ur, 3.0 * c.mc_ur_se);
}

TEST(EstimatorComparison, FixedIntervalsMakeEstimatorsCoincide) {
    const auto rows = estimator_comparison({0.15, 0.5, 0.95}, {0.25, 0.75}, {100, 400}, 50, 0.1, 6);
    ASSERT_EQ(rows.size(), 12u);
    for (const auto& r : rows) {
        EXPECT_LE(r.median_gap, 2e-10);
        EXPECT_NEAR(r.mle_q50, r.mm_q50, 2e-10);
        EXPECT_GE(r.bound, r.mm_q75);
    }
    std::ostringstream out;
    write_estimator_csv(out, rows);
    EXPECT_EQ(out.str().rfind("xi,rho,n,", 0), 0u);
}

TEST(SyntheticEnsemble, ReproducibleAndInRange) {
    const auto a = sample_synthetic_ensemble({}, 5);
    const auto b = sample_synthetic_ensemble({}, 5);
    ASSERT_EQ(a.size(), 100u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a.change_rates()[i], b.change_rates()[i]);
        EXPECT_GE(a.change_rates()[i], 0.1);
        EXPECT_LE(a.change_rates()[i], 1.0);
        EXPECT_GE(a.request_rates()[i], 0.5);
        EXPECT_LE(a.request_rates()[i], 1.5);
    }
}

TEST(Quantile, Interpolates) {
    EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(quantile({5}, 0.75), 5.0);
    const auto s = summarize({1, 2, 3});
    EXPECT_DOUBLE_EQ(s.mean, 2.0);
    EXPECT_DOUBLE_EQ(s.stddev, 1.0);
}
