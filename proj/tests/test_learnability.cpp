#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "freshcrawl/freshcrawl.hpp"

using namespace freshcrawl;

TEST(ClassifySchedule, ConstantWindowsAreLearnable) {
    for (double c : {0.1, 0.5, 1.0, 4.0})
        for (double xi : {0.1, 1.0, 5.0})
            EXPECT_EQ(classify_schedule(ScheduleFamily::constant(c), xi), Learnability::Learnable);
}

TEST(ClassifySchedule, LogGrowthDichotomy) {
    EXPECT_EQ(classify_schedule(ScheduleFamily::log_growth(), 2.0), Learnability::NonVanishingBias);
    EXPECT_EQ(classify_schedule(ScheduleFamily::log_growth(), 1.0), Learnability::Learnable);
    EXPECT_EQ(classify_schedule(ScheduleFamily::log_growth(), 0.5), Learnability::Learnable);
}

TEST(ClassifySchedule, PowerGrowth) {
    EXPECT_EQ(classify_schedule(ScheduleFamily::power_growth(0.0), 0.7), Learnability::Learnable);
    for (double xi : {0.01, 1.0, 10.0})
        EXPECT_EQ(classify_schedule(ScheduleFamily::power_growth(1.0), xi), Learnability::NonVanishingBias);
    // Windows n^{-1/2} have divergent total length; n^{-2} do not.
    EXPECT_EQ(classify_schedule(ScheduleFamily::power_growth(-0.5), 1.0), Learnability::Learnable);
    EXPECT_EQ(classify_schedule(ScheduleFamily::power_growth(-2.0), 1.0), Learnability::NonVanishingBias);
}

TEST(ClassifySchedule, ExplicitIsUnsupported) {
    try {
        classify_schedule(ScheduleFamily::explicit_list({1.0, 2.0}), 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::UnsupportedAnalysis);
    }
}

TEST(ScheduleFamily, GeneratesWindows) {
    EXPECT_NEAR(ScheduleFamily::log_growth().window(1), std::log(2.0), 1e-15);
    EXPECT_DOUBLE_EQ(ScheduleFamily::power_growth(1.0).window(3), 3.0);
    EXPECT_EQ(ScheduleFamily::constant(0.5).prefix(3), (std::vector<double>{0.5, 0.5, 0.5}));
}

TEST(GroupIntervals, SmallWindowsExamples) {
    const std::vector<double> half(10, 0.5);
    const auto groups = group_intervals(half, GroupingMode::SmallWindows);
    ASSERT_EQ(groups.size(), 3u);
    EXPECT_EQ(groups[0], (std::vector<std::size_t>{0, 1, 2}));

    const std::vector<double> alternating{0.9, 0.3, 0.9, 0.3, 0.9, 0.3};
    const auto pairs = group_intervals(alternating, GroupingMode::SmallWindows);
    ASSERT_EQ(pairs.size(), 3u);
    for (const auto& g : pairs) {
        ASSERT_EQ(g.size(), 2u);
        EXPECT_NEAR(alternating[g[0]] + alternating[g[1]], 1.2, 1e-15);
    }
}

TEST(GroupIntervals, LargeWindowsAtBoundaryAreSingletons) {
    const std::vector<double> ones(5, 1.0);
    const auto groups = group_intervals(ones, GroupingMode::LargeWindows, 1.0);
    ASSERT_EQ(groups.size(), 5u);
    for (const auto& g : groups) EXPECT_EQ(g.size(), 1u);
}

TEST(GroupIntervals, RangeConstraintsHold) {
    Engine engine(6);
    std::uniform_real_distribution<double> small(0.01, 0.99);
    std::uniform_real_distribution<double> large(1.0, 6.0);
    std::uniform_real_distribution<double> rate(0.3, 3.0);
    for (int k = 0; k < 100; ++k) {
        std::vector<double> w(300);
        for (auto& x : w) x = (engine() % 2) ? small(engine) : large(engine);
        for (const auto& g : group_intervals(w, GroupingMode::SmallWindows)) {
            double s = 0.0;
            for (auto n : g) {
                EXPECT_LT(w[n], 1.0);
                s += w[n];
            }
            EXPECT_GT(s, 1.0);
            EXPECT_LT(s, 2.0);
        }
        const double xi = rate(engine);
        for (const auto& g : group_intervals(w, GroupingMode::LargeWindows, xi)) {
            double s = 0.0;
            for (auto n : g) {
                EXPECT_GE(w[n], 1.0);
                s += std::exp(-xi * w[n]);
            }
            EXPECT_GE(s, std::exp(-1.0));
            EXPECT_LT(s, 2.0 * std::exp(-1.0));
        }
    }
}

TEST(GroupedEstimate, Examples) {
    const std::vector<double> w(6, 0.5);
    const auto groups = group_intervals(w, GroupingMode::SmallWindows);
    const std::vector<std::uint8_t> all{1, 0, 0, 0, 1, 0};
    EXPECT_EQ(grouped_statistic_estimate(groups, w, all, GroupingMode::SmallWindows).xi_hat, 1.0);
    const std::vector<std::uint8_t> half{0, 0, 0, 0, 1, 0};
    const auto est = grouped_statistic_estimate(groups, w, half, GroupingMode::SmallWindows);
    EXPECT_NEAR(est.xi_tilde, std::log(2.0) / 1.5, 1e-10);
    EXPECT_NEAR(est.xi_tilde, 0.46210, 1e-5);
}

TEST(GroupedEstimate, RecoversRateFromSmallWindows) {
    const std::vector<double> w(6000, 0.5);
    const auto groups = group_intervals(w, GroupingMode::SmallWindows);
    ASSERT_EQ(groups.size(), 2000u);
    int close = 0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        Engine engine = make_engine(31, s, Stream::Observation);
        const auto bits = sample_window_bits(0.8, w, engine);
        if (std::abs(grouped_statistic_estimate(groups, w, bits, GroupingMode::SmallWindows).xi_hat - 0.8) <= 0.05)
            ++close;
    }
    EXPECT_GE(close, 190);
}

TEST(GroupedEstimate, RecoversRateFromLargeUniformWindows) {
    const std::vector<double> w(4000, 1.5);
    const auto groups = group_intervals(w, GroupingMode::LargeWindows, 1.0);
    ASSERT_FALSE(groups.empty());
    EXPECT_EQ(groups.front().size(), 2u);
    int close = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        Engine engine = make_engine(32, s, Stream::Observation);
        const auto bits = sample_window_bits(0.6, w, engine);
        if (std::abs(grouped_statistic_estimate(groups, w, bits, GroupingMode::LargeWindows).xi_hat - 0.6) <= 0.05)
            ++close;
    }
    EXPECT_GE(close, 90);
}

TEST(GroupedEstimate, Errors) {
    const std::vector<double> w{1.5, 2.5};
    const std::vector<std::uint8_t> bits{1, 1};
    try {
        grouped_statistic_estimate({}, w, bits, GroupingMode::SmallWindows);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InsufficientData);
    }
    try {
        grouped_statistic_estimate({{0, 1}}, w, bits, GroupingMode::LargeWindows);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::UnsupportedAnalysis);
    }
}
