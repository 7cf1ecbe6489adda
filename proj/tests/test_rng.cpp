#include "stochint/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace stochint;

TEST(Philox, KnownAnswers) {
    using A4 = std::array<std::uint32_t, 4>;
    EXPECT_EQ(philox4x32({0, 0, 0, 0}, {0, 0}), (A4{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
    EXPECT_EQ(philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
              (A4{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
    EXPECT_EQ(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
              (A4{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(NormalQuantile, KnownValues) {
    EXPECT_EQ(normal_quantile(0.5), 0.0);
    EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-15);
    EXPECT_NEAR(normal_quantile(0.025), -1.959963984540054, 1e-15);
    EXPECT_NEAR(normal_quantile(1e-10), -6.361340902404056, 1e-13);
    EXPECT_THROW(normal_quantile(0.0), std::domain_error);
    EXPECT_THROW(normal_quantile(1.0), std::domain_error);
}

TEST(NormalQuantile, InvertsTheCdf) {
    // the CDF through erfc is an independent oracle for every branch
    for (int e = 1; e <= 300; e += 7) {
        for (double m : {1.0, 3.7, 8.9}) {
            const double p = m * std::pow(10.0, -e);
            const double x = normal_quantile(p);
            const double back = 0.5 * std::erfc(-x / std::sqrt(2.0));
            EXPECT_NEAR(back / p, 1.0, 1e-12) << p;
        }
    }
    for (int i = 1; i < 1000; ++i) {
        const double p = i / 1000.0;
        const double back = 0.5 * std::erfc(-normal_quantile(p) / std::sqrt(2.0));
        EXPECT_NEAR(back, p, 1e-15) << p;
    }
}

TEST(RandomStream, DeterministicAndDistinctSubstreams) {
    RandomStream a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        EXPECT_EQ(x, b.next_u64());
        EXPECT_NE(x, c.next_u64());
    }
    const RandomStream root(9);
    std::set<std::uint64_t> firsts;
    for (std::uint64_t p = 0; p < 1000; ++p) {
        RandomStream s = root.substream(p);
        firsts.insert(s.next_u64());
        RandomStream again = root.substream(p);
        RandomStream s2 = root.substream(p);
        EXPECT_EQ(again.next_u64(), s2.next_u64());
    }
    EXPECT_EQ(firsts.size(), 1000u);
}

TEST(RandomStream, UniformsStrictlyInside) {
    RandomStream s(1);
    for (int i = 0; i < 100000; ++i) {
        const double u = s.uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
}

TEST(SamplePanel, ShapeAndDeterminism) {
    const GaussianPanel a = sample_panel(1, 2, 3);
    const GaussianPanel b = sample_panel(1, 2, 3);
    EXPECT_EQ(a.values.size(), 8);
    EXPECT_EQ(a.components(), 2);
    EXPECT_EQ(a.max_index(), 3);
    EXPECT_EQ(a.values, b.values);
    EXPECT_EQ(a(2, 3), a.values(1, 3));
    EXPECT_THROW(sample_panel(1, 0, 3), std::invalid_argument);
    EXPECT_THROW(sample_panel(1, 1, -1), std::invalid_argument);
}

TEST(SamplePanel, MomentsOfOneEntry) {
    const RandomStream root(2024);
    const int n = 1000000;
    double sum = 0.0, sum2 = 0.0, cross = 0.0;
    for (int p = 0; p < n; ++p) {
        RandomStream s = root.substream(static_cast<std::uint64_t>(p));
        const GaussianPanel panel = sample_panel(s, 2, 1);
        const double z = panel(1, 0);
        sum += z;
        sum2 += z * z;
        cross += z * panel(2, 1);
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    EXPECT_NEAR(mean, 0.0, 4e-3);
    EXPECT_NEAR(var, 1.0, 1e-2);
    EXPECT_NEAR(cross / n, 0.0, 4.0 / std::sqrt(double(n)));
}

TEST(TimeGrid, Validation) {
    EXPECT_THROW(TimeGrid({}), std::invalid_argument);
    EXPECT_THROW(TimeGrid({0.0}), std::invalid_argument);
    EXPECT_THROW(TimeGrid({0.0, 0.5, 0.5, 1.0}), std::invalid_argument);
    EXPECT_THROW(TimeGrid({0.0, 0.7, 0.5}), std::invalid_argument);
    EXPECT_THROW(TimeGrid::uniform({0.0, 1.0}, 0), std::invalid_argument);
    const TimeGrid g = TimeGrid::uniform({1.0, 3.0}, 8);
    EXPECT_EQ(g.cells(), 8);
    EXPECT_EQ(g.point(8), 3.0);
    EXPECT_DOUBLE_EQ(g.width(3), 0.25);
}

TEST(SampleGridPath, SingleCellAndTotalVariance) {
    const TimeGrid one({0.0, 2.0});
    const RandomStream root(5);
    const int n = 1000000;
    double s1 = 0.0;
    for (int p = 0; p < n; ++p) {
        RandomStream s = root.substream(static_cast<std::uint64_t>(p));
        const auto path = sample_grid_path(s, 1, one);
        ASSERT_EQ(path.increments.cols(), 1);
        s1 += path.increments(0, 0) * path.increments(0, 0);
    }
    EXPECT_NEAR(s1 / n / 2.0, 1.0, 1e-2);
}

TEST(SampleGridPath, SumOfIncrementsHasIntervalVariance) {
    const TimeGrid grid({0.0, 0.1, 0.15, 0.6, 1.0, 1.5});
    const RandomStream root(11);
    const int n = 1000000;
    double sum2 = 0.0, first2 = 0.0;
    for (int p = 0; p < n; ++p) {
        RandomStream s = root.substream(static_cast<std::uint64_t>(p));
        const auto path = sample_grid_path(s, 2, grid);
        const double total = path.increments.row(1).sum();
        sum2 += total * total;
        first2 += path.increments(0, 2) * path.increments(0, 2);
    }
    EXPECT_NEAR(sum2 / n / 1.5, 1.0, 1e-2);
    EXPECT_NEAR(first2 / n / 0.45, 1.0, 1e-2);
}

TEST(PanelFromPath, ZerothEntryIsScaledIncrement) {
    const Interval iv(0.5, 2.5);
    const TimeGrid grid = TimeGrid::uniform(iv, 1024);
    const auto path = sample_grid_path(3, 2, grid);
    for (BasisKind kind : {BasisKind::Legendre, BasisKind::Trigonometric}) {
        const GaussianPanel panel = panel_from_path(path, {kind, iv}, 5);
        for (int i = 1; i <= 2; ++i)
            EXPECT_NEAR(panel(i, 0), path.increments.row(i - 1).sum() / std::sqrt(2.0), 1e-13);
    }
}

TEST(PanelFromPath, IntervalMismatchRejected) {
    const auto path = sample_grid_path(3, 1, TimeGrid::uniform({0.0, 1.0}, 16));
    EXPECT_THROW(panel_from_path(path, {BasisKind::Legendre, {0.0, 2.0}}, 3), std::invalid_argument);
    EXPECT_THROW(panel_from_path(path, {BasisKind::Legendre, {0.0, 1.0}}, -1), std::invalid_argument);
}

TEST(PanelFromPath, CoupledEntriesAreOrthonormal) {
    const Interval iv(0.0, 1.0);
    const TimeGrid grid = TimeGrid::uniform(iv, 1 << 12);
    const RandomStream root(77);
    const int n = 100000;
    const int batch = 100;
    for (BasisKind kind : {BasisKind::Legendre, BasisKind::Trigonometric}) {
        const PanelProjector proj(grid, {kind, iv}, 4);
        Eigen::MatrixXd moments = Eigen::MatrixXd::Zero(5, 5);
        Eigen::MatrixXd inc(batch, grid.cells());
        for (int p0 = 0; p0 < n; p0 += batch) {
            for (int b = 0; b < batch; ++b) {
                RandomStream s = root.substream(static_cast<std::uint64_t>(p0 + b));
                inc.row(b) = sample_grid_path(s, 1, grid).increments.row(0);
            }
            const Eigen::MatrixXd z = proj.project(inc);
            moments.noalias() += z.transpose() * z;
        }
        moments /= n;
        for (int j = 0; j < 5; ++j)
            for (int k = 0; k < 5; ++k) EXPECT_NEAR(moments(j, k), j == k ? 1.0 : 0.0, 2e-2) << j << "," << k;
    }
}
