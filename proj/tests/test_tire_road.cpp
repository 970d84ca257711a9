#include <tcsim/tire_road.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace tcsim;

namespace {

// Independent evaluation of the Magic Formula for the oracles below.
double magic(double B, double C, double D, double E, double x) {
    const double bx = B * x;
    return D * std::sin(C * std::atan(bx - E * (bx - std::atan(bx))));
}

double dense_peak_lambda(const MuLambdaCurve& c, int n) {
    double best = -1.0, arg = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double x = static_cast<double>(i) / n;
        const double v = magic(c.B, c.C, c.D, c.E, x);
        if (v > best) {
            best = v;
            arg = x;
        }
    }
    return arg;
}

}  // namespace

TEST(RoadType, FourVariantsInStableOrder) {
    ASSERT_EQ(kAllRoads.size(), 4u);
    for (std::size_t i = 0; i < kAllRoads.size(); ++i) EXPECT_EQ(index_of(kAllRoads[i]), i);
}

TEST(RoadType, NamesRoundTrip) {
    for (RoadType r : kAllRoads) EXPECT_EQ(parse_road(to_string(r)), r);
    EXPECT_EQ(parse_road("SNOW"), RoadType::Snow);
    EXPECT_FALSE(parse_road("ice").has_value());
}

TEST(Mu, ZeroAtZeroSlip) {
    for (RoadType r : kAllRoads) EXPECT_EQ(mu(default_curves().curve(r), 0.0), 0.0);
}

TEST(Mu, AsphaltSweepPeaksNearD) {
    const auto& c = default_curves().curve(RoadType::Asphalt);
    double best = 0.0;
    for (int i = 0; i <= 10000; ++i) best = std::max(best, magic(c.B, c.C, c.D, c.E, i / 10000.0));
    EXPECT_NEAR(best, c.D, 0.02 * c.D);
    double ours = 0.0;
    for (int i = 0; i <= 10000; ++i) ours = std::max(ours, mu(c, i / 10000.0));
    EXPECT_DOUBLE_EQ(ours, best);
}

TEST(Mu, OddInSlip) {
    for (RoadType r : kAllRoads) {
        const auto& c = default_curves().curve(r);
        for (double x : {0.1, 0.3}) EXPECT_DOUBLE_EQ(mu(c, -x), -mu(c, x));
    }
}

TEST(Mu, BoundedBetweenZeroAndPeakFactorOnDrivingSide) {
    for (RoadType r : kAllRoads) {
        const auto& c = default_curves().curve(r);
        for (int i = 0; i <= 2000; ++i) {
            const double v = mu(c, i / 2000.0);
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, c.D);
        }
    }
}

TEST(Mu, SlipClampedToUnitInterval) {
    const auto& c = default_curves().curve(RoadType::Gravel);
    EXPECT_EQ(mu(c, 3.0), mu(c, 1.0));
    EXPECT_EQ(mu(c, -3.0), mu(c, -1.0));
}

TEST(Mu, AnalyticSlopeMatchesFiniteDifference) {
    for (RoadType r : kAllRoads) {
        const auto& c = default_curves().curve(r);
        for (double x : {0.0, 0.02, 0.1, 0.4, 0.8}) {
            const double h = 1e-6;
            const double fd = (magic(c.B, c.C, c.D, c.E, x + h) - magic(c.B, c.C, c.D, c.E, x - h)) / (2 * h);
            EXPECT_NEAR(mu_slope(c, x), fd, 1e-5 * std::max(1.0, std::abs(fd))) << to_string(r) << " at " << x;
        }
    }
}

TEST(Curve, ValidationRejectsOutOfRangeFactors) {
    EXPECT_THROW(validate(MuLambdaCurve{10, 1.9, 0.0, 0.97}), ConfigError);
    EXPECT_THROW(validate(MuLambdaCurve{10, 1.9, 1.6, 0.97}), ConfigError);
    EXPECT_THROW(validate(MuLambdaCurve{-1, 1.9, 1.0, 0.97}), ConfigError);
    EXPECT_THROW(validate(MuLambdaCurve{10, 3.0, 1.0, 0.97}), ConfigError);
    EXPECT_THROW(validate(MuLambdaCurve{10, 1.0, 1.0, 0.97}), ConfigError);
    EXPECT_NO_THROW(validate(kAsphaltCurve));
}

TEST(Table, SnowPeakWithinOneCellOfD) {
    const auto t = build_table(RoadType::Snow, 256);
    const auto& c = default_curves().curve(RoadType::Snow);
    // dense oracle: the true peak is D; the grid misses it by at most one cell of slope
    double max_slope = 0.0;
    for (int i = 0; i <= 100000; ++i) max_slope = std::max(max_slope, std::abs(mu_slope(c, i / 100000.0)));
    EXPECT_LE(t.mu_peak, c.D);
    EXPECT_GE(t.mu_peak, c.D - max_slope / 255.0);
}

TEST(Table, CoarseAndFineOptimaAgree) {
    const auto coarse = build_table(RoadType::Asphalt, 64);
    const auto fine = build_table(RoadType::Asphalt, 4096);
    EXPECT_NEAR(coarse.lambda_opt, fine.lambda_opt, 2.0 / 64.0);
}

TEST(Table, GridShape) {
    for (RoadType r : kAllRoads) {
        const auto t = build_table(r, 64);
        ASSERT_EQ(t.lambda_grid.size(), 64u);
        ASSERT_EQ(t.mu_values.size(), 64u);
        EXPECT_EQ(t.lambda_grid.front(), 0.0);
        EXPECT_EQ(t.lambda_grid.back(), 1.0);
        for (std::size_t i = 1; i < t.lambda_grid.size(); ++i) EXPECT_GT(t.lambda_grid[i], t.lambda_grid[i - 1]);
        for (std::size_t i = 0; i < t.lambda_grid.size(); ++i)
            EXPECT_EQ(t.mu_values[i], mu(default_curves().curve(r), t.lambda_grid[i]));
    }
}

TEST(Table, TooSmallRejected) { EXPECT_THROW(build_table(RoadType::Asphalt, 63), ConfigError); }

TEST(Table, PeakAttainedAndMaximal) {
    for (RoadType r : kAllRoads) {
        const auto t = build_table(r, 1024);
        double m = 0.0;
        for (double v : t.mu_values) m = std::max(m, v);
        EXPECT_EQ(t.mu_peak, m);
        EXPECT_EQ(mu(default_curves().curve(r), t.lambda_opt), t.mu_peak);
    }
}

TEST(Table, Deterministic) {
    const auto a = build_table(RoadType::Stone, 777);
    const auto b = build_table(RoadType::Stone, 777);
    EXPECT_EQ(a.lambda_grid, b.lambda_grid);
    EXPECT_EQ(a.mu_values, b.mu_values);
}

TEST(Table, LookupInterpolatesLinearly) {
    const auto t = build_table(RoadType::Asphalt, 256);
    EXPECT_EQ(t.lookup(t.lambda_grid[10]), t.mu_values[10]);
    const double mid = 0.5 * (t.lambda_grid[10] + t.lambda_grid[11]);
    EXPECT_NEAR(t.lookup(mid), 0.5 * (t.mu_values[10] + t.mu_values[11]), 1e-15);
    EXPECT_EQ(t.lookup(-0.5), t.mu_values.front());
    EXPECT_EQ(t.lookup(1.5), t.mu_values.back());
}

TEST(OptimalLambda, AsphaltInExpectedRange) {
    const double l = optimal_lambda(RoadType::Asphalt);
    EXPECT_GE(l, 0.1);
    EXPECT_LE(l, 0.25);
}

TEST(OptimalLambda, MatchesDenseGridSearch) {
    for (RoadType r : kAllRoads) {
        const double oracle = dense_peak_lambda(default_curves().curve(r), 100000);
        EXPECT_NEAR(optimal_lambda(r), oracle, 1.0 / 4095.0) << to_string(r);
    }
}

TEST(OptimalLambda, InsideOpenHalfInterval) {
    for (RoadType r : kAllRoads) {
        EXPECT_GT(optimal_lambda(r), 0.0);
        EXPECT_LT(optimal_lambda(r), 0.5);
        EXPECT_EQ(mu(default_curves().curve(r), optimal_lambda(r)), default_curves().mu_peak(r));
    }
}

TEST(OptimalLambda, SnowPeakBelowAsphaltPeak) {
    const auto& cs = default_curves();
    EXPECT_LT(cs.mu(RoadType::Snow, optimal_lambda(RoadType::Snow)),
              cs.mu(RoadType::Asphalt, optimal_lambda(RoadType::Asphalt)));
}

TEST(OptimalLambda, InvariantUnderScaling) {
    auto t = build_table(RoadType::Gravel, 512);
    const double before = t.lambda_opt;
    for (auto& v : t.mu_values) v *= 2.0;
    locate_peak(t);
    EXPECT_EQ(t.lambda_opt, before);
}

TEST(Properties, PeakFactorOrdering) {
    const auto& cs = default_curves();
    EXPECT_GT(cs.curve(RoadType::Asphalt).D, cs.curve(RoadType::Stone).D);
    EXPECT_GT(cs.curve(RoadType::Stone).D, cs.curve(RoadType::Gravel).D);
    EXPECT_GT(cs.curve(RoadType::Gravel).D, cs.curve(RoadType::Snow).D);
}

TEST(Properties, UnimodalOnGrid) {
    for (RoadType r : kAllRoads) {
        const auto t = build_table(r, 2048);
        for (std::size_t i = 1; i < t.lambda_grid.size(); ++i) {
            if (t.lambda_grid[i] <= t.lambda_opt)
                EXPECT_GT(t.mu_values[i], t.mu_values[i - 1]) << to_string(r) << " i=" << i;
            else
                EXPECT_LE(t.mu_values[i], t.mu_values[i - 1]) << to_string(r) << " i=" << i;
        }
    }
}

TEST(CurveSet, OverrideFileReplacesOneCurve) {
    std::istringstream in("# comment\n[curves]\nsnow = 5 2.0 0.3 1.0 ; trailing\n");
    const auto set = CurveSet::from_stream(in);
    EXPECT_EQ(set.curve(RoadType::Snow), (MuLambdaCurve{5, 2.0, 0.3, 1.0}));
    EXPECT_EQ(set.curve(RoadType::Asphalt), kAsphaltCurve);
    EXPECT_NEAR(set.mu_peak(RoadType::Snow), 0.3, 1e-4);
}

TEST(CurveSet, OverrideFileErrors) {
    std::istringstream bad_road("ice = 1 2 0.1 1\n");
    EXPECT_THROW(CurveSet::from_stream(bad_road), ConfigError);
    std::istringstream short_line("snow = 1 2\n");
    EXPECT_THROW(CurveSet::from_stream(short_line), ConfigError);
    std::istringstream invalid("snow = 5 2.0 2.0 1\n");
    EXPECT_THROW(CurveSet::from_stream(invalid), ConfigError);
    EXPECT_THROW(CurveSet::from_file("/nonexistent/curves.ini"), IoError);
}
