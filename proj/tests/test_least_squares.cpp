#include <cmath>

#include <gtest/gtest.h>

#include "gapcond/least_squares.hpp"

using namespace gapcond;

TEST(FitLinear, ExactLine)
{
    const std::vector<double> x{0.0, 1.0, 2.0, 3.0};
    std::vector<double> y;
    for (double t : x) y.push_back(1.5 - 2.0 * t);
    const auto f = fit_linear({[](double) { return 1.0; }, [](double t) { return t; }}, x, y);
    EXPECT_NEAR(f.coef[0], 1.5, 1e-14);
    EXPECT_NEAR(f.coef[1], -2.0, 1e-14);
    EXPECT_NEAR(f.rss, 0.0, 1e-26);
    EXPECT_NEAR(f.std_error[1], 0.0, 1e-12);
}

TEST(FitLinear, StandardErrorsMatchTextbookFormula)
{
    const std::vector<double> x{0.0, 1.0, 2.0, 3.0, 4.0};
    const std::vector<double> y{0.1, 0.9, 2.2, 2.8, 4.1};
    const auto f = fit_linear({[](double) { return 1.0; }, [](double t) { return t; }}, x, y);
    // Closed-form simple regression.
    const double n = 5, sx = 10, sxx = 30;
    double sy = 0, sxy = 0;
    for (int i = 0; i < 5; ++i) {
        sy += y[i];
        sxy += x[i] * y[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    EXPECT_NEAR(f.coef[1], slope, 1e-13);
    const double s2 = f.rss / 3.0;
    EXPECT_NEAR(f.std_error[1], std::sqrt(s2 * n / (n * sxx - sx * sx)), 1e-13);
}

TEST(FitLinear, Degenerate)
{
    EXPECT_THROW(fit_linear({[](double) { return 1.0; }, [](double) { return 2.0; }}, {1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}),
                 FitError);
    EXPECT_THROW(fit_linear({[](double) { return 1.0; }, [](double t) { return t; }}, {1.0}, {1.0}), FitError);
    EXPECT_THROW(fit_linear({[](double t) { return t; }}, {1.0, NAN}, {1.0, 2.0}), FitError);
}

TEST(PowerLaw, RecoversExponent)
{
    std::vector<double> x, y;
    for (double e : {1e-2, 3e-3, 1e-3, 3e-4, 1e-4}) {
        x.push_back(e);
        y.push_back(2.0 - 0.8 * std::pow(e, 0.75));
    }
    const auto f = fit_offset_power_law(x, y);
    EXPECT_NEAR(f.exponent, 0.75, 1e-4);
    EXPECT_NEAR(f.offset, 2.0, 1e-9);
    EXPECT_NEAR(f.coefficient, -0.8, 1e-5);
    EXPECT_FALSE(f.exponent_at_bound);
}

TEST(PowerLaw, FlagsBoundExponent)
{
    std::vector<double> x, y;
    for (double e : {1e-2, 3e-3, 1e-3, 3e-4}) {
        x.push_back(e);
        y.push_back(1.0 + std::pow(e, 4.0));
    }
    EXPECT_TRUE(fit_offset_power_law(x, y, 0.1, 3.0).exponent_at_bound);
    EXPECT_THROW(fit_offset_power_law({1.0, 2.0}, {1.0, 2.0}), FitError);
}
