#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "gapcond/asymptotics.hpp"
#include "gapcond/quadrature.hpp"

using namespace gapcond;

namespace {
constexpr double pi = std::numbers::pi;
}

TEST(Rho, BothDimensions)
{
    EXPECT_DOUBLE_EQ(rho(2, 1e-4), 1e-2);
    EXPECT_NEAR(rho(3, 1e-6), 1.0 / (6.0 * std::log(10.0)), 1e-16);
    EXPECT_THROW(rho(2, 0.0), DomainError);
    EXPECT_THROW(rho(2, 1.0), DomainError);
    EXPECT_THROW(rho(4, 0.1), ConfigError);
}

TEST(Kappa, FormulaValues)
{
    EXPECT_NEAR(kappa(2, {2.0}), pi, 1e-15);
    EXPECT_NEAR(kappa(2, {1.5}), std::sqrt(2.0) * pi / std::sqrt(1.5), 1e-15);
    EXPECT_NEAR(kappa(3, {2.0, 2.0}), pi, 1e-15);
    EXPECT_NEAR(kappa(3, {1.0, 4.0}), pi, 1e-15);
    EXPECT_THROW(kappa(2, {0.0}), ConfigError);
    EXPECT_THROW(kappa(3, {1.0}), ConfigError);
}

TEST(Quadrature, SmoothAndPeakedIntegrands)
{
    const auto a = integrate([](double x) { return std::exp(x); }, 0.0, 1.0);
    EXPECT_TRUE(a.converged);
    EXPECT_NEAR(a.value, std::exp(1.0) - 1.0, 1e-12);
    const double e = 1e-6;
    const auto b = integrate([e](double x) { return 1.0 / (e + x * x); }, -1.0, 1.0);
    EXPECT_TRUE(b.converged);
    EXPECT_NEAR(b.value, 2.0 / std::sqrt(e) * std::atan(1.0 / std::sqrt(e)), 1e-7);
}

TEST(GapIntegral, QuadraticModel2DMatchesArctan)
{
    // Oracle: the integral of 1/(eps + x^2) over (-R0, R0) is 2 atan(R0/sqrt(eps))/sqrt(eps).
    const double eps = 1e-4, R0 = 0.5;
    const auto g = quadratic_gap_geometry(2, {2.0}, eps, R0);
    const double oracle = 2.0 / std::sqrt(eps) * std::atan(R0 / std::sqrt(eps));
    EXPECT_NEAR(oracle, 310.1597, 1e-4);
    const auto q = gap_integral(g, eps, R0);
    EXPECT_TRUE(q.converged);
    EXPECT_NEAR(q.value, oracle, 1e-8);
    EXPECT_NEAR(q.value, closed_form_2d(2.0, R0, eps), 1e-2);
}

TEST(GapIntegral, QuadraticModel3DMatchesLog)
{
    // Oracle for lambda1 = lambda2 = 2: pi ln((eps + R0^2)/eps).
    const double eps = 1e-6, R0 = 0.5;
    const auto g = quadratic_gap_geometry(3, {2.0, 2.0}, eps, R0);
    const double oracle = pi * std::log((eps + R0 * R0) / eps);
    EXPECT_NEAR(oracle, 39.047, 1e-3);
    const auto q = gap_integral(g, eps, R0);
    EXPECT_TRUE(q.converged);
    EXPECT_NEAR(q.value, oracle, 1e-7);
    EXPECT_NEAR(q.value, closed_form_3d(2.0, 2.0, R0, eps), 1e-4);
}

TEST(GapIntegral, EpsZeroNeedsInnerRadius)
{
    const auto g = quadratic_gap_geometry(2, {2.0}, 0.0, 0.5);
    EXPECT_THROW(gap_integral(g, 0.0, 0.5), DomainError);
    const auto q = gap_integral(g, 0.0, 0.5, 0.1);
    // 2 * integral_{0.1}^{0.5} dx/x^2 = 2 * (10 - 2).
    EXPECT_NEAR(q.value, 16.0, 1e-9);
    EXPECT_THROW(gap_integral(g, 1e-3, 0.7), DomainError);
}

TEST(GapIntegral, DiscsApproachQuadraticModel)
{
    const auto up = InclusionShape::disc(1.0, Side::upper);
    const auto lo = InclusionShape::disc(1.0, Side::lower);
    const double eps = 1e-4;
    const auto g = make_gap_geometry(up, lo, eps, 1.0);
    // Exact disc gap: eps + 2(1 - sqrt(1 - x^2)); compare with a plain adaptive rule.
    const auto ref = integrate([eps](double x) { return 1.0 / (eps + 2.0 * (1.0 - std::sqrt(1.0 - x * x))); }, -0.5, 0.5,
                               {1e-11, 50000});
    EXPECT_NEAR(gap_integral(g, eps, 0.5).value, ref.value, 1e-7);
}

TEST(RTheta, IsotropicAndAnisotropic)
{
    for (double th : {0.0, 0.3, 1.2, 2.9}) EXPECT_NEAR(r_theta(2.0, 2.0, 0.5, th), 0.5, 1e-15);
    EXPECT_NEAR(r_theta(1.0, 4.0, 0.5, 0.0), 0.5 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(r_theta(1.0, 4.0, 0.5, pi / 2), 0.5 * std::sqrt(2.0), 1e-15);
}

TEST(ClosedForm3D, AnisotropicAgreesWithQuadrature)
{
    const double eps = 1e-7, R0 = 0.5;
    const auto g = quadratic_gap_geometry(3, {1.0, 3.0}, eps, R0);
    // The closed form integrates over the ellipse |x'|_R < R0 rather than the disc
    // |x'| < R0; the difference is the same for every eps, so compare increments.
    const auto g2 = with_eps(g, 1e-8);
    const double d_q = gap_integral(g2, 1e-8, R0).value - gap_integral(g, eps, R0).value;
    const double d_c = closed_form_3d(1.0, 3.0, R0, 1e-8) - closed_form_3d(1.0, 3.0, R0, eps);
    EXPECT_NEAR(d_q, d_c, 1e-5);
}

namespace {

EnergySeries synthetic_series(double kap, double M, double c, double p)
{
    EnergySeries s;
    for (double e : {1e-2, 3e-3, 1e-3, 3e-4, 1e-4}) {
        s.eps.push_back(e);
        s.energy.push_back(kap / std::sqrt(e) + M + c * std::pow(e, p));
    }
    return s;
}

} // namespace

TEST(EnergyFit, RecoversSyntheticConstants)
{
    const auto s = synthetic_series(pi, 2.19, 1.3, 0.5);
    const auto m = fit_energy_model(s, 2, {2.0});
    EXPECT_EQ(m.provenance, Provenance::fit);
    EXPECT_NEAR(m.kappa_n, pi, 1e-15);
    EXPECT_TRUE(m.fit.remainder_resolved);
    EXPECT_NEAR(m.fit.remainder.exponent, 0.5, 1e-4);
    EXPECT_NEAR(m.M_of(1).value, 2.19, 1e-8);
    EXPECT_NEAR(m.fit.kappa_free.value / pi, 1.0, 1e-3);
    EXPECT_EQ(m.fit.bound_exponent, 0.25);
    EXPECT_THROW(m.M_of(2), ConfigError);
}

TEST(EnergyFit, ExactModelHasZeroResiduals)
{
    const auto s = synthetic_series(pi, -0.7, 0.0, 1.0);
    const auto m = fit_energy_model(s, 2, {2.0});
    EXPECT_NEAR(m.M_of(1).value, -0.7, 1e-10);
    for (double r : m.fit_residuals) EXPECT_NEAR(r, 0.0, 1e-10);
    EXPECT_TRUE(m.fit.tails_consistent);
}

TEST(EnergyFit, RejectsBadSeries)
{
    auto s = synthetic_series(pi, 1.0, 0.0, 1.0);
    auto short_s = s;
    short_s.eps.resize(2);
    short_s.energy.resize(2);
    EXPECT_THROW(fit_energy_model(short_s, 2, {2.0}), FitError);
    auto narrow = s;
    narrow.eps = {1e-2, 8e-3, 6e-3};
    narrow.energy = {1.0, 2.0, 3.0};
    EXPECT_THROW(fit_energy_model(narrow, 2, {2.0}), FitError);
    auto unsorted = s;
    std::swap(unsorted.eps[0], unsorted.eps[1]);
    EXPECT_THROW(fit_energy_model(unsorted, 2, {2.0}), FitError);
    auto flat = s;
    flat.energy[3] = flat.energy[2];
    EXPECT_THROW(fit_energy_model(flat, 2, {2.0}), FitError);
}

TEST(EnergyFit, ThreeDimensionalScale)
{
    EnergySeries s;
    for (double e : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
        s.eps.push_back(e);
        s.energy.push_back(pi * std::abs(std::log(e)) + 0.4 + 2.0 * std::sqrt(e));
    }
    const auto m = fit_energy_model(s, 3, {2.0, 2.0});
    EXPECT_NEAR(m.M_of(1).value, 0.4, 1e-6);
    EXPECT_EQ(m.fit.bound_exponent, 0.5);
}
