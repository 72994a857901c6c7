#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "gapcond/field_solver.hpp"
#include "gapcond/reconstruction.hpp"

using namespace gapcond;

namespace {

GapGeometry discs(double eps)
{
    return make_gap_geometry(InclusionShape::disc(1.0, Side::upper), InclusionShape::disc(1.0, Side::lower), eps, 1.0);
}

} // namespace

TEST(Ubar, BoundaryValuesInsideHalfPatch)
{
    const double eps = 1e-3;
    const auto g = discs(eps);
    for (double x : {-0.25, -0.1, 0.0, 0.07, 0.25}) {
        const Tangent t{x, 0.0};
        EXPECT_NEAR(ubar(g, {x, 0.5 * eps + g.h1(t), 0.0}), 1.0, 1e-12);
        EXPECT_NEAR(ubar(g, {x, -0.5 * eps + g.h2(t), 0.0}), 0.0, 1e-12);
        EXPECT_NEAR(ubar(g, {x, 0.5 * (g.h1(t) + g.h2(t)), 0.0}), 0.5, 1e-12);
    }
}

TEST(Ubar, GradientMatchesFiniteDifferences)
{
    const double eps = 1e-2;
    for (const auto& g : {discs(eps), make_gap_geometry(InclusionShape::perturbed_disc(1.0, {0.1}, Side::upper),
                                                        InclusionShape::disc(1.5, Side::lower), eps, 1.0)}) {
        for (double x : {-0.2, 0.0, 0.13}) {
            const Tangent t{x, 0.0};
            const double y = 0.3 * (0.5 * eps + g.h1(t)) + 0.7 * (-0.5 * eps + g.h2(t));
            const Point p{x, y, 0.0};
            const auto grad = ubar_grad(g, p);
            const double h = 1e-6;
            const double dx = (ubar(g, {x + h, y, 0.0}) - ubar(g, {x - h, y, 0.0})) / (2 * h);
            const double dy = (ubar(g, {x, y + h, 0.0}) - ubar(g, {x, y - h, 0.0})) / (2 * h);
            EXPECT_NEAR(grad[0], dx, 1e-6 * (1.0 + std::abs(dx)));
            EXPECT_NEAR(grad[1], dy, 1e-6 * std::abs(dy));
        }
    }
}

TEST(Ubar, NormalDerivativeIsInverseGapWidth)
{
    const double eps = 1e-4;
    const auto g = discs(eps);
    EXPECT_NEAR(ubar_grad(g, {0.0, 0.0, 0.0})[1], 1.0 / eps, 1e-6);
    EXPECT_NEAR(ubar_grad(g, {0.0, 0.0, 0.0})[0], 0.0, 1e-9);
}

TEST(Ubar, ContinuousAndBoundedAcrossTheBlend)
{
    const double eps = 1e-3;
    const auto g = discs(eps);
    const double r0 = g.R0;
    for (double x = 0.5 * r0 - 0.01; x < 1.3 * r0; x += 0.003) {
        for (double y : {-0.05, 0.0, 0.04}) {
            const double a = ubar(g, {x, y, 0.0}), b = ubar(g, {x + 1e-7, y, 0.0});
            EXPECT_NEAR(a, b, 1e-4);
            if (std::abs(y) < 0.5 * eps + g.h1({std::min(x, r0), 0.0})) {
                EXPECT_GE(a, -1e-12);
                EXPECT_LE(a, 1.0 + 1e-12);
            }
        }
    }
    EXPECT_NEAR(ubar(g, {2.0, 1.0, 0.0}), 1.0, 1e-15);
    EXPECT_NEAR(ubar(g, {2.0, -1.0, 0.0}), 0.0, 1e-15);
}

TEST(SingularPrefactor, TwoAndThreeDimensions)
{
    EXPECT_NEAR(singular_prefactor(2, 50.0, 20.0, 0.3, 1e-4), 50.0 * 1e-2 / 20.0, 1e-15);
    const double eps = 1e-6, Mt = 0.4;
    EXPECT_NEAR(singular_prefactor(3, 2.0, 4.0, Mt, eps), 0.5 / (6.0 * std::log(10.0) - Mt), 1e-15);
    EXPECT_EQ(singular_prefactor(2, 0.0, 1.0, 0.0, 1e-2), 0.0);
    EXPECT_THROW(singular_prefactor(2, 1.0, 0.0, 0.0, 1e-2), FitError);
    EXPECT_THROW(singular_prefactor(3, 1.0, 1.0, 5.0, 1e-2), DomainError);
}

TEST(SingularTerm, ThreeDimensionalLayerWithSyntheticConstants)
{
    LimitConstants L;
    L.n = 3;
    L.Q_star.value = 3.0;
    L.Theta_star = {6.0, 0.0};
    L.Mtilde = {0.25, 0.0};
    const double eps = 1e-5;
    const auto g = make_gap_geometry(InclusionShape::disc(1.0, Side::upper, 3), InclusionShape::disc(1.0, Side::lower, 3), eps, 1.0);
    const auto term = make_singular_term(L, g);
    const double pref = 0.5 / (std::abs(std::log(eps)) - 0.25);
    EXPECT_NEAR(term.prefactor, pref, 1e-15);
    const auto v = singular_term(L, g, {0.0, 0.0, 0.0});
    EXPECT_NEAR(v[2], pref / eps, 1e-6 * pref / eps);
    EXPECT_NEAR(v[0], 0.0, 1e-9);
    EXPECT_NEAR(v[1], 0.0, 1e-9);
    // Off-axis the normal component is prefactor / delta(x').
    const Point p{0.05, -0.03, 0.0};
    const double delta = eps + g.h1({0.05, -0.03}) - g.h2({0.05, -0.03});
    EXPECT_NEAR(singular_term(L, g, p)[2], pref / delta, 1e-9 * pref / delta);
}

TEST(BlowupFit, SyntheticInverseSqrt)
{
    std::vector<double> eps{1e-2, 3e-3, 1e-3, 3e-4, 1e-4}, g;
    for (double e : eps) g.push_back(2.5 / std::sqrt(e) + 0.3);
    const auto f = blowup_rate_fit(eps, g, 50.0, 0.01);
    EXPECT_FALSE(f.refused);
    EXPECT_NEAR(f.slope, -0.5, 0.01);
    EXPECT_LT(f.ci_low, f.slope);
    EXPECT_GT(f.ci_high, f.slope);
    EXPECT_EQ(f.points, 5u);
}

TEST(BlowupFit, RefusesWhenQVanishes)
{
    std::vector<double> eps{1e-2, 3e-3, 1e-3, 3e-4}, g{1.0, 1.0, 1.0, 1.0};
    EXPECT_TRUE(blowup_rate_fit(eps, g, 1e-4, 1e-3).refused);
    EXPECT_TRUE(blowup_rate_fit(eps, g, 0.0, 0.0).refused);
    EXPECT_THROW(blowup_rate_fit({1e-2, 1e-3, 1e-4}, {1.0, 2.0, 3.0}, 1.0, 0.0), FitError);
}

TEST(ResidualNorms, SolvedFieldAgainstSingularTerm)
{
    const double eps = 1e-3;
    OuterDomain outer;
    const auto d = make_pair_domain(InclusionShape::disc(1.0, Side::upper), InclusionShape::disc(1.0, Side::lower), outer, eps, 1.0);
    ResolutionSpec s;
    s.far_spacing = 0.05;
    s.tangential_layers = 16;
    auto grid = std::make_shared<const GradedGrid>(build_grid(d, s));
    FieldSolver solver(grid);
    const auto v1 = solve_vi(1, solver), v2 = solve_vi(2, solver);
    const auto v0 = solve_v0({[](const Point& p) { return p[1]; }, "x_n"}, solver);
    const auto fs = assemble_flux_system(v1, v2, v0);
    const auto u = assemble_u(fs, v1, v2, v0);
    const double theta = -std::sqrt(eps) * fs.a[0][0] * fs.alpha[1] + std::sqrt(eps) * fs.a[0][1] * fs.alpha[0];
    const double q = -fs.b[0] * fs.alpha[1] + fs.b[1] * fs.alpha[0];
    const SingularTerm term{2, singular_prefactor(2, q, theta, 0.0, eps), *d.gap};
    const auto patch = gap_patch(*d.gap, 0.5 * d.gap->R0);
    const auto r = residual_norms(u, term, [&](const Point& p) { return patch.contains(p); });
    EXPECT_GT(r.samples, 100u);
    // The singular term carries most of the gradient.
    EXPECT_LT(r.ratio, 0.2);
    EXPECT_GT(r.max_gradient, 10.0);
    EXPECT_THROW(residual_norms(u, term, [](const Point&) { return false; }), ConfigError);
}
