#include <algorithm>
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "gapcond/field_solver.hpp"
#include "gapcond/functionals.hpp"
#include "gapcond/oracle.hpp"

using namespace gapcond;

namespace {

// Coarse enough for unit tests, fine enough for the structural identities.
ResolutionSpec light_spec()
{
    ResolutionSpec s;
    s.far_spacing = 0.05;
    s.tangential_layers = 16;
    s.grading = 1.3;
    s.tangential_grading = 1.03;
    return s;
}

struct Pair {
    std::shared_ptr<const GradedGrid> grid;
    std::unique_ptr<FieldSolver> solver;
    Domain2D domain;
};

Pair make_pair(double eps, ResolutionSpec spec = light_spec(), InclusionShape lower = InclusionShape::disc(1.0, Side::lower))
{
    Pair p;
    OuterDomain outer;
    outer.radius = 4.0;
    p.domain = make_pair_domain(InclusionShape::disc(1.0, Side::upper), lower, outer, eps, 1.0);
    p.grid = std::make_shared<const GradedGrid>(build_grid(p.domain, spec));
    p.solver = std::make_unique<FieldSolver>(p.grid);
    return p;
}

double max_abs(const std::vector<double>& v)
{
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

const BoundaryData xn_data{[](const Point& p) { return p[1]; }, "x_n"};

} // namespace

TEST(BuildGrid, GapLayersAndRefinement)
{
    const auto p = make_pair(1e-2, ResolutionSpec{});
    EXPECT_GE(p.grid->gap_nodes_on_axis(1e-2), 8);
    const auto d = make_annulus_domain(0.5, 2.0);
    ResolutionSpec s;
    s.far_spacing = 0.1;
    const double h1 = build_grid(d, s).max_spacing();
    s.refinement = 2;
    EXPECT_NEAR(build_grid(d, s).max_spacing(), 0.5 * h1, 1e-12);
}

TEST(BuildGrid, InfeasibleBudget)
{
    OuterDomain outer;
    const auto d = make_pair_domain(InclusionShape::disc(1.0, Side::upper), InclusionShape::disc(1.0, Side::lower), outer, 1e-5, 1.0);
    ResolutionSpec s;
    s.max_nodes = 20000;
    try {
        build_grid(d, s);
        FAIL() << "expected ResolutionError";
    } catch (const ResolutionError& e) {
        EXPECT_NE(std::string(e.what()).find("resolution infeasible"), std::string::npos);
    }
}

TEST(BuildGrid, EveryBoundaryPointHasOneTag)
{
    const auto p = make_pair(1e-2);
    for (const auto& b : p.grid->boundary) {
        const int t = static_cast<int>(b.tag);
        EXPECT_TRUE(t == 0 || t == 1 || t == 2);
        EXPECT_GE(b.node, 0);
    }
}

TEST(SolveVi, BoundaryValuesAndMaximumPrinciple)
{
    const auto p = make_pair(1e-2);
    const auto v1 = solve_vi(1, *p.solver);
    for (std::size_t b = 0; b < p.grid->boundary.size(); ++b)
        EXPECT_EQ(v1.boundary_values[b], p.grid->boundary[b].tag == BoundaryTag::inclusion1 ? 1.0 : 0.0);
    const auto [lo, hi] = std::minmax_element(v1.values.begin(), v1.values.end());
    EXPECT_GE(*lo, -1e-12);
    EXPECT_LE(*hi, 1.0 + 1e-12);
    EXPECT_LE(v1.relative_residual, 1e-10);
    EXPECT_THROW(solve_vi(3, *p.solver), ConfigError);
}

TEST(SolveV0, ZeroAndConstantData)
{
    const auto p = make_pair(1e-2);
    const auto z = solve_v0(constant_data(0.0), *p.solver);
    EXPECT_EQ(max_abs(z.values), 0.0);
    const auto v1 = solve_vi(1, *p.solver), v2 = solve_vi(2, *p.solver);
    const auto one = solve_v0(constant_data(1.0), *p.solver);
    double defect = 0.0;
    for (std::size_t k = 0; k < one.values.size(); ++k)
        defect = std::max(defect, std::abs(one.values[k] - (1.0 - v1.values[k] - v2.values[k])));
    EXPECT_LE(defect, 1e-9);
    EXPECT_NEAR(flux_outer(combine(1.0, one, 1.0, v1, 1.0, v2, "sum")), 0.0, 1e-8);

    const auto fs = assemble_flux_system(v1, v2, one);
    EXPECT_NEAR(fs.C1, 1.0, 1e-9);
    EXPECT_NEAR(fs.C2, 1.0, 1e-9);
    const auto u = assemble_u(fs, v1, v2, one);
    for (double x : u.values) ASSERT_NEAR(x, 1.0, 1e-8);
    EXPECT_NEAR(q_eps(fs), 0.0, 1e-8 * std::abs(fs.b[0] * fs.alpha[1]));
}

TEST(Fluxes, GreenIdentitiesAndEnergy)
{
    const double eps = 1e-2;
    const auto p = make_pair(eps);
    const auto v1 = solve_vi(1, *p.solver), v2 = solve_vi(2, *p.solver);
    const auto v0 = solve_v0(xn_data, *p.solver);
    const auto fs = assemble_flux_system(v1, v2, v0);
    const double a11 = fs.a[0][0];
    EXPECT_GT(a11, 0.0);
    EXPECT_NEAR(flux_inclusion(v1, 1), energy_of(v1), 1e-9 * a11);
    EXPECT_LE(fs.reciprocity_defect(), 1e-9 * a11);
    EXPECT_LE(fs.column_defect(0), 1e-9 * a11);
    EXPECT_LE(fs.column_defect(1), 1e-9 * a11);
    EXPECT_NEAR(fs.alpha[0], -(fs.a[0][0] + fs.a[0][1]), 1e-9 * a11);
    EXPECT_LT(flux_outer(add(v1, v2, "v1+v2")), 0.0);
    for (const auto* f : {&v1, &v2, &v0}) EXPECT_NEAR(flux_total(*f), 0.0, 1e-9 * a11);

    const auto u = assemble_u(fs, v1, v2, v0);
    EXPECT_NEAR(flux_inclusion(u, 1), 0.0, 1e-8 * a11);
    EXPECT_NEAR(flux_inclusion(u, 2), 0.0, 1e-8 * a11);
    for (std::size_t b = 0; b < p.grid->boundary.size(); ++b) {
        const auto& bp = p.grid->boundary[b];
        const double want = bp.tag == BoundaryTag::inclusion1 ? fs.C1 : bp.tag == BoundaryTag::inclusion2 ? fs.C2 : bp.position[1];
        ASSERT_NEAR(u.boundary_values[b], want, 1e-12);
    }
    EXPECT_LT(std::abs(fs.C1) + std::abs(fs.C2), 10.0);
}

TEST(Fluxes, CramerIdentityIsExact)
{
    for (double eps : {1e-2, 1e-3}) {
        const auto p = make_pair(eps);
        const auto v1 = solve_vi(1, *p.solver), v2 = solve_vi(2, *p.solver);
        const auto v0 = solve_v0(xn_data, *p.solver);
        const auto fs = assemble_flux_system(v1, v2, v0);
        const auto r = c_diff_identity_check(fs, q_eps(fs), theta_eps(fs, 2, eps), 2, eps);
        EXPECT_LE(r.relative, 1e-12) << eps;
        EXPECT_NEAR(theta_eps(fs, 2, eps), theta_eps_alternative(fs, 2, eps), 1e-9 * theta_eps(fs, 2, eps));
    }
}

TEST(Fluxes, SingularSystemIsReported)
{
    const auto p = make_pair(1e-2);
    const auto v1 = solve_vi(1, *p.solver);
    const auto v0 = solve_v0(xn_data, *p.solver);
    EXPECT_THROW(assemble_flux_system(v1, v1, v0), SolverError);
}

TEST(Symmetry, MirrorRelationsForOddData)
{
    const auto p = make_pair(1e-2);
    ASSERT_TRUE(mirror_symmetric(p.domain.inclusions[0].shape, p.domain.inclusions[1].shape));
    SolvedConfiguration s;
    s.grid = p.grid;
    s.v1 = solve_vi(1, *p.solver);
    s.v2 = solve_vi(2, *p.solver);
    s.v0 = solve_v0(xn_data, *p.solver);
    s.fluxes = assemble_flux_system(s.v1, s.v2, s.v0);
    s.u = assemble_u(s.fluxes, s.v1, s.v2, s.v0);
    for (const auto& rel : symmetry_oracle(Parity::odd)) EXPECT_LE(rel.defect(s), 1e-9) << rel.name;
    // v0 itself is odd.
    const auto map = mirror_map(*p.grid);
    double d = 0.0;
    for (std::size_t k = 0; k < map.size(); ++k) d = std::max(d, std::abs(s.v0.values[map[k]] + s.v0.values[k]));
    EXPECT_LE(d, 1e-9);
}

TEST(Symmetry, EvenDataGivesEqualConstants)
{
    const auto p = make_pair(1e-2);
    SolvedConfiguration s;
    s.grid = p.grid;
    s.v1 = solve_vi(1, *p.solver);
    s.v2 = solve_vi(2, *p.solver);
    s.v0 = solve_v0({[](const Point& x) { return x[0] * x[0] + x[1] * x[1]; }, "r^2"}, *p.solver);
    s.fluxes = assemble_flux_system(s.v1, s.v2, s.v0);
    s.u = assemble_u(s.fluxes, s.v1, s.v2, s.v0);
    for (const auto& rel : symmetry_oracle(Parity::even)) EXPECT_LE(rel.defect(s), 1e-9) << rel.name;
}

TEST(Symmetry, AsymmetricPairIsDetected)
{
    EXPECT_FALSE(mirror_symmetric(InclusionShape::disc(1.0, Side::upper), InclusionShape::disc(2.0, Side::lower)));
    const auto p = make_pair(1e-2, light_spec(), InclusionShape::disc(1.5, Side::lower));
    const auto v1 = solve_vi(1, *p.solver), v2 = solve_vi(2, *p.solver);
    const auto map = mirror_map(*p.grid);
    if (map.empty()) {
        SolvedConfiguration s{p.grid, v1, v2, v1, v1, {}};
        EXPECT_THROW(symmetry_oracle(Parity::none).front().defect(s), ConfigError);
    } else {
        double d = 0.0;
        for (std::size_t k = 0; k < map.size(); ++k) d = std::max(d, std::abs(v2.values[static_cast<std::size_t>(map[k])] - v1.values[k]));
        EXPECT_GT(d, 1e-3);
    }
}

TEST(Gradient, ConstantFieldHasZeroGradientAndEnergy)
{
    const auto p = make_pair(1e-2);
    const auto c = p.solver->solve([](BoundaryTag, const Point&) { return 2.5; }, "const");
    for (double x : c.values) ASSERT_NEAR(x, 2.5, 1e-9);
    for (const auto& g : gradient(c)) {
        ASSERT_NEAR(g[0], 0.0, 1e-6);
        ASSERT_NEAR(g[1], 0.0, 1e-6);
    }
    EXPECT_NEAR(energy_of(c), 0.0, 1e-12);
}

TEST(Gradient, GapGradientGrowsAsEpsShrinks)
{
    double prev = 0.0;
    for (double eps : {1e-2, 1e-3}) {
        const auto p = make_pair(eps);
        const auto v1 = solve_vi(1, *p.solver);
        const auto g = make_gap_geometry(InclusionShape::disc(1.0, Side::upper), InclusionShape::disc(1.0, Side::lower), eps, 1.0);
        const auto patch = gap_patch(g, g.R0);
        const double m = max_gradient(*p.grid, gradient(v1), [&](const Point& x) { return patch.contains(x); });
        EXPECT_GT(m, prev);
        // Two-sided band around 1/eps at the centre of the gap.
        EXPECT_GT(m * eps, 0.5);
        EXPECT_LT(m * eps, 2.0);
        prev = m;
    }
}

TEST(Annulus, MatchesLogRadialSolution)
{
    // Oracle: ln(r/R)/ln(r_in/R) with energy 2 pi / ln(R/r_in).
    const double r_in = 0.5, R = 2.0;
    const auto d = make_annulus_domain(r_in, R);
    const auto oracle = annulus_case(r_in, R);
    ASSERT_TRUE(oracle.applicable(d));
    auto g = std::make_shared<const GradedGrid>(build_grid(d, ResolutionSpec{}));
    FieldSolver s(g);
    const auto v = solve_vi(1, s);
    double err = 0.0;
    for (std::size_t k = 0; k < g->unknowns(); ++k) err = std::max(err, std::abs(v.values[k] - oracle.evaluate(g->position(k))));
    EXPECT_LE(err, 1e-4);
    const double E = annulus_energy(2, r_in, R);
    EXPECT_NEAR(E, 2.0 * std::numbers::pi / std::log(4.0), 1e-15);
    EXPECT_LE(std::abs(energy_of(v) - E) / E, 1e-4);
    EXPECT_NEAR(flux_inclusion(v, 1), energy_of(v), 1e-10);
}

TEST(Annulus, GradientConvergesAtSecondOrder)
{
    const double r_in = 0.5, R = 2.0;
    // Interior accuracy: stay a fixed distance away from both circles.
    std::vector<double> errs;
    for (int k : {1, 2, 4}) {
        ResolutionSpec s;
        s.far_spacing = 0.04;
        s.refinement = k;
        auto g = std::make_shared<const GradedGrid>(build_grid(make_annulus_domain(r_in, R), s));
        FieldSolver fs(g);
        const auto v = solve_vi(1, fs);
        const auto grad = gradient(v);
        double e = 0.0;
        for (std::size_t i = 0; i < g->unknowns(); ++i) {
            const auto p = g->position(i);
            const double r = std::hypot(p[0], p[1]);
            if (r < 0.7 || r > 1.8) continue;
            const double dr = annulus_radial_derivative(2, r_in, R, r);
            e = std::max(e, std::hypot(grad[i][0] - dr * p[0] / r, grad[i][1] - dr * p[1] / r));
        }
        errs.push_back(e);
    }
    EXPECT_NEAR(std::log2(errs[0] / errs[1]), 2.0, 0.3);
    EXPECT_NEAR(std::log2(errs[1] / errs[2]), 2.0, 0.3);
}

TEST(LinearSolver, PcgAgreesWithDirect)
{
    OuterDomain outer;
    const auto d = make_pair_domain(InclusionShape::disc(1.0, Side::upper), InclusionShape::disc(1.0, Side::lower), outer, 1e-2, 1.0);
    auto g = std::make_shared<const GradedGrid>(build_grid(d, light_spec()));
    SolverOptions opt;
    opt.kind = LinearSolverKind::pcg;
    opt.tolerance = 1e-12;
    FieldSolver it(g, opt), direct(g);
    const auto a = solve_vi(1, it), b = solve_vi(1, direct);
    double diff = 0.0;
    for (std::size_t k = 0; k < a.values.size(); ++k) diff = std::max(diff, std::abs(a.values[k] - b.values[k]));
    EXPECT_LE(diff, 1e-7);
    EXPECT_LE(a.relative_residual, 1e-12);
}
