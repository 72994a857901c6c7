#pragma once

// Tensor-product grids graded geometrically toward the contact point, with
// boundary crossings located on every grid edge that leaves the perforated domain.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "gapcond/errors.hpp"
#include "gapcond/geometry.hpp"

namespace gapcond {

enum class BoundaryTag : std::uint8_t { outer = 0, inclusion1 = 1, inclusion2 = 2 };

inline std::string to_string(BoundaryTag t)
{
    switch (t) {
    case BoundaryTag::outer: return "outer";
    case BoundaryTag::inclusion1: return "inclusion1";
    case BoundaryTag::inclusion2: return "inclusion2";
    }
    return "?";
}

/// The 2D perforated domain: Omega minus one or two inclusions.
struct Domain2D {
    OuterDomain outer;
    std::vector<PlacedInclusion> inclusions;   // tagged inclusion1, inclusion2 in order
    std::optional<GapGeometry> gap;            // present for touching pairs; drives the grading
};

/// Two touching shapes pulled apart by eps inside `outer`.
inline Domain2D make_pair_domain(const InclusionShape& upper, const InclusionShape& lower, const OuterDomain& outer,
                                 double eps, double kappa_lb)
{
    if (upper.dim != 2) throw ConfigError("direct field solves are two-dimensional");
    auto placed = translate_pair(upper, lower, eps);
    Domain2D d;
    d.outer = outer;
    d.inclusions = {placed[0], placed[1]};
    check_contained(outer, d.inclusions);
    d.gap = make_gap_geometry(upper, lower, eps, kappa_lb);
    return d;
}

/// Single disc of radius r_in centred in a disc of radius R_out.
inline Domain2D make_annulus_domain(double r_in, double R_out)
{
    if (!(r_in > 0.0 && r_in < R_out)) throw ConfigError("annulus needs 0 < r_in < R_out");
    Domain2D d;
    d.outer.kind = OuterKind::disc;
    d.outer.radius = R_out;
    InclusionShape s = InclusionShape::disc(r_in, Side::upper);
    s.center = {0.0, 0.0, 0.0};
    d.inclusions = {PlacedInclusion{s, 0.0}};
    return d;
}

struct ResolutionSpec {
    int gap_layers = 8;           // nodes across the gap at x' = 0
    int tangential_layers = 48;   // nodes across the sqrt(eps) tangential scale
    double far_spacing = 0.0125;
    double grading = 1.15;        // ratio of neighbouring spacings in the graded zone (normal direction)
    double tangential_grading = 1.007;   // same along x'; 0 means use `grading`
    std::size_t max_nodes = 4'000'000;
    int refinement = 1;           // k divides every spacing by k

    void validate() const
    {
        if (gap_layers < 8) throw ConfigError("gap_layers must be at least 8");
        if (tangential_layers < 2) throw ConfigError("tangential_layers must be at least 2");
        if (!(far_spacing > 0.0)) throw ConfigError("far_spacing must be positive");
        if (!(grading >= 1.0 && grading < 2.0)) throw ConfigError("grading must lie in [1, 2)");
        if (tangential_grading != 0.0 && !(tangential_grading >= 1.0 && tangential_grading < 2.0))
            throw ConfigError("tangential_grading must be 0 or lie in [1, 2)");
        if (refinement < 1) throw ConfigError("refinement must be >= 1");
    }
};

/// Symmetric axis: uniform spacing h0 on [-core, core], then growing by the
/// factor q up to h_far, covering [-extent, extent] with a margin.
inline std::vector<double> graded_axis(double h0, double q, double h_far, double extent, double core = 0.0)
{
    std::vector<double> half{0.0};
    double h = std::min(h0, h_far);
    while (half.back() < extent + 1.5 * h_far) {
        half.push_back(half.back() + h);
        if (half.back() >= core) h = std::min(h * q, h_far);
    }
    std::vector<double> axis;
    axis.reserve(2 * half.size() - 1);
    for (auto it = half.rbegin(); it != half.rend(); ++it) axis.push_back(-*it);
    for (std::size_t i = 1; i < half.size(); ++i) axis.push_back(half[i]);
    return axis;
}

/// Grid edge from an unknown node either to another unknown node or to a boundary crossing.
struct Arm {
    std::int32_t target = -1;   // >= 0: unknown index; < 0: boundary point -(target + 1)
    double length = 0.0;
    double coeff = 0.0;         // finite-volume conductance: dual face width / length

    bool to_boundary() const { return target < 0; }
    std::size_t boundary_index() const { return static_cast<std::size_t>(-(target + 1)); }
};

struct BoundaryPoint {
    Point position{};
    BoundaryTag tag = BoundaryTag::outer;
    std::int32_t node = -1;   // owning unknown
    double coeff = 0.0;
};

enum class NodeKind : std::uint8_t { unknown, inclusion1, inclusion2, exterior };

/// Directions of the four arms: +x, -x, +y, -y.
inline constexpr int arm_count = 4;

struct GradedGrid {
    using ArmSet = std::array<Arm, arm_count>;
    std::vector<double> xs, ys;
    std::vector<NodeKind> kinds;              // xs.size() * ys.size(), index i + nx * j
    std::vector<std::int32_t> unknown_of;     // grid node -> unknown index or -1
    std::vector<std::array<std::int32_t, 2>> ij;   // unknown -> (i, j)
    std::vector<ArmSet> arms;
    std::vector<BoundaryPoint> boundary;
    int inclusion_count = 0;

    std::size_t nx() const { return xs.size(); }
    std::size_t ny() const { return ys.size(); }
    std::size_t unknowns() const { return ij.size(); }
    Point position(std::size_t k) const { return Point{xs[ij[k][0]], ys[ij[k][1]], 0.0}; }

    double max_spacing() const
    {
        double h = 0.0;
        for (std::size_t i = 1; i < xs.size(); ++i) h = std::max(h, xs[i] - xs[i - 1]);
        for (std::size_t j = 1; j < ys.size(); ++j) h = std::max(h, ys[j] - ys[j - 1]);
        return h;
    }

    /// Unknown nodes on the line x = 0 strictly inside the gap.
    int gap_nodes_on_axis(double eps) const
    {
        const auto it = std::find(xs.begin(), xs.end(), 0.0);
        if (it == xs.end()) return 0;
        const std::size_t i = static_cast<std::size_t>(it - xs.begin());
        int count = 0;
        for (std::size_t j = 0; j < ys.size(); ++j)
            if (std::abs(ys[j]) < 0.5 * eps && unknown_of[i + nx() * j] >= 0) ++count;
        return count;
    }
};

namespace detail {

inline NodeKind classify(const Domain2D& d, const Point& p)
{
    for (std::size_t m = 0; m < d.inclusions.size(); ++m)
        if (d.inclusions[m].level(p) <= 0.0) return m == 0 ? NodeKind::inclusion1 : NodeKind::inclusion2;
    return d.outer.level(p) > 0.0 ? NodeKind::unknown : NodeKind::exterior;
}

/// Fraction t in (0, 1] along p0 -> p1 where f changes sign (f(p0) > 0 >= f(p1)).
template <class F>
double crossing(const F& f, const Point& p0, const Point& p1)
{
    const auto g = [&](double t) {
        return f(Point{p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1]), 0.0});
    };
    const double g1 = g(1.0);
    if (g1 == 0.0) return 1.0;
    std::uintmax_t iters = 200;
    const auto [lo, hi] = boost::math::tools::toms748_solve(g, 0.0, 1.0, g(0.0), g1,
                                                            boost::math::tools::eps_tolerance<double>(50), iters);
    return 0.5 * (lo + hi);
}

} // namespace detail

/// Builds the graded grid and locates every boundary crossing.
///
/// For a touching pair the normal spacing at the contact is eps / (gap_layers + 1)
/// and the tangential spacing sqrt(2 eps / lambda_1) / tangential_layers; both stay
/// uniform across the gap core and then grow geometrically up to far_spacing. Without a gap the grid is uniform.
inline GradedGrid build_grid(const Domain2D& d, const ResolutionSpec& spec)
{
    spec.validate();
    const int k = spec.refinement;
    const double h_far = spec.far_spacing / k;
    const double q = std::pow(spec.grading, 1.0 / k);
    const double qx = spec.tangential_grading > 0.0 ? std::pow(spec.tangential_grading, 1.0 / k) : q;
    const double extent = d.outer.extent();

    GradedGrid g;
    g.inclusion_count = static_cast<int>(d.inclusions.size());
    if (d.gap) {
        const double eps = d.gap->eps;
        if (!(eps > 0.0)) throw ConfigError("direct solves need eps > 0");
        const double hy0 = eps / (k * (spec.gap_layers + 1));
        const double hx0 = std::sqrt(2.0 * eps / d.gap->lambdas.front()) / (k * spec.tangential_layers);
        // Size check before allocating anything.
        const double core_y = 0.5 * eps;
        const double core_x = std::sqrt(2.0 * eps / d.gap->lambdas.front());
        const auto count = [&](double h0, double ratio, double core) {
            std::size_t n = 0;
            double x = 0.0, h = std::min(h0, h_far);
            while (x < extent + 1.5 * h_far && n < spec.max_nodes) {
                x += h;
                if (x >= core) h = std::min(h * ratio, h_far);
                ++n;
            }
            return 2 * n + 1;
        };
        const std::size_t estimate = count(hx0, qx, core_x) * count(hy0, q, core_y);
        if (estimate > spec.max_nodes)
            throw ResolutionError("resolution infeasible: " + std::to_string(estimate) + " grid nodes needed for eps = " +
                                  std::to_string(eps) + ", budget is " + std::to_string(spec.max_nodes));
        g.xs = graded_axis(hx0, qx, h_far, extent, core_x);
        g.ys = graded_axis(hy0, q, h_far, extent, core_y);
    } else {
        g.xs = graded_axis(h_far, 1.0, h_far, extent);
        g.ys = g.xs;
        if (g.xs.size() * g.ys.size() > spec.max_nodes)
            throw ResolutionError("resolution infeasible: grid exceeds node budget");
    }

    const std::size_t nx = g.nx(), ny = g.ny();
    g.kinds.resize(nx * ny);
    g.unknown_of.assign(nx * ny, -1);
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) {
            const std::size_t n = i + nx * j;
            g.kinds[n] = detail::classify(d, Point{g.xs[i], g.ys[j], 0.0});
            if (g.kinds[n] == NodeKind::unknown) {
                if (i == 0 || j == 0 || i + 1 == nx || j + 1 == ny)
                    throw SolverError("grid does not cover the domain");
                g.unknown_of[n] = static_cast<std::int32_t>(g.ij.size());
                g.ij.push_back({static_cast<std::int32_t>(i), static_cast<std::int32_t>(j)});
            }
        }

    g.arms.resize(g.ij.size());
    constexpr int di[arm_count] = {1, -1, 0, 0};
    constexpr int dj[arm_count] = {0, 0, 1, -1};
    for (std::size_t u = 0; u < g.ij.size(); ++u) {
        const auto [i, j] = g.ij[u];
        const Point p0{g.xs[i], g.ys[j], 0.0};
        // Dual cell widths of the tensor grid; the same on both sides of an edge.
        const double wx = 0.5 * (g.xs[i + 1] - g.xs[i - 1]);
        const double wy = 0.5 * (g.ys[j + 1] - g.ys[j - 1]);
        for (int a = 0; a < arm_count; ++a) {
            const std::size_t ii = static_cast<std::size_t>(i + di[a]);
            const std::size_t jj = static_cast<std::size_t>(j + dj[a]);
            const std::size_t n = ii + nx * jj;
            const double face = a < 2 ? wy : wx;
            const double full = a < 2 ? std::abs(g.xs[ii] - g.xs[i]) : std::abs(g.ys[jj] - g.ys[j]);
            Arm& arm = g.arms[u][a];
            if (g.kinds[n] == NodeKind::unknown) {
                arm.target = g.unknown_of[n];
                arm.length = full;
                arm.coeff = face / full;
                continue;
            }
            // The segment may leave through several boundaries only in degenerate layouts; take the nearest.
            const Point p1{g.xs[ii], g.ys[jj], 0.0};
            double t_best = 2.0;
            BoundaryTag tag = BoundaryTag::outer;
            if (d.outer.level(p1) <= 0.0) {
                t_best = detail::crossing([&](const Point& p) { return d.outer.level(p); }, p0, p1);
            }
            for (std::size_t m = 0; m < d.inclusions.size(); ++m) {
                if (d.inclusions[m].level(p1) > 0.0) continue;
                const double t = detail::crossing([&](const Point& p) { return d.inclusions[m].level(p); }, p0, p1);
                if (t < t_best) {
                    t_best = t;
                    tag = m == 0 ? BoundaryTag::inclusion1 : BoundaryTag::inclusion2;
                }
            }
            t_best = std::clamp(t_best, 1e-12, 1.0);
            BoundaryPoint bp;
            bp.position = Point{p0[0] + t_best * (p1[0] - p0[0]), p0[1] + t_best * (p1[1] - p0[1]), 0.0};
            bp.tag = tag;
            bp.node = static_cast<std::int32_t>(u);
            arm.length = t_best * full;
            arm.coeff = face / arm.length;
            bp.coeff = arm.coeff;
            arm.target = -static_cast<std::int32_t>(g.boundary.size()) - 1;
            g.boundary.push_back(bp);
        }
    }

    if (d.gap) {
        const int across = g.gap_nodes_on_axis(d.gap->eps);
        if (across < spec.gap_layers)
            throw ResolutionError("resolution infeasible: only " + std::to_string(across) + " nodes across the gap");
    }
    return g;
}

} // namespace gapcond
