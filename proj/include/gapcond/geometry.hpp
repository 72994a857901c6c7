#pragma once

// Inclusion shapes, their epsilon-translation, and the local description of
// the thin gap between them as a pair of graphs over the tangent plane.
//
// Conventions: the contact point is the origin and the contact axis is x_n
// (the last coordinate). The upper inclusion D1 lies in x_n > 0, the lower
// inclusion D2 in x_n < 0. Points are stored as std::array<double, 3>; in 2D
// only the first two entries are used.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "gapcond/errors.hpp"

namespace gapcond {

using Point = std::array<double, 3>;

/// Coordinates x' in the tangent plane of the contact point. x2 is unused in 2D.
struct Tangent {
    double x1 = 0.0;
    double x2 = 0.0;

    double norm() const { return std::hypot(x1, x2); }
};

inline Tangent tangent_of(const Point& p, int dim) { return dim == 2 ? Tangent{p[0], 0.0} : Tangent{p[0], p[1]}; }
inline double normal_of(const Point& p, int dim) { return p[dim - 1]; }

inline Point make_point(int dim, Tangent t, double xn)
{
    return dim == 2 ? Point{t.x1, xn, 0.0} : Point{t.x1, t.x2, xn};
}

enum class ShapeKind { disc, ellipse, perturbed_disc };
enum class Side { upper, lower };

inline std::string to_string(ShapeKind k)
{
    switch (k) {
    case ShapeKind::disc: return "disc";
    case ShapeKind::ellipse: return "ellipse";
    case ShapeKind::perturbed_disc: return "perturbed_disc";
    }
    return "?";
}

/// A convex inclusion: a disc/ball, an axis-aligned ellipse/ellipsoid, or a
/// disc sheared along x_n by a cubic polynomial of x'.
///
/// The shape occupies
///   sum_i ((x_i - c_i) / a_i)^2 + ((x_n - c_n - s p(x' - c')) / b)^2 < 1
/// where a_i are the tangential semi-axes, b the normal semi-axis, p the cubic
/// perturbation and s = +1 for an upper shape, -1 for a lower one. The cubic
/// term vanishes to third order at x' = c', so it leaves the contact Hessian
/// unchanged.
struct InclusionShape {
    ShapeKind kind = ShapeKind::disc;
    int dim = 2;
    Point center{};
    std::array<double, 2> tangential_axes{1.0, 1.0};
    double normal_axis = 1.0;
    // 2D: {c} for c x1^3.  3D: {c30, c21, c12, c03} for x1^3, x1^2 x2, x1 x2^2, x2^3.
    std::vector<double> cubic_coeffs;

    static InclusionShape disc(double radius, Side side, int dim = 2)
    {
        InclusionShape s;
        s.kind = ShapeKind::disc;
        s.dim = dim;
        s.tangential_axes = {radius, radius};
        s.normal_axis = radius;
        s.center[dim - 1] = side == Side::upper ? radius : -radius;
        return s;
    }

    static InclusionShape ellipse(std::array<double, 2> tangential, double normal, Side side, int dim = 2)
    {
        InclusionShape s;
        s.kind = ShapeKind::ellipse;
        s.dim = dim;
        s.tangential_axes = dim == 2 ? std::array<double, 2>{tangential[0], tangential[0]} : tangential;
        s.normal_axis = normal;
        s.center[dim - 1] = side == Side::upper ? normal : -normal;
        return s;
    }

    static InclusionShape perturbed_disc(double radius, std::vector<double> cubic, Side side, int dim = 2)
    {
        InclusionShape s = disc(radius, side, dim);
        s.kind = ShapeKind::perturbed_disc;
        s.cubic_coeffs = std::move(cubic);
        return s;
    }

    Side side() const { return center[dim - 1] >= 0.0 ? Side::upper : Side::lower; }
    double orientation() const { return side() == Side::upper ? 1.0 : -1.0; }

    double min_semi_axis() const
    {
        double m = std::min(tangential_axes[0], normal_axis);
        return dim == 3 ? std::min(m, tangential_axes[1]) : m;
    }

    /// Largest |x' - c'| for which the contact graph is defined.
    double graph_radius() const { return dim == 3 ? std::min(tangential_axes[0], tangential_axes[1]) : tangential_axes[0]; }

    double cubic(Tangent t) const
    {
        if (cubic_coeffs.empty()) return 0.0;
        if (dim == 2) return cubic_coeffs[0] * t.x1 * t.x1 * t.x1;
        const auto& c = cubic_coeffs;
        return c[0] * t.x1 * t.x1 * t.x1 + c[1] * t.x1 * t.x1 * t.x2 + c[2] * t.x1 * t.x2 * t.x2 + c[3] * t.x2 * t.x2 * t.x2;
    }

    double tangential_form(Tangent t) const
    {
        const double u = (t.x1 - center[0]) / tangential_axes[0];
        if (dim == 2) return u * u;
        const double v = (t.x2 - center[1]) / tangential_axes[1];
        return u * u + v * v;
    }

    Tangent local(Tangent t) const { return dim == 2 ? Tangent{t.x1 - center[0], 0.0} : Tangent{t.x1 - center[0], t.x2 - center[1]}; }

    /// Negative inside, zero on the boundary, positive outside. Not a distance.
    double level(const Point& p) const
    {
        const Tangent t = tangent_of(p, dim);
        const double z = (normal_of(p, dim) - center[dim - 1] - orientation() * cubic(local(t))) / normal_axis;
        return std::sqrt(tangential_form(t) + z * z) - 1.0;
    }

    /// The part of the boundary facing the contact point, as a graph over x'.
    double contact_graph(Tangent t) const
    {
        const double q = tangential_form(t);
        if (q >= 1.0) throw DomainError("contact graph evaluated outside the shape's tangential extent");
        // b - b sqrt(1 - q) written without cancellation.
        const double sag = normal_axis * q / (1.0 + std::sqrt(1.0 - q));
        const double cn = center[dim - 1];
        const double p = cubic(local(t));
        return side() == Side::upper ? (cn - normal_axis) + sag + p : (cn + normal_axis) - sag - p;
    }

    void validate() const
    {
        if (dim != 2 && dim != 3) throw ConfigError("inclusion dimension must be 2 or 3");
        if (!(normal_axis > 0.0) || !(tangential_axes[0] > 0.0) || (dim == 3 && !(tangential_axes[1] > 0.0)))
            throw ConfigError("inclusion semi-axes must be positive");
        if (kind == ShapeKind::disc) {
            const bool round = tangential_axes[0] == normal_axis && (dim == 2 || tangential_axes[1] == normal_axis);
            if (!round) throw ConfigError("disc inclusion with unequal semi-axes");
        }
        if (kind != ShapeKind::perturbed_disc && !cubic_coeffs.empty())
            throw ConfigError("cubic coefficients are only allowed for perturbed_disc shapes");
        if (kind == ShapeKind::perturbed_disc) {
            const std::size_t want = dim == 2 ? 1 : 4;
            if (cubic_coeffs.size() != want)
                throw ConfigError("perturbed_disc needs " + std::to_string(want) + " cubic coefficients in " +
                                  std::to_string(dim) + "D");
            double total = 0.0;
            for (double c : cubic_coeffs) total += std::abs(c);
            // Keeps the sheared boundary strictly convex as a graph over its tangential extent.
            if (total > 1.0 / (8.0 * normal_axis * normal_axis))
                throw ConfigError("cubic perturbation too large: shape would lose strict convexity");
        }
    }
};

/// An inclusion shifted along x_n by `shift`.
struct PlacedInclusion {
    InclusionShape shape;
    double shift = 0.0;

    double level(const Point& p) const
    {
        Point q = p;
        q[shape.dim - 1] -= shift;
        return shape.level(q);
    }

    /// Boundary point for parameter angle phi (2D only); used for containment sampling.
    Point boundary_point(double phi) const
    {
        const double dx = shape.tangential_axes[0] * std::cos(phi);
        const double y = shape.center[1] + shift + shape.orientation() * shape.cubic(Tangent{dx, 0.0}) +
                         shape.normal_axis * std::sin(phi);
        return Point{shape.center[0] + dx, y, 0.0};
    }
};

/// Shape pair touching at the origin, D1 above and D2 below.
inline void check_touching(const InclusionShape& upper, const InclusionShape& lower)
{
    upper.validate();
    lower.validate();
    if (upper.dim != lower.dim) throw ConfigError("inclusions have different dimensions");
    if (upper.side() != Side::upper) throw ConfigError("first inclusion must lie above the contact plane (center x_n > 0)");
    if (lower.side() != Side::lower) throw ConfigError("second inclusion must lie below the contact plane (center x_n < 0)");
    constexpr double tol = 1e-12;
    for (const InclusionShape* s : {&upper, &lower}) {
        const bool centered = std::abs(s->center[0]) <= tol && (s->dim == 2 || std::abs(s->center[1]) <= tol);
        if (!centered || std::abs(s->contact_graph(Tangent{})) > tol)
            throw ConfigError("inclusions are not tangent at the origin when eps = 0");
    }
}

/// D1 = D1* + (0', eps/2), D2 = D2* - (0', eps/2).
inline std::array<PlacedInclusion, 2> translate_pair(const InclusionShape& upper, const InclusionShape& lower, double eps)
{
    if (!(eps >= 0.0)) throw ConfigError("separation eps must be non-negative");
    check_touching(upper, lower);
    return {PlacedInclusion{upper, 0.5 * eps}, PlacedInclusion{lower, -0.5 * eps}};
}

/// Local gap description over |x'| <= R0.
struct GapGeometry {
    int dim = 2;
    double eps = 0.0;
    double R0 = 0.0;
    std::function<double(Tangent)> h1;
    std::function<double(Tangent)> h2;
    std::vector<double> lambdas;
    double kappa_lb = 0.0;
};

/// Ascending eigenvalues of the Hessian of h1 - h2 at 0', by Richardson-extrapolated
/// central differences. Throws when the smallest one falls below geom.kappa_lb.
inline std::vector<double> relative_curvatures(const GapGeometry& geom)
{
    const auto d = [&](double a, double b) { return geom.h1(Tangent{a, b}) - geom.h2(Tangent{a, b}); };
    const double s0 = 0.02 * std::min(geom.R0, 1.0);
    const auto hessian = [&](double s) {
        std::array<double, 3> h{};
        const double f0 = d(0.0, 0.0);
        h[0] = (d(s, 0.0) - 2.0 * f0 + d(-s, 0.0)) / (s * s);
        if (geom.dim == 3) {
            h[2] = (d(0.0, s) - 2.0 * f0 + d(0.0, -s)) / (s * s);
            h[1] = (d(s, s) - d(s, -s) - d(-s, s) + d(-s, -s)) / (4.0 * s * s);
        }
        return h;
    };
    const auto coarse = hessian(s0);
    const auto fine = hessian(0.5 * s0);
    std::array<double, 3> H{};
    for (int k = 0; k < 3; ++k) H[k] = (4.0 * fine[k] - coarse[k]) / 3.0;

    std::vector<double> eig;
    if (geom.dim == 2) {
        eig = {H[0]};
    } else {
        const double mean = 0.5 * (H[0] + H[2]);
        const double rad = std::hypot(0.5 * (H[0] - H[2]), H[1]);
        eig = {mean - rad, mean + rad};
    }
    if (eig.front() < geom.kappa_lb)
        throw ConfigError("relative curvature " + std::to_string(eig.front()) + " is below kappa_lb = " +
                          std::to_string(geom.kappa_lb));
    return eig;
}

/// R0 = min(0.5 * smallest semi-axis, largest r on which both contact graphs have slope < 1).
inline double patch_radius(const InclusionShape& upper, const InclusionShape& lower)
{
    const double half_min = 0.5 * std::min(upper.min_semi_axis(), lower.min_semi_axis());
    const double r_max = 0.999 * std::min(upper.graph_radius(), lower.graph_radius());
    const int directions = upper.dim == 2 ? 2 : 64;
    const int steps = 4000;
    const double dr = r_max / steps;
    const double fd = 1e-7;
    const auto slope = [&](const InclusionShape& s, Tangent t) {
        const double gx = (s.contact_graph({t.x1 + fd, t.x2}) - s.contact_graph({t.x1 - fd, t.x2})) / (2 * fd);
        if (s.dim == 2) return std::abs(gx);
        const double gy = (s.contact_graph({t.x1, t.x2 + fd}) - s.contact_graph({t.x1, t.x2 - fd})) / (2 * fd);
        return std::hypot(gx, gy);
    };
    double r_slope = r_max;
    for (int k = 0; k < directions; ++k) {
        const double th = 2.0 * std::numbers::pi * k / directions;
        for (int i = 1; i <= steps; ++i) {
            const double r = i * dr;
            const Tangent t{r * std::cos(th), r * std::sin(th)};
            if (r + fd >= r_max || slope(upper, t) >= 1.0 || slope(lower, t) >= 1.0) {
                r_slope = std::min(r_slope, (i - 1) * dr);
                break;
            }
        }
    }
    return std::min(half_min, r_slope);
}

/// Gap geometry of a touching shape pair at separation eps.
inline GapGeometry make_gap_geometry(const InclusionShape& upper, const InclusionShape& lower, double eps, double kappa_lb)
{
    if (!(eps >= 0.0)) throw ConfigError("separation eps must be non-negative");
    if (!(kappa_lb > 0.0)) throw ConfigError("kappa_lb must be positive");
    check_touching(upper, lower);
    GapGeometry g;
    g.dim = upper.dim;
    g.eps = eps;
    g.R0 = patch_radius(upper, lower);
    g.h1 = [upper](Tangent t) { return upper.contact_graph(t); };
    g.h2 = [lower](Tangent t) { return lower.contact_graph(t); };
    g.kappa_lb = kappa_lb;
    g.lambdas = relative_curvatures(g);
    return g;
}

/// h1 = (lambda_1 x1^2 + lambda_2 x2^2) / 4, h2 = -h1: the pure quadratic gap with
/// relative curvatures lambda.
inline GapGeometry quadratic_gap_geometry(int dim, std::vector<double> lambdas, double eps, double R0, double kappa_lb = 0.0)
{
    if (dim != 2 && dim != 3) throw ConfigError("dimension must be 2 or 3");
    if (lambdas.size() != static_cast<std::size_t>(dim - 1)) throw ConfigError("need n-1 relative curvatures");
    for (double l : lambdas)
        if (!(l > 0.0)) throw ConfigError("relative curvatures must be positive");
    std::sort(lambdas.begin(), lambdas.end());
    GapGeometry g;
    g.dim = dim;
    g.eps = eps;
    g.R0 = R0;
    const double l1 = lambdas[0];
    const double l2 = dim == 3 ? lambdas[1] : 0.0;
    g.h1 = [l1, l2](Tangent t) { return 0.25 * (l1 * t.x1 * t.x1 + l2 * t.x2 * t.x2); };
    g.h2 = [l1, l2](Tangent t) { return -0.25 * (l1 * t.x1 * t.x1 + l2 * t.x2 * t.x2); };
    g.lambdas = std::move(lambdas);
    g.kappa_lb = kappa_lb > 0.0 ? kappa_lb : 0.5 * g.lambdas.front();
    return g;
}

inline GapGeometry with_eps(GapGeometry g, double eps)
{
    g.eps = eps;
    return g;
}

/// delta(x') = eps + h1(x') - h2(x').
inline double gap_width(const GapGeometry& geom, Tangent xp)
{
    if (xp.norm() > geom.R0 * (1.0 + 1e-12)) throw DomainError("gap_width: |x'| exceeds R0");
    return geom.eps + geom.h1(xp) - geom.h2(xp);
}

/// Omega_r = { -eps/2 + h2(x') < x_n < eps/2 + h1(x'), |x'| < r }.
class GapPatch {
public:
    GapPatch(GapGeometry geom, double r) : geom_(std::move(geom)), r_(r) {}

    double radius() const { return r_; }
    const GapGeometry& geometry() const { return geom_; }

    bool contains(const Point& p) const
    {
        const Tangent t = tangent_of(p, geom_.dim);
        if (!(t.norm() < r_)) return false;
        const double xn = normal_of(p, geom_.dim);
        return -0.5 * geom_.eps + geom_.h2(t) < xn && xn < 0.5 * geom_.eps + geom_.h1(t);
    }

private:
    GapGeometry geom_;
    double r_;
};

inline GapPatch gap_patch(const GapGeometry& geom, double r)
{
    if (!(r > 0.0) || r > geom.R0 * (1.0 + 1e-12)) throw DomainError("gap_patch: radius must lie in (0, R0]");
    return GapPatch(geom, r);
}

enum class OuterKind { disc, ball, rounded_rectangle };

/// The container Omega. `level` is positive inside.
struct OuterDomain {
    OuterKind kind = OuterKind::disc;
    double radius = 4.0;                    // disc, ball
    std::array<double, 2> half_widths{};    // rounded_rectangle
    double corner_radius = 0.0;             // rounded_rectangle
    double clearance = 0.0;

    int dim() const { return kind == OuterKind::ball ? 3 : 2; }

    double level(const Point& p) const
    {
        switch (kind) {
        case OuterKind::disc: return radius - std::hypot(p[0], p[1]);
        case OuterKind::ball: return radius - std::hypot(p[0], p[1], p[2]);
        case OuterKind::rounded_rectangle: {
            const double qx = std::abs(p[0]) - (half_widths[0] - corner_radius);
            const double qy = std::abs(p[1]) - (half_widths[1] - corner_radius);
            const double outside = std::hypot(std::max(qx, 0.0), std::max(qy, 0.0));
            return -(outside + std::min(std::max(qx, qy), 0.0) - corner_radius);
        }
        }
        return 0.0;
    }

    /// Half-width of a bounding box.
    double extent() const
    {
        return kind == OuterKind::rounded_rectangle ? std::max(half_widths[0], half_widths[1]) : radius;
    }

    void validate() const
    {
        if (kind == OuterKind::rounded_rectangle) {
            if (!(half_widths[0] > 0.0 && half_widths[1] > 0.0) || !(corner_radius > 0.0) ||
                corner_radius > std::min(half_widths[0], half_widths[1]))
                throw ConfigError("rounded rectangle needs positive half-widths and 0 < corner radius <= half-width");
        } else if (!(radius > 0.0)) {
            throw ConfigError("outer domain radius must be positive");
        }
        if (clearance < 0.0) throw ConfigError("clearance must be non-negative");
    }
};

/// Throws unless every inclusion boundary stays at least `outer.clearance` inside Omega
/// (measured by the outer level function, which is a signed distance for all kinds).
inline void check_contained(const OuterDomain& outer, const std::vector<PlacedInclusion>& inclusions)
{
    outer.validate();
    constexpr int samples = 1440;
    for (const auto& inc : inclusions) {
        if (inc.shape.dim != outer.dim())
            throw ConfigError("outer domain and inclusion dimensions differ");
        for (int k = 0; k < samples; ++k) {
            const double phi = 2.0 * std::numbers::pi * k / samples;
            if (inc.shape.dim == 2) {
                if (outer.level(inc.boundary_point(phi)) < outer.clearance)
                    throw ConfigError("inclusion does not fit inside the outer domain with the requested clearance");
            } else {
                for (int m = 0; m <= 32; ++m) {
                    const double th = std::numbers::pi * m / 32;
                    const auto& s = inc.shape;
                    const double dx = s.tangential_axes[0] * std::sin(th) * std::cos(phi);
                    const double dy = s.tangential_axes[1] * std::sin(th) * std::sin(phi);
                    const Point p{s.center[0] + dx, s.center[1] + dy,
                                  s.center[2] + inc.shift + s.orientation() * s.cubic({dx, dy}) + s.normal_axis * std::cos(th)};
                    if (outer.level(p) < outer.clearance)
                        throw ConfigError("inclusion does not fit inside the outer domain with the requested clearance");
                }
            }
        }
    }
}

} // namespace gapcond
