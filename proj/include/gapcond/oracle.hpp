#pragma once

// Independent references: the radial annulus harmonic, Richardson extrapolation
// over grid refinements, and mirror-symmetry relations.

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "gapcond/errors.hpp"
#include "gapcond/field_solver.hpp"
#include "gapcond/geometry.hpp"
#include "gapcond/grid.hpp"

namespace gapcond {

/// Harmonic function equal to 1 on |x| = r_in and 0 on |x| = R_out.
inline double annulus_exact(int n, double r_in, double R_out, double r)
{
    if (n != 2 && n != 3) throw ConfigError("annulus_exact: dimension must be 2 or 3");
    if (!(0.0 < r_in && r_in < R_out)) throw ConfigError("annulus_exact: need 0 < r_in < R_out");
    if (!(r >= r_in * (1 - 1e-12) && r <= R_out * (1 + 1e-12))) throw DomainError("annulus_exact: point outside the annulus");
    if (n == 2) return std::log(r / R_out) / std::log(r_in / R_out);
    return (1.0 / r - 1.0 / R_out) / (1.0 / r_in - 1.0 / R_out);
}

/// d/dr of annulus_exact.
inline double annulus_radial_derivative(int n, double r_in, double R_out, double r)
{
    annulus_exact(n, r_in, R_out, r);
    if (n == 2) return 1.0 / (r * std::log(r_in / R_out));
    return -1.0 / (r * r * (1.0 / r_in - 1.0 / R_out));
}

/// Dirichlet energy of annulus_exact: 2 pi / ln(R_out/r_in) in 2D, 4 pi / (1/r_in - 1/R_out) in 3D.
inline double annulus_energy(int n, double r_in, double R_out)
{
    annulus_exact(n, r_in, R_out, r_in);
    if (n == 2) return 2.0 * std::numbers::pi / std::log(R_out / r_in);
    return 4.0 * std::numbers::pi / (1.0 / r_in - 1.0 / R_out);
}

struct OracleCase {
    std::string name;
    std::function<double(const Point&)> evaluate;
    std::function<bool(const Domain2D&)> applicable;
};

inline OracleCase annulus_case(double r_in, double R_out)
{
    return {"annulus", [=](const Point& p) { return annulus_exact(2, r_in, R_out, std::hypot(p[0], p[1])); },
            [=](const Domain2D& d) {
                if (d.inclusions.size() != 1 || d.outer.kind != OuterKind::disc) return false;
                const auto& s = d.inclusions.front().shape;
                return s.kind == ShapeKind::disc && std::abs(d.outer.radius - R_out) < 1e-12 &&
                       std::abs(s.min_semi_axis() - r_in) < 1e-12 && std::hypot(s.center[0], s.center[1] + d.inclusions.front().shift) < 1e-12;
            }};
}

struct RefinementResult {
    std::vector<double> values;    // coarse to fine, spacing halved each level
    double extrapolated = 0.0;     // second-order Richardson on the two finest levels
    double error = 0.0;            // |extrapolated - finest|
    double observed_order = 0.0;   // from the three finest levels
    bool monotone = true;          // successive differences keep their sign and shrink
};

/// Richardson extrapolation assuming second order. problem(k) evaluates the quantity
/// on a grid whose spacings are divided by k; levels use k = 1, 2, 4, ...
inline RefinementResult refine_oracle(const std::function<double(int)>& problem, int levels)
{
    if (levels < 3) throw ConfigError("refine_oracle needs at least 3 levels");
    RefinementResult r;
    for (int l = 0, k = 1; l < levels; ++l, k *= 2) r.values.push_back(problem(k));
    const std::size_t m = r.values.size();
    const double fine = r.values[m - 1], mid = r.values[m - 2], coarse = r.values[m - 3];
    r.extrapolated = fine + (fine - mid) / 3.0;
    r.error = std::abs(r.extrapolated - fine);
    const double d1 = mid - coarse, d2 = fine - mid;
    r.observed_order = (d1 != 0.0 && d2 != 0.0) ? std::log2(std::abs(d1 / d2)) : std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 2; i < m; ++i) {
        const double a = r.values[i - 1] - r.values[i - 2], b = r.values[i] - r.values[i - 1];
        if (a * b < 0.0 || std::abs(b) >= std::abs(a)) r.monotone = false;
    }
    return r;
}

enum class Parity { even, odd, none };

struct SolvedConfiguration {
    std::shared_ptr<const GradedGrid> grid;
    DiscreteField v1, v2, v0, u;
    FluxSystem fluxes;
};

struct SymmetryRelation {
    std::string name;
    std::function<double(const SolvedConfiguration&)> defect;   // 0 when the relation holds exactly
};

/// Mirror x_n -> -x_n of the grid: index map of unknowns, or empty when the grid
/// is not symmetric.
inline std::vector<std::int32_t> mirror_map(const GradedGrid& g)
{
    const std::size_t ny = g.ny();
    for (std::size_t j = 0; j < ny; ++j)
        if (std::abs(g.ys[j] + g.ys[ny - 1 - j]) > 1e-12 * (1.0 + std::abs(g.ys[j]))) return {};
    std::vector<std::int32_t> out(g.unknowns());
    for (std::size_t k = 0; k < g.unknowns(); ++k) {
        const auto [i, j] = g.ij[k];
        const auto mirrored = g.unknown_of[static_cast<std::size_t>(i) + g.nx() * (ny - 1 - static_cast<std::size_t>(j))];
        if (mirrored < 0) return {};
        out[k] = mirrored;
    }
    return out;
}

/// True when the lower shape is the mirror image of the upper one and the outer
/// domain is symmetric in x_n (all supported outer kinds are centred).
inline bool mirror_symmetric(const InclusionShape& upper, const InclusionShape& lower)
{
    if (upper.kind != lower.kind || upper.dim != lower.dim) return false;
    for (int j = 0; j < 3; ++j)
        if (std::abs(upper.center[static_cast<std::size_t>(j)] - (j == upper.dim - 1 ? -1.0 : 1.0) * lower.center[static_cast<std::size_t>(j)]) > 1e-12)
            return false;
    if (upper.tangential_axes != lower.tangential_axes || upper.normal_axis != lower.normal_axis) return false;
    // The contact graphs must agree up to sign: h2(x') = -h1(x').
    for (double t : {-0.3, -0.1, 0.05, 0.2})
        if (std::abs(upper.contact_graph({t * upper.graph_radius(), 0.0}) + lower.contact_graph({t * lower.graph_radius(), 0.0})) > 1e-12)
            return false;
    return true;
}

/// Relations implied by mirror symmetry for boundary data of the given parity in x_n.
inline std::vector<SymmetryRelation> symmetry_oracle(Parity phi_parity)
{
    std::vector<SymmetryRelation> rel;
    const auto mirror_defect = [](const DiscreteField& a, const DiscreteField& b, double sign) {
        const auto map = mirror_map(*a.grid);
        if (map.empty()) throw ConfigError("symmetry oracle: grid is not mirror symmetric");
        double d = 0.0;
        for (std::size_t k = 0; k < map.size(); ++k)
            d = std::max(d, std::abs(b.values[static_cast<std::size_t>(map[k])] - sign * a.values[k]));
        return d;
    };
    rel.push_back({"v2(x', -x_n) = v1(x', x_n)", [=](const SolvedConfiguration& s) { return mirror_defect(s.v1, s.v2, 1.0); }});
    if (phi_parity == Parity::odd) {
        rel.push_back({"u odd in x_n", [=](const SolvedConfiguration& s) { return mirror_defect(s.u, s.u, -1.0); }});
        rel.push_back({"C1 = -C2", [](const SolvedConfiguration& s) { return std::abs(s.fluxes.C1 + s.fluxes.C2); }});
    } else if (phi_parity == Parity::even) {
        rel.push_back({"u even in x_n", [=](const SolvedConfiguration& s) { return mirror_defect(s.u, s.u, 1.0); }});
        rel.push_back({"C1 = C2", [](const SolvedConfiguration& s) { return std::abs(s.fluxes.C1 - s.fluxes.C2); }});
    }
    return rel;
}

} // namespace gapcond
