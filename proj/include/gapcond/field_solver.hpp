#pragma once

// Harmonic potentials on the perforated domain: the capacity potentials v1, v2,
// the boundary-data potential v0, their flux integrals, and the constants
// C1, C2 of the perfect-conductor solution u = C1 v1 + C2 v2 + v0.
//
// Discretization: five-point finite volumes on the graded tensor grid. An arm
// that leaves the domain is cut at the boundary crossing and keeps the nominal
// dual face width, which makes the operator symmetric positive definite and
// second-order accurate. Fluxes are the discrete reactions c (g_b - u_k)
// summed over boundary crossings, so the discrete Green identities hold up to
// the linear-solve residual.
//
// Sign convention: every flux is the derivative along the normal pointing out
// of the perforated domain, which is d/dnu^- on the inclusion boundaries and
// d/dnu on the outer boundary.

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gapcond/errors.hpp"
#include "gapcond/geometry.hpp"
#include "gapcond/grid.hpp"
#include "gapcond/linear_solver.hpp"

namespace gapcond {

/// Dirichlet data phi on the outer boundary.
struct BoundaryData {
    std::function<double(const Point&)> phi;
    std::string description;
};

inline BoundaryData constant_data(double c) { return {[c](const Point&) { return c; }, "constant"}; }

struct DiscreteField {
    std::shared_ptr<const GradedGrid> grid;
    std::vector<double> values;            // per unknown node
    std::vector<double> boundary_values;   // per boundary crossing, the imposed data
    std::string label;
    double relative_residual = 0.0;

    double boundary_value(const Arm& arm) const { return boundary_values[arm.boundary_index()]; }
    double neighbour(const Arm& arm) const
    {
        return arm.to_boundary() ? boundary_value(arm) : values[static_cast<std::size_t>(arm.target)];
    }
};

/// Nodewise a*f + b*g + c*h on a shared grid.
inline DiscreteField combine(double a, const DiscreteField& f, double b, const DiscreteField& g, double c,
                             const DiscreteField& h, std::string label)
{
    if (f.grid != g.grid || f.grid != h.grid) throw ConfigError("fields live on different grids");
    DiscreteField out{f.grid, f.values, f.boundary_values, std::move(label), 0.0};
    for (std::size_t k = 0; k < out.values.size(); ++k) out.values[k] = a * f.values[k] + b * g.values[k] + c * h.values[k];
    for (std::size_t k = 0; k < out.boundary_values.size(); ++k)
        out.boundary_values[k] = a * f.boundary_values[k] + b * g.boundary_values[k] + c * h.boundary_values[k];
    out.relative_residual = std::max({f.relative_residual, g.relative_residual, h.relative_residual});
    return out;
}

inline DiscreteField add(const DiscreteField& f, const DiscreteField& g, std::string label)
{
    return combine(1.0, f, 1.0, g, 0.0, g, std::move(label));
}

/// Assembled operator plus factorization, shared by all solves on one grid.
class FieldSolver {
public:
    FieldSolver(std::shared_ptr<const GradedGrid> grid, SolverOptions opt = {}) : grid_(std::move(grid))
    {
        const auto& g = *grid_;
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(5 * g.unknowns());
        for (std::size_t k = 0; k < g.unknowns(); ++k) {
            double diag = 0.0;
            for (const Arm& arm : g.arms[k]) {
                diag += arm.coeff;
                if (!arm.to_boundary())
                    trip.emplace_back(static_cast<int>(k), arm.target, -arm.coeff);
            }
            trip.emplace_back(static_cast<int>(k), static_cast<int>(k), diag);
        }
        SparseMatrix A(static_cast<int>(g.unknowns()), static_cast<int>(g.unknowns()));
        A.setFromTriplets(trip.begin(), trip.end());
        solver_ = std::make_unique<SpdSolver>(std::move(A), opt);
    }

    const GradedGrid& grid() const { return *grid_; }
    std::shared_ptr<const GradedGrid> grid_ptr() const { return grid_; }

    /// Harmonic field with boundary values data(tag, position).
    DiscreteField solve(const std::function<double(BoundaryTag, const Point&)>& data, std::string label) const
    {
        const auto& g = *grid_;
        DiscreteField f;
        f.grid = grid_;
        f.label = std::move(label);
        f.boundary_values.resize(g.boundary.size());
        Vector rhs = Vector::Zero(static_cast<Eigen::Index>(g.unknowns()));
        for (std::size_t b = 0; b < g.boundary.size(); ++b) {
            const auto& bp = g.boundary[b];
            const double v = data(bp.tag, bp.position);
            if (!std::isfinite(v)) throw ConfigError("boundary data is not finite at a boundary node");
            f.boundary_values[b] = v;
            rhs[bp.node] += bp.coeff * v;
        }
        SolveStats stats;
        const Vector x = solver_->solve(rhs, &stats);
        f.values.assign(x.data(), x.data() + x.size());
        f.relative_residual = stats.relative_residual;
        return f;
    }

private:
    std::shared_ptr<const GradedGrid> grid_;
    std::unique_ptr<SpdSolver> solver_;
};

/// v_i: 1 on the boundary of inclusion i, 0 on the other inclusion and on the outer boundary.
inline DiscreteField solve_vi(int i, const FieldSolver& solver)
{
    if (i < 1 || i > solver.grid().inclusion_count) throw ConfigError("solve_vi: inclusion index out of range");
    const auto want = i == 1 ? BoundaryTag::inclusion1 : BoundaryTag::inclusion2;
    return solver.solve([want](BoundaryTag t, const Point&) { return t == want ? 1.0 : 0.0; }, "v" + std::to_string(i));
}

/// v0: phi on the outer boundary, 0 on both inclusions.
inline DiscreteField solve_v0(const BoundaryData& data, const FieldSolver& solver)
{
    return solver.solve([&](BoundaryTag t, const Point& p) { return t == BoundaryTag::outer ? data.phi(p) : 0.0; }, "v0");
}

namespace detail {

// The reaction of a node on its boundary arms, c_b (g_b - u_k), is evaluated through
// the node's own equation as minus the sum over its interior arms. Cut arms can be
// very short with huge conductances, and the direct form loses digits to
// cancellation; the interior form keeps the Green identities at rounding level.
// Nodes whose boundary arms touch more than one boundary fall back to the direct form.
inline double boundary_flux(const DiscreteField& f, auto&& select)
{
    const auto& g = *f.grid;
    long double sum = 0.0L;
    for (std::size_t k = 0; k < g.unknowns(); ++k) {
        const auto& arms = g.arms[k];
        int tag = -1;
        bool mixed = false;
        for (const Arm& arm : arms) {
            if (!arm.to_boundary()) continue;
            const int t = static_cast<int>(g.boundary[arm.boundary_index()].tag);
            if (tag >= 0 && t != tag) mixed = true;
            tag = t;
        }
        if (tag < 0) continue;
        const double uk = f.values[k];
        if (mixed) {
            for (const Arm& arm : arms)
                if (arm.to_boundary() && select(g.boundary[arm.boundary_index()].tag))
                    sum += static_cast<long double>(arm.coeff) * (f.boundary_value(arm) - uk);
            continue;
        }
        if (!select(static_cast<BoundaryTag>(tag))) continue;
        for (const Arm& arm : arms)
            if (!arm.to_boundary()) sum -= static_cast<long double>(arm.coeff) * (f.neighbour(arm) - uk);
    }
    return static_cast<double>(sum);
}

} // namespace detail

/// Integral of the one-sided normal derivative over the boundary of inclusion i.
inline double flux_inclusion(const DiscreteField& f, int i)
{
    if (i < 1 || i > f.grid->inclusion_count) throw ConfigError("flux_inclusion: inclusion index out of range");
    const auto want = i == 1 ? BoundaryTag::inclusion1 : BoundaryTag::inclusion2;
    return detail::boundary_flux(f, [want](BoundaryTag t) { return t == want; });
}

/// Integral of the outward normal derivative over the outer boundary.
inline double flux_outer(const DiscreteField& f)
{
    return detail::boundary_flux(f, [](BoundaryTag t) { return t == BoundaryTag::outer; });
}

inline double flux_total(const DiscreteField& f)
{
    return detail::boundary_flux(f, [](BoundaryTag) { return true; });
}

/// Discrete Dirichlet energy: sum over grid edges of conductance times squared jump.
inline double energy_of(const DiscreteField& f)
{
    const auto& g = *f.grid;
    long double sum = 0.0L;
    for (std::size_t k = 0; k < g.unknowns(); ++k) {
        const double uk = f.values[k];
        for (int a = 0; a < arm_count; ++a) {
            const Arm& arm = g.arms[k][a];
            // Interior edges are visited from both ends; count them once.
            if (!arm.to_boundary() && (a == 1 || a == 3)) continue;
            const double jump = f.neighbour(arm) - uk;
            sum += static_cast<long double>(arm.coeff) * jump * jump;
        }
    }
    return static_cast<double>(sum);
}

using Gradient = std::array<double, 2>;

/// Nodal gradients: three-point nonuniform differences using neighbour values or
/// boundary data at the cut arm length. Second order wherever the field is smooth.
/// When a cut arm is much shorter than its opposite arm the node value is dropped
/// and the difference uses the boundary point and the next two nodes, which keeps
/// solution error from being divided by the short length.
inline std::vector<Gradient> gradient(const DiscreteField& f)
{
    const auto& g = *f.grid;
    std::vector<Gradient> out(g.unknowns());
    constexpr double short_ratio = 0.25;
    // Derivative at 0 of the quadratic through (x0, f0), (x1, f1), (x2, f2).
    const auto lagrange = [](double x0, double f0, double x1, double f1, double x2, double f2) {
        return f0 * (-x1 - x2) / ((x0 - x1) * (x0 - x2)) + f1 * (-x0 - x2) / ((x1 - x0) * (x1 - x2)) +
               f2 * (-x0 - x1) / ((x2 - x0) * (x2 - x1));
    };
    // One-sided variant: `cut` is the short boundary arm, `far` the interior arm on the
    // opposite side, s = +1 when `far` points in the positive direction.
    const auto skip = [&](const Arm& cut, const Arm& far, int dir, double s) {
        const Arm& next = g.arms[static_cast<std::size_t>(far.target)][dir];
        const double x0 = -s * cut.length, x1 = s * far.length, x2 = s * (far.length + next.length);
        return lagrange(x0, f.boundary_value(cut), x1, f.values[static_cast<std::size_t>(far.target)], x2,
                        f.neighbour(next));
    };
    const auto diff = [&](const GradedGrid::ArmSet& arms, int ip, int im, double u) {
        const Arm& plus = arms[ip];
        const Arm& minus = arms[im];
        const double hp = plus.length, hm = minus.length;
        if (minus.to_boundary() && !plus.to_boundary() && hm < short_ratio * hp) return skip(minus, plus, ip, 1.0);
        if (plus.to_boundary() && !minus.to_boundary() && hp < short_ratio * hm) return skip(plus, minus, im, -1.0);
        const double up = f.neighbour(plus), um = f.neighbour(minus);
        return (hm * hm * (up - u) + hp * hp * (u - um)) / (hp * hm * (hp + hm));
    };
    for (std::size_t k = 0; k < g.unknowns(); ++k) {
        const auto& arms = g.arms[k];
        out[k] = {diff(arms, 0, 1, f.values[k]), diff(arms, 2, 3, f.values[k])};
    }
    return out;
}

/// max |grad| over the unknown nodes accepted by `inside`.
template <class Pred>
double max_gradient(const GradedGrid& g, const std::vector<Gradient>& grad, Pred&& inside)
{
    double m = 0.0;
    for (std::size_t k = 0; k < g.unknowns(); ++k)
        if (inside(g.position(k))) m = std::max(m, std::hypot(grad[k][0], grad[k][1]));
    return m;
}

/// Flux matrix a_ij = flux of v_j through boundary of D_i, b_i = -flux of v0
/// through D_i, outer fluxes alpha_i of v_i, and C1, C2 by Cramer's rule.
struct FluxSystem {
    std::array<std::array<double, 2>, 2> a{};
    std::array<double, 2> b{};
    std::array<double, 2> alpha{};
    double C1 = 0.0;
    double C2 = 0.0;
    double determinant = 0.0;

    double reciprocity_defect() const { return std::abs(a[0][1] - a[1][0]); }
    /// |a_1i + a_2i + alpha_i| for column i (Green's column sums).
    double column_defect(int i) const { return std::abs(a[0][i] + a[1][i] + alpha[i]); }
};

/// Fluxes are used as measured: with reaction fluxes the Green identities hold to
/// the linear-solve residual, so no symmetrization is applied.
inline FluxSystem assemble_flux_system(const DiscreteField& v1, const DiscreteField& v2, const DiscreteField& v0)
{
    if (v1.grid != v2.grid || v1.grid != v0.grid) throw ConfigError("assemble_flux_system: fields on different grids");
    FluxSystem s;
    s.a[0][0] = flux_inclusion(v1, 1);
    s.a[0][1] = flux_inclusion(v2, 1);
    s.a[1][0] = flux_inclusion(v1, 2);
    s.a[1][1] = flux_inclusion(v2, 2);
    s.b = {-flux_inclusion(v0, 1), -flux_inclusion(v0, 2)};
    s.alpha = {flux_outer(v1), flux_outer(v2)};
    const auto& a = s.a;
    s.determinant = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if (!(std::abs(s.determinant) > 1e-14 * (std::abs(a[0][0] * a[1][1]) + std::abs(a[0][1] * a[1][0]))))
        throw SolverError("flux system is singular: determinant " + std::to_string(s.determinant));
    s.C1 = (s.b[0] * a[1][1] - a[0][1] * s.b[1]) / s.determinant;
    s.C2 = (a[0][0] * s.b[1] - s.b[0] * a[1][0]) / s.determinant;
    return s;
}

/// u = C1 v1 + C2 v2 + v0.
inline DiscreteField assemble_u(const FluxSystem& fs, const DiscreteField& v1, const DiscreteField& v2, const DiscreteField& v0)
{
    return combine(fs.C1, v1, fs.C2, v2, 1.0, v0, "u");
}

} // namespace gapcond
