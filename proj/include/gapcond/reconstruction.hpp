#pragma once

// The gap profile u_bar, the leading singular term of grad u, and the measured
// remainder grad u minus that term.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "gapcond/asymptotics.hpp"
#include "gapcond/errors.hpp"
#include "gapcond/field_solver.hpp"
#include "gapcond/functionals.hpp"
#include "gapcond/geometry.hpp"
#include "gapcond/least_squares.hpp"

namespace gapcond {

using Vec3 = std::array<double, 3>;

namespace detail {

// C^2 cutoff: 1 for t <= a, 0 for t >= b, quintic smoothstep in between.
inline double cutoff(double t, double a, double b)
{
    if (t <= a) return 1.0;
    if (t >= b) return 0.0;
    const double s = (t - a) / (b - a);
    return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

inline double smoothstep01(double s)
{
    s = std::clamp(s, 0.0, 1.0);
    return s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

// Fourth-order central difference of a scalar function of x'.
inline std::array<double, 2> tangential_gradient(const std::function<double(Tangent)>& h, Tangent t, int dim, double step)
{
    const auto d = [&](double dx, double dy) {
        const auto f = [&](double s) { return h({t.x1 + s * dx, t.x2 + s * dy}); };
        return (f(-2 * step) - 8 * f(-step) + 8 * f(step) - f(2 * step)) / (12 * step);
    };
    return {d(1.0, 0.0), dim == 3 ? d(0.0, 1.0) : 0.0};
}

inline double ubar_formula(const GapGeometry& g, Tangent t, double xn)
{
    return (xn - g.h2(t) + 0.5 * g.eps) / (g.eps + g.h1(t) - g.h2(t));
}

} // namespace detail

/// u_bar = (x_n - h2(x') + eps/2) / delta(x') for |x'| <= R0/2. Between R0/2 and R0
/// the formula is blended by a C^2 cutoff in |x'| into a bounded smooth profile in
/// x_n; beyond R0 only that profile remains.
inline double ubar(const GapGeometry& g, const Point& x)
{
    const Tangent t = tangent_of(x, g.dim);
    const double xn = normal_of(x, g.dim);
    const double r = t.norm();
    const double chi = detail::cutoff(r, 0.5 * g.R0, g.R0);
    // Far profile: 0 below -H, 1 above H, where H spans the gap at |x'| = R0.
    const double H = 0.5 * g.eps + 0.25 * g.R0 * g.R0 * g.lambdas.front();
    const double far = detail::smoothstep01(0.5 + 0.5 * xn / H);
    if (chi == 0.0) return far;
    return chi * detail::ubar_formula(g, t, xn) + (1.0 - chi) * far;
}

/// Gradient of u_bar as (d/dx', d/dx_n) laid out like Point. Exact expressions in
/// Omega_{R0/2}; central differences of ubar in the blend zone and beyond.
inline Vec3 ubar_grad(const GapGeometry& g, const Point& x)
{
    const Tangent t = tangent_of(x, g.dim);
    const double xn = normal_of(x, g.dim);
    Vec3 out{};
    if (t.norm() <= 0.5 * g.R0) {
        const double step = 1e-3 * g.R0;
        const auto g1 = detail::tangential_gradient(g.h1, t, g.dim, step);
        const auto g2 = detail::tangential_gradient(g.h2, t, g.dim, step);
        const double delta = g.eps + g.h1(t) - g.h2(t);
        const double num = xn - g.h2(t) + 0.5 * g.eps;
        for (int j = 0; j < g.dim - 1; ++j) {
            const auto jj = static_cast<std::size_t>(j);
            out[jj] = (-g2[jj] * delta - num * (g1[jj] - g2[jj])) / (delta * delta);
        }
        out[static_cast<std::size_t>(g.dim - 1)] = 1.0 / delta;
        return out;
    }
    const double s = 1e-6 * std::max(g.R0, 1.0);
    for (int j = 0; j < g.dim; ++j) {
        Point a = x, b = x;
        a[static_cast<std::size_t>(j)] -= s;
        b[static_cast<std::size_t>(j)] += s;
        out[static_cast<std::size_t>(j)] = (ubar(g, b) - ubar(g, a)) / (2.0 * s);
    }
    return out;
}

/// prefactor * grad u_bar, the leading term of grad u in the gap.
struct SingularTerm {
    int n = 2;
    double prefactor = 0.0;
    GapGeometry geometry;

    Vec3 at(const Point& x) const
    {
        Vec3 g = ubar_grad(geometry, x);
        for (double& c : g) c *= prefactor;
        return g;
    }
};

/// n = 2: Q sqrt(eps)/Theta. n = 3: (Q/Theta) / (|log eps| - Mtilde).
inline double singular_prefactor(int n, double Q, double Theta, double Mtilde, double eps)
{
    check_dimension(n);
    if (!(Theta > 0.0)) throw FitError("singular term needs Theta > 0");
    if (Q == 0.0) return 0.0;
    if (n == 2) return Q * std::sqrt(eps) / Theta;
    const double denom = std::abs(std::log(eps)) - Mtilde;
    if (!(denom > 0.0)) throw DomainError("singular term: |log eps| must exceed Mtilde");
    return Q / Theta / denom;
}

inline SingularTerm make_singular_term(const LimitConstants& limits, const GapGeometry& geom)
{
    return {limits.n, singular_prefactor(limits.n, limits.Q_star.value, limits.Theta_star.value, limits.Mtilde.value, geom.eps),
            geom};
}

inline Vec3 singular_term(const LimitConstants& limits, const GapGeometry& geom, const Point& x)
{
    return make_singular_term(limits, geom).at(x);
}

struct ResidualNorms {
    double max_residual = 0.0;   // sup |grad u - singular term|
    double max_gradient = 0.0;   // sup |grad u|
    double ratio = 0.0;          // max_residual / max_gradient
    std::size_t samples = 0;
};

/// Sup norms over the grid nodes of `region`.
template <class Region>
ResidualNorms residual_norms(const DiscreteField& u, const SingularTerm& term, Region&& region)
{
    const auto& g = *u.grid;
    const auto grad = gradient(u);
    ResidualNorms out;
    for (std::size_t k = 0; k < g.unknowns(); ++k) {
        const Point p = g.position(k);
        if (!region(p)) continue;
        const Vec3 s = term.prefactor == 0.0 ? Vec3{} : term.at(p);
        out.max_residual = std::max(out.max_residual, std::hypot(grad[k][0] - s[0], grad[k][1] - s[1]));
        out.max_gradient = std::max(out.max_gradient, std::hypot(grad[k][0], grad[k][1]));
        ++out.samples;
    }
    if (out.samples == 0) throw ConfigError("residual_norms: region contains no grid nodes");
    out.ratio = out.max_gradient > 0.0 ? out.max_residual / out.max_gradient : 0.0;
    return out;
}

struct BlowupFit {
    bool refused = false;
    std::string reason;
    double slope = 0.0;
    double std_error = 0.0;
    double ci_low = 0.0;    // 95% interval
    double ci_high = 0.0;
    std::size_t points = 0;
};

/// Least-squares slope of log max|grad u| against log eps. Refused when Q* cannot be
/// told apart from zero: |Q*| <= 3 * q_noise.
inline BlowupFit blowup_rate_fit(const std::vector<double>& eps, const std::vector<double>& max_grad, double Q_star,
                                 double q_noise)
{
    BlowupFit out;
    out.points = eps.size();
    if (eps.size() != max_grad.size()) throw FitError("blow-up fit: length mismatch");
    if (eps.size() < 4) throw FitError("blow-up fit needs at least 4 eps values");
    if (!(std::abs(Q_star) > 3.0 * q_noise) || Q_star == 0.0) {
        out.refused = true;
        out.reason = "Q* is indistinguishable from zero; no blow-up term is expected";
        return out;
    }
    std::vector<double> x, y;
    for (std::size_t k = 0; k < eps.size(); ++k) {
        if (!(eps[k] > 0.0 && max_grad[k] > 0.0)) throw FitError("blow-up fit: eps and gradients must be positive");
        x.push_back(std::log(eps[k]));
        y.push_back(std::log(max_grad[k]));
    }
    const auto f = fit_linear({[](double) { return 1.0; }, [](double t) { return t; }}, x, y);
    out.slope = f.coef[1];
    out.std_error = f.std_error[1];
    const boost::math::students_t dist(static_cast<double>(eps.size() - 2));
    const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
    out.ci_low = out.slope - t * out.std_error;
    out.ci_high = out.slope + t * out.std_error;
    return out;
}

} // namespace gapcond
