#pragma once

// Explicit asymptotic objects of the gap energy: the scale rho_n, the leading
// coefficient kappa_n, gap integrals of 1/delta, the 2D and 3D closed forms, and
// the extraction of the constant M_i from an energy series.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "gapcond/errors.hpp"
#include "gapcond/geometry.hpp"
#include "gapcond/least_squares.hpp"
#include "gapcond/quadrature.hpp"

namespace gapcond {

inline void check_dimension(int n)
{
    if (n != 2 && n != 3) throw ConfigError("dimension must be 2 or 3, got " + std::to_string(n));
}

/// sqrt(eps) for n = 2, 1/|log eps| for n = 3.
inline double rho(int n, double eps)
{
    check_dimension(n);
    if (!(eps > 0.0 && eps < 1.0)) throw DomainError("rho: eps must lie in (0, 1)");
    return n == 2 ? std::sqrt(eps) : 1.0 / std::abs(std::log(eps));
}

/// sqrt(2) pi / sqrt(lambda_1) for n = 2, 2 pi / sqrt(lambda_1 lambda_2) for n = 3.
inline double kappa(int n, const std::vector<double>& lambdas)
{
    check_dimension(n);
    if (lambdas.size() < static_cast<std::size_t>(n - 1)) throw ConfigError("kappa: need n-1 relative curvatures");
    for (int j = 0; j < n - 1; ++j)
        if (!(lambdas[static_cast<std::size_t>(j)] > 0.0)) throw ConfigError("kappa: relative curvatures must be positive");
    if (n == 2) return std::numbers::sqrt2 * std::numbers::pi / std::sqrt(lambdas[0]);
    return 2.0 * std::numbers::pi / std::sqrt(lambdas[0] * lambdas[1]);
}

/// Integral of 1/delta(x') over r_inner < |x'| < r. With eps = 0 the origin must be
/// excluded (r_inner > 0). 3D uses polar coordinates with nested adaptive rules.
inline QuadratureResult gap_integral(const GapGeometry& geom, double eps, double r, double r_inner = 0.0,
                                     QuadratureOptions opt = {})
{
    check_dimension(geom.dim);
    if (!(r > 0.0) || r > geom.R0 * (1.0 + 1e-12)) throw DomainError("gap_integral: radius must lie in (0, R0]");
    if (!(r_inner >= 0.0 && r_inner < r)) throw DomainError("gap_integral: need 0 <= r_inner < r");
    if (!(eps >= 0.0)) throw DomainError("gap_integral: eps must be non-negative");
    if (eps == 0.0 && r_inner == 0.0) throw DomainError("gap_integral: 1/delta is not integrable at the origin when eps = 0");

    const auto delta = [&](Tangent t) { return eps + geom.h1(t) - geom.h2(t); };
    // Breakpoints on the sqrt(eps) scale keep the first bisections where the peak is.
    std::vector<double> cuts{r_inner};
    if (eps > 0.0)
        for (double s = std::sqrt(eps); s < r; s *= 4.0)
            if (s > r_inner) cuts.push_back(s);
    cuts.push_back(r);
    const double pieces = static_cast<double>(cuts.size() - 1);

    const auto radial = [&](auto&& f, double tol) {
        QuadratureResult total{0.0, 0.0, 0, true};
        for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
            const auto part = integrate(f, cuts[k], cuts[k + 1], {tol / pieces, opt.max_subdivisions});
            total.value += part.value;
            total.error += part.error;
            total.evaluations += part.evaluations;
            total.converged = total.converged && part.converged;
        }
        return total;
    };

    if (geom.dim == 2) {
        const auto f = [&](double s) { return 1.0 / delta({s, 0.0}) + 1.0 / delta({-s, 0.0}); };
        return radial(f, opt.abs_tolerance);
    }
    int evals = 0;
    bool ok = true;
    const double inner_tol = 0.25 * opt.abs_tolerance / (2.0 * std::numbers::pi);
    const auto angular = [&](double th) {
        const double c = std::cos(th), s = std::sin(th);
        const auto res = radial([&](double t) { return t / delta({t * c, t * s}); }, inner_tol);
        evals += res.evaluations;
        ok = ok && res.converged;
        return res.value;
    };
    auto out = integrate(angular, 0.0, 2.0 * std::numbers::pi, {0.75 * opt.abs_tolerance, opt.max_subdivisions});
    out.evaluations = evals;
    out.converged = out.converged && ok;
    return out;
}

/// kappa_2/rho_2(eps) - 4/(lambda_1 R0).
inline double closed_form_2d(double lambda1, double R0, double eps)
{
    if (!(lambda1 > 0.0 && R0 > 0.0)) throw ConfigError("closed_form_2d: inputs must be positive");
    return kappa(2, {lambda1}) / rho(2, eps) - 4.0 / (lambda1 * R0);
}

/// R(theta) = R0 (2 cos^2 / lambda_1 + 2 sin^2 / lambda_2)^(-1/2).
inline double r_theta(double lambda1, double lambda2, double R0, double theta)
{
    if (!(lambda1 > 0.0 && lambda2 > 0.0 && R0 > 0.0)) throw ConfigError("r_theta: inputs must be positive");
    const double c = std::cos(theta), s = std::sin(theta);
    return R0 / std::sqrt(2.0 * c * c / lambda1 + 2.0 * s * s / lambda2);
}

/// kappa_3/rho_3(eps) + 2/sqrt(lambda_1 lambda_2) * integral over [0, 2 pi] of ln R(theta).
inline double closed_form_3d(double lambda1, double lambda2, double R0, double eps, QuadratureOptions opt = {})
{
    const auto lnR = [&](double th) { return std::log(r_theta(lambda1, lambda2, R0, th)); };
    const auto q = integrate(lnR, 0.0, 2.0 * std::numbers::pi, opt);
    if (!q.converged) throw SolverError("closed_form_3d: angular quadrature did not converge");
    return kappa(3, {lambda1, lambda2}) / rho(3, eps) + 2.0 / std::sqrt(lambda1 * lambda2) * q.value;
}

struct EnergySeries {
    std::vector<double> eps;      // strictly decreasing
    std::vector<double> energy;
    int inclusion = 1;
    std::string geometry_hash;

    std::size_t size() const { return eps.size(); }
};

enum class Provenance { closed_form, quadrature, fit };

inline std::string to_string(Provenance p)
{
    switch (p) {
    case Provenance::closed_form: return "closed-form";
    case Provenance::quadrature: return "quadrature";
    case Provenance::fit: return "fit";
    }
    return "unknown";
}

struct Estimate {
    double value = 0.0;
    double error = 0.0;
};

struct TailFit {
    std::size_t first = 0;    // index of the first retained point
    Estimate kappa;
    Estimate M;
};

/// E ~ kappa/rho + M with kappa fixed, with kappa free, and the remainder
/// E - kappa/rho - M ~ c eps^p of the fixed-kappa fit.
struct EnergyFit {
    double kappa_n = 0.0;
    Estimate M_constant;              // mean of E - kappa/rho
    std::vector<double> constant_residuals;
    PowerLawFit remainder;            // E - kappa/rho = M + c eps^p
    bool remainder_resolved = false;  // exponent found away from the scan bounds
    Estimate kappa_free;
    Estimate M_free;
    std::vector<double> free_residuals;
    std::vector<TailFit> tails;       // free fits on eps-tails
    double tail_max_deviation = 0.0;  // largest |M_tail - M_free| / (err_tail + err_free)
    bool tails_consistent = false;
    double bound_exponent = 0.0;      // remainder exponent for smooth boundaries
};

struct InclusionConstant {
    int inclusion = 1;
    Estimate M;
};

struct AsymptoticModel {
    int n = 2;
    double kappa_n = 0.0;
    std::vector<InclusionConstant> M;
    std::vector<double> fit_residuals;
    Provenance provenance = Provenance::fit;
    EnergyFit fit;

    Estimate M_of(int inclusion) const
    {
        for (const auto& m : M)
            if (m.inclusion == inclusion) return m.M;
        throw ConfigError("no constant M for inclusion " + std::to_string(inclusion));
    }
};

inline void validate_series(const EnergySeries& s)
{
    if (s.eps.size() != s.energy.size()) throw FitError("energy series: eps and energy lengths differ");
    if (s.size() < 3) throw FitError("energy series needs at least 3 points");
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (!(s.eps[k] > 0.0 && s.eps[k] < 1.0) || !std::isfinite(s.energy[k]))
            throw FitError("energy series: eps must lie in (0, 1) and energies must be finite");
        if (k > 0 && !(s.eps[k] < s.eps[k - 1])) throw FitError("energy series: eps must be strictly decreasing");
        if (k > 0 && !(s.energy[k] > s.energy[k - 1])) throw FitError("energy series is not monotone: E must grow as eps decreases");
    }
    if (std::log10(s.eps.front() / s.eps.back()) < 1.5 - 1e-9) throw FitError("energy series spans fewer than 1.5 decades of eps");
}

namespace detail {

inline std::pair<Estimate, Estimate> free_energy_fit(const std::vector<double>& inv_rho, const std::vector<double>& e,
                                                     std::vector<double>* residuals = nullptr)
{
    const auto f = fit_linear({[](double x) { return x; }, [](double) { return 1.0; }}, inv_rho, e);
    if (residuals) *residuals = f.residuals;
    return {{f.coef[0], f.std_error[0]}, {f.coef[1], f.std_error[1]}};
}

} // namespace detail

/// Fits E(eps) against kappa_n/rho_n(eps) + M. The primary M is the offset of the
/// remainder fit when its exponent is resolved, otherwise the plain mean.
inline AsymptoticModel fit_energy_model(const EnergySeries& series, int n, const std::vector<double>& lambdas)
{
    validate_series(series);
    const double kn = kappa(n, lambdas);
    const std::size_t m = series.size();
    std::vector<double> inv_rho(m), shifted(m);
    for (std::size_t k = 0; k < m; ++k) {
        inv_rho[k] = 1.0 / rho(n, series.eps[k]);
        shifted[k] = series.energy[k] - kn * inv_rho[k];
    }

    EnergyFit fit;
    fit.kappa_n = kn;
    fit.bound_exponent = n == 2 ? 0.25 : 0.5;
    {
        const auto c = fit_linear({[](double) { return 1.0; }}, series.eps, shifted);
        fit.M_constant = {c.coef[0], c.std_error[0]};
        fit.constant_residuals = c.residuals;
    }
    if (m >= 4) {
        fit.remainder = fit_offset_power_law(series.eps, shifted, -1.0, 3.0);
        fit.remainder_resolved = !fit.remainder.exponent_at_bound && fit.remainder.coefficient != 0.0;
    }

    std::tie(fit.kappa_free, fit.M_free) = detail::free_energy_fit(inv_rho, series.energy, &fit.free_residuals);
    fit.tails_consistent = true;
    for (std::size_t first = 1; first + 3 <= m; ++first) {
        const std::vector<double> x(inv_rho.begin() + static_cast<std::ptrdiff_t>(first), inv_rho.end());
        const std::vector<double> y(series.energy.begin() + static_cast<std::ptrdiff_t>(first), series.energy.end());
        TailFit t;
        t.first = first;
        std::tie(t.kappa, t.M) = detail::free_energy_fit(x, y);
        const double bar = t.M.error + fit.M_free.error;
        const double dev = std::abs(t.M.value - fit.M_free.value);
        const double score = bar > 0.0 ? dev / bar : (dev == 0.0 ? 0.0 : INFINITY);
        fit.tail_max_deviation = std::max(fit.tail_max_deviation, score);
        if (score > 1.0) fit.tails_consistent = false;
        fit.tails.push_back(t);
    }

    AsymptoticModel model;
    model.n = n;
    model.kappa_n = kn;
    model.provenance = Provenance::fit;
    Estimate M = fit.M_constant;
    if (fit.remainder_resolved) {
        M = {fit.remainder.offset, fit.remainder.offset_error};
        model.fit_residuals.resize(m);
        for (std::size_t k = 0; k < m; ++k) model.fit_residuals[k] = shifted[k] - fit.remainder.offset;
    } else {
        model.fit_residuals = fit.constant_residuals;
    }
    model.M.push_back({series.inclusion, M});
    model.fit = std::move(fit);
    return model;
}

} // namespace gapcond
