#pragma once

// The blow-up functional Q_eps[phi], the normalized determinant Theta_eps, the
// C1 - C2 identity, and touching-limit constants by rate-informed extrapolation.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "gapcond/asymptotics.hpp"
#include "gapcond/errors.hpp"
#include "gapcond/field_solver.hpp"
#include "gapcond/least_squares.hpp"

namespace gapcond {

/// Q_eps = (flux of v0 through D1) alpha_2 - (flux of v0 through D2) alpha_1.
inline double q_eps(const FluxSystem& fs) { return -fs.b[0] * fs.alpha[1] + fs.b[1] * fs.alpha[0]; }

/// Theta_eps = -rho a11 alpha_2 + rho a12 alpha_1.
inline double theta_eps(const FluxSystem& fs, int n, double eps)
{
    const double r = rho(n, eps);
    return -(r * fs.a[0][0]) * fs.alpha[1] + (r * fs.a[0][1]) * fs.alpha[0];
}

/// -rho a11 (alpha_1 + alpha_2) - rho alpha_1^2, equal to theta_eps by the Green identities.
inline double theta_eps_alternative(const FluxSystem& fs, int n, double eps)
{
    const double r = rho(n, eps);
    return -(r * fs.a[0][0]) * (fs.alpha[0] + fs.alpha[1]) - r * fs.alpha[0] * fs.alpha[0];
}

struct IdentityResidual {
    double absolute = 0.0;
    double relative = 0.0;   // absolute / max(|C1 - C2|, 1e-6)
};

/// |C1 - C2 - rho Q / Theta|.
inline IdentityResidual c_diff_identity_check(const FluxSystem& fs, double q, double theta, int n, double eps)
{
    if (!(theta != 0.0)) throw SolverError("identity check: Theta_eps vanishes");
    const double lhs = fs.C1 - fs.C2;
    const double abs_res = std::abs(lhs - rho(n, eps) * q / theta);
    return {abs_res, abs_res / std::max(std::abs(lhs), 1e-6)};
}

struct FunctionalRecord {
    double eps = 0.0;
    double rho = 0.0;
    double Q_eps = 0.0;
    double Theta_eps = 0.0;
    double C_diff = 0.0;
    std::array<double, 2> alpha{};
    std::array<double, 2> v0_flux{};   // flux of v0 through D1, D2
    double identity_residual = 0.0;    // relative
    double theta_noise = std::numeric_limits<double>::quiet_NaN();   // discretization error estimate, when known
};

inline FunctionalRecord make_functional_record(const FluxSystem& fs, int n, double eps)
{
    FunctionalRecord r;
    r.eps = eps;
    r.rho = rho(n, eps);
    r.Q_eps = q_eps(fs);
    r.Theta_eps = theta_eps(fs, n, eps);
    r.C_diff = fs.C1 - fs.C2;
    r.alpha = fs.alpha;
    r.v0_flux = {-fs.b[0], -fs.b[1]};
    r.identity_residual = c_diff_identity_check(fs, r.Q_eps, r.Theta_eps, n, eps).relative;
    return r;
}

/// X_eps = X* + c g(eps) with g the proven rate. `error` is the larger of the fit's
/// standard error and the shift of X* when the largest eps is dropped.
struct Extrapolated {
    double value = 0.0;
    double error = 0.0;
    double coefficient = 0.0;
    double condition = 0.0;
    double residual_rms = 0.0;
    double free_exponent = std::numeric_limits<double>::quiet_NaN();   // diagnostic, >= 4 points
    double free_value = std::numeric_limits<double>::quiet_NaN();
};

inline double rate_function(int n, double eps)
{
    return n == 2 ? std::pow(eps, 0.75) : eps * std::abs(std::log(eps));
}

inline Extrapolated extrapolate_series(int n, const std::vector<double>& eps, const std::vector<double>& x)
{
    if (eps.size() < 3) throw FitError("extrapolation needs at least 3 eps values");
    for (std::size_t k = 1; k < eps.size(); ++k)
        if (!(eps[k] < eps[k - 1])) throw FitError("extrapolation: eps must be strictly decreasing");
    if (eps.front() / eps.back() < 4.0) throw FitError("extrapolation: eps span is degenerate");
    const std::vector<std::function<double(double)>> basis{[](double) { return 1.0; },
                                                           [n](double e) { return rate_function(n, e); }};
    const auto f = fit_linear(basis, eps, x);
    Extrapolated out;
    out.value = f.coef[0];
    out.coefficient = f.coef[1];
    out.condition = f.condition;
    out.residual_rms = std::sqrt(f.rss / static_cast<double>(eps.size()));
    out.error = f.std_error[0];
    if (eps.size() >= 3) {
        const std::vector<double> e2(eps.begin() + 1, eps.end()), x2(x.begin() + 1, x.end());
        if (e2.size() >= 2 && e2.front() / e2.back() > 1.0) {
            const auto g = fit_linear(basis, e2, x2);
            out.error = std::max(out.error, std::abs(g.coef[0] - f.coef[0]));
        }
    }
    if (eps.size() >= 4) {
        try {
            const auto p = fit_offset_power_law(eps, x, 0.05, 3.0);
            out.free_exponent = p.exponent;
            out.free_value = p.offset;
        } catch (const FitError&) {
            // diagnostic only
        }
    }
    return out;
}

struct ThetaCheck {
    double eps = 0.0;
    double theta_eps = 0.0;
    double model = 0.0;           // Theta* (1 - Mtilde rho)
    double residual = 0.0;        // theta_eps - model
    double noise_floor = 0.0;     // discretization estimate plus model uncertainty
    double remainder = 0.0;       // residual / (Theta* rho): the E_n(eps) term
    double gap_ratio = 0.0;       // (Theta* - Theta_eps) / rho
};

struct LimitConstants {
    int n = 2;
    double kappa_n = 0.0;
    Extrapolated Q_star;
    Extrapolated alpha1_star;
    Extrapolated alpha2_star;
    Estimate Theta_star;
    Estimate M1;
    Estimate Mtilde;
    double delta0 = 0.0;                // half the smallest observed Theta_eps
    double gap_ratio_limit = 0.0;       // M1 (alpha1* + alpha2*) + alpha1*^2
    std::vector<ThetaCheck> theta_checks;
    bool theta_within_noise = false;
    bool has_noise_floor = false;
};

/// Touching-limit constants from an eps-sweep. Theta* = kappa_n (-(alpha1* + alpha2*)),
/// Mtilde = -M1/kappa_n + alpha1*^2/Theta*.
inline LimitConstants extrapolate_limits(const std::vector<FunctionalRecord>& records, int n, const std::vector<double>& lambdas,
                                         Estimate M1)
{
    check_dimension(n);
    if (records.size() < 3) throw FitError("extrapolate_limits needs at least 3 records");
    std::vector<double> eps, q, a1, a2;
    for (const auto& r : records) {
        eps.push_back(r.eps);
        q.push_back(r.Q_eps);
        a1.push_back(r.alpha[0]);
        a2.push_back(r.alpha[1]);
    }
    LimitConstants L;
    L.n = n;
    L.kappa_n = kappa(n, lambdas);
    L.Q_star = extrapolate_series(n, eps, q);
    L.alpha1_star = extrapolate_series(n, eps, a1);
    L.alpha2_star = extrapolate_series(n, eps, a2);
    L.M1 = M1;

    const double k = L.kappa_n;
    const double s1 = L.alpha1_star.value, s2 = L.alpha2_star.value;
    const double e1 = L.alpha1_star.error, e2 = L.alpha2_star.error;
    const double theta = -k * (s1 + s2);
    L.Theta_star = {theta, k * std::hypot(e1, e2)};
    if (!(theta > 0.0)) throw FitError("extrapolated Theta* is not positive: " + std::to_string(theta));

    const double mt = -M1.value / k + s1 * s1 / theta;
    const double d_a1 = (-2.0 * k * s1 * (s1 + s2) + k * s1 * s1) / (theta * theta);
    const double d_a2 = k * s1 * s1 / (theta * theta);
    L.Mtilde = {mt, std::sqrt(std::pow(M1.error / k, 2) + std::pow(d_a1 * e1, 2) + std::pow(d_a2 * e2, 2))};
    L.gap_ratio_limit = M1.value * (s1 + s2) + s1 * s1;

    double min_theta = std::numeric_limits<double>::infinity();
    L.has_noise_floor = true;
    L.theta_within_noise = true;
    for (const auto& r : records) {
        min_theta = std::min(min_theta, r.Theta_eps);
        ThetaCheck c;
        c.eps = r.eps;
        c.theta_eps = r.Theta_eps;
        c.model = theta * (1.0 - mt * r.rho);
        c.residual = r.Theta_eps - c.model;
        c.remainder = c.residual / (theta * r.rho);
        c.gap_ratio = (theta - r.Theta_eps) / r.rho;
        const double model_sigma = std::hypot(L.Theta_star.error * (1.0 - mt * r.rho), theta * r.rho * L.Mtilde.error);
        if (std::isfinite(r.theta_noise)) {
            c.noise_floor = r.theta_noise + model_sigma;
        } else {
            c.noise_floor = model_sigma;
            L.has_noise_floor = false;
        }
        if (!(std::abs(c.residual) <= c.noise_floor)) L.theta_within_noise = false;
        L.theta_checks.push_back(c);
    }
    L.delta0 = 0.5 * min_theta;
    return L;
}

} // namespace gapcond
