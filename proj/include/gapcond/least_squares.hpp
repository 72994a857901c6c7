#pragma once

// Small dense least-squares fits with standard errors.

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>

#include "gapcond/errors.hpp"

namespace gapcond {

struct LinearFit {
    std::vector<double> coef;
    std::vector<double> std_error;   // from the residual variance; zero when the fit has no spare points
    std::vector<double> residuals;
    double rss = 0.0;
    double condition = 0.0;          // of the design matrix
};

/// Minimizes sum_k (y_k - sum_j coef_j basis_j(x_k))^2.
inline LinearFit fit_linear(const std::vector<std::function<double(double)>>& basis, const std::vector<double>& x,
                            const std::vector<double>& y)
{
    const auto m = static_cast<Eigen::Index>(x.size());
    const auto p = static_cast<Eigen::Index>(basis.size());
    if (m < p || m == 0) throw FitError("not enough points for the requested fit");
    Eigen::MatrixXd X(m, p);
    Eigen::VectorXd Y(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        Y[i] = y[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < p; ++j) X(i, j) = basis[static_cast<std::size_t>(j)](x[static_cast<std::size_t>(i)]);
    }
    if (!X.allFinite() || !Y.allFinite()) throw FitError("non-finite data in least-squares fit");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv[p - 1] <= 1e-14 * sv[0]) throw FitError("degenerate least-squares design");
    const Eigen::VectorXd c = svd.solve(Y);
    const Eigen::VectorXd r = Y - X * c;

    LinearFit f;
    f.coef.assign(c.data(), c.data() + p);
    f.residuals.assign(r.data(), r.data() + m);
    f.rss = r.squaredNorm();
    f.condition = sv[0] / sv[p - 1];
    f.std_error.assign(static_cast<std::size_t>(p), 0.0);
    if (m > p) {
        const double sigma2 = f.rss / static_cast<double>(m - p);
        const Eigen::MatrixXd V = svd.matrixV();
        for (Eigen::Index j = 0; j < p; ++j) {
            double var = 0.0;
            for (Eigen::Index k = 0; k < p; ++k) var += V(j, k) * V(j, k) / (sv[k] * sv[k]);
            f.std_error[static_cast<std::size_t>(j)] = std::sqrt(sigma2 * var);
        }
    }
    return f;
}

/// y ~ c0 + c1 * x^p with the exponent p free (variable projection over p).
struct PowerLawFit {
    double offset = 0.0;
    double offset_error = 0.0;
    double coefficient = 0.0;
    double exponent = 0.0;
    double rss = 0.0;
    bool exponent_at_bound = false;
};

inline PowerLawFit fit_offset_power_law(const std::vector<double>& x, const std::vector<double>& y, double p_min = 0.02,
                                        double p_max = 3.0)
{
    if (x.size() < 3) throw FitError("power-law fit needs at least three points");
    const auto fit_at = [&](double p) {
        return fit_linear({[](double) { return 1.0; }, [p](double t) { return std::pow(t, p); }}, x, y);
    };
    // Near p = 0 the two basis functions coincide; such exponents are simply not candidates.
    const auto rss_at = [&](double p) {
        try {
            return fit_at(p).rss;
        } catch (const FitError&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    // Coarse scan first: the profile is not unimodal in general.
    if (!(p_min < p_max)) throw FitError("power-law fit: empty exponent range");
    const int n_scan = 120;
    double best_p = p_min;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= n_scan; ++i) {
        const double p = p_min + (p_max - p_min) * i / n_scan;
        const double rss = rss_at(p);
        if (rss < best) {
            best = rss;
            best_p = p;
        }
    }
    const double step = (p_max - p_min) / n_scan;
    const double lo = std::max(p_min, best_p - step), hi = std::min(p_max, best_p + step);
    std::uintmax_t iters = 200;
    const auto [p, rss] = boost::math::tools::brent_find_minima(rss_at, lo, hi, std::numeric_limits<double>::digits / 2, iters);
    if (!std::isfinite(rss)) throw FitError("power-law fit: no admissible exponent");
    const auto f = fit_at(p);
    PowerLawFit out;
    out.offset = f.coef[0];
    out.offset_error = f.std_error[0];
    out.coefficient = f.coef[1];
    out.exponent = p;
    out.rss = rss;
    out.exponent_at_bound = p <= p_min + 1e-6 || p >= p_max - 1e-6;
    return out;
}

} // namespace gapcond
