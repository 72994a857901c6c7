#pragma once

// Globally adaptive Gauss-Kronrod (G7/K15) quadrature with an absolute error target.

#include <array>
#include <cmath>
#include <functional>
#include <queue>
#include <vector>

#include "gapcond/errors.hpp"

namespace gapcond {

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;     // estimated absolute error
    int evaluations = 0;
    bool converged = false;
};

struct QuadratureOptions {
    double abs_tolerance = 1e-10;
    int max_subdivisions = 20000;
};

namespace detail {

// Kronrod nodes on [0, 1]; odd indices are the embedded Gauss points.
inline constexpr std::array<double, 8> kronrod_nodes{
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kronrod_weights{
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> gauss_weights{
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
    double a, b, value, error;
    bool operator<(const Segment& o) const { return error < o.error; }
};

template <class F>
Segment gk15(const F& f, double a, double b)
{
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double fc = f(c);
    double kron = kronrod_weights[7] * fc;
    double gauss = gauss_weights[3] * fc;
    for (int i = 0; i < 7; ++i) {
        const double dx = h * kronrod_nodes[i];
        const double s = f(c - dx) + f(c + dx);
        kron += kronrod_weights[i] * s;
        if (i % 2 == 1) gauss += gauss_weights[i / 2] * s;
    }
    return {a, b, kron * h, std::abs((kron - gauss) * h)};
}

} // namespace detail

/// Integrates f over [a, b]. Bisects the segment with the largest error estimate
/// until the summed estimate drops below the tolerance.
template <class F>
QuadratureResult integrate(const F& f, double a, double b, QuadratureOptions opt = {})
{
    if (!(opt.abs_tolerance > 0.0)) throw ConfigError("quadrature tolerance must be positive");
    if (a == b) return {0.0, 0.0, 0, true};
    std::priority_queue<detail::Segment> heap;
    heap.push(detail::gk15(f, a, b));
    double value = heap.top().value;
    double error = heap.top().error;
    int evals = 15;
    int splits = 0;
    while (error > opt.abs_tolerance && splits < opt.max_subdivisions) {
        const detail::Segment worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(worst.a < mid && mid < worst.b)) {
            heap.push(worst);
            break;
        }
        const auto left = detail::gk15(f, worst.a, mid);
        const auto right = detail::gk15(f, mid, worst.b);
        evals += 30;
        ++splits;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum to shed the drift of the running updates.
    value = 0.0;
    error = 0.0;
    while (!heap.empty()) {
        value += heap.top().value;
        error += heap.top().error;
        heap.pop();
    }
    return {value, error, evals, error <= opt.abs_tolerance};
}

} // namespace gapcond
