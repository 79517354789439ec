#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>
#include <vector>

namespace clockstab::quad {

struct Estimate {
    double value = 0.0;
    double error = 0.0;
    /// Integral of |f| (same rule); only set by gauss_kronrod15.
    double magnitude = 0.0;
};

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
inline constexpr std::array<double, 8> kronrod_nodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kronrod_weights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> gauss_weights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

} // namespace detail

/// One Gauss-Kronrod 7/15 panel on [a, b].
template <class F>
Estimate gauss_kronrod15(const F& f, double a, double b)
{
    using namespace detail;
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(center);
    double kronrod = fc * kronrod_weights[7];
    double gauss = fc * gauss_weights[3];
    double magnitude = std::abs(fc) * kronrod_weights[7];
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kronrod_nodes[j];
        const double lo = f(center - dx);
        const double hi = f(center + dx);
        kronrod += kronrod_weights[j] * (lo + hi);
        magnitude += kronrod_weights[j] * (std::abs(lo) + std::abs(hi));
        if (j % 2 == 1)
            gauss += gauss_weights[j / 2] * (lo + hi);
    }
    return {kronrod * half, std::abs((kronrod - gauss) * half), magnitude * std::abs(half)};
}

/// Adaptive bisection on [a, b] until each leaf meets
/// err <= max(abs_tol, rel_tol * |leaf|, rel_tol * M * width / (b - a)),
/// M being the first-pass integral of |f|, or the depth limit is hit. The
/// last term keeps leaves whose own value is lost in rounding (kernel zeros)
/// from bisecting to the depth limit. The returned error is the sum of leaf
/// estimates.
template <class F>
Estimate adaptive(const F& f, double a, double b, double rel_tol = 1e-10,
                  double abs_tol = 0.0, int max_depth = 24)
{
    struct Panel {
        double a, b;
        Estimate est;
        int depth;
    };
    Estimate total;
    if (!(b > a))
        return total;
    std::vector<Panel> stack;
    const Estimate first = gauss_kronrod15(f, a, b);
    const double density = rel_tol * first.magnitude / (b - a);
    stack.push_back({a, b, first, 0});
    while (!stack.empty()) {
        Panel p = stack.back();
        stack.pop_back();
        const double tol =
            std::max({abs_tol, rel_tol * std::abs(p.est.value), density * (p.b - p.a)});
        if (p.est.error <= tol || p.depth >= max_depth || !std::isfinite(p.est.value)) {
            total.value += p.est.value;
            total.error += p.est.error;
            continue;
        }
        const double mid = 0.5 * (p.a + p.b);
        stack.push_back({p.a, mid, gauss_kronrod15(f, p.a, mid), p.depth + 1});
        stack.push_back({mid, p.b, gauss_kronrod15(f, mid, p.b), p.depth + 1});
    }
    return total;
}

} // namespace clockstab::quad
