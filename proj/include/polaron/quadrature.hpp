#pragma once

#include <cmath>
#include <functional>

#include "polaron/common.hpp"

namespace polaron {

namespace detail {

template <class F>
double adapt_simpson_rec(const F& f, double a, double b, double fa, double fm, double fb, double whole, double tol,
                         int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    double err = left + right - whole;
    if (depth <= 0 || std::fabs(err) < 15.0 * tol) return left + right + err / 15.0;
    return adapt_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adapt_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Adaptive Simpson on [a,b].
template <class F>
double integrate(const F& f, double a, double b, double tol = 1e-10, int max_depth = 50) {
    if (a == b) return 0.0;
    double m = 0.5 * (a + b);
    double fa = f(a), fm = f(m), fb = f(b);
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::adapt_simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

// Integral over (0, inf) via u = v/(1-v).
template <class F>
double integrate_halfline(const F& f, double tol = 1e-10) {
    auto g = [&](double v) {
        double u = v / (1.0 - v);
        double jac = 1.0 / sq(1.0 - v);
        return f(u) * jac;
    };
    // avoid the open endpoints
    return integrate(g, 1e-14, 1.0 - 1e-14, tol);
}

}  // namespace polaron
