#pragma once

#include <cmath>
#include <optional>
#include <utility>

namespace taa::numeric {

/// Bisection on [a, b] with f(a), f(b) of opposite sign (or one of them zero).
/// Stops when the bracket is narrower than `tol` or after max_iter halvings.
template <class F>
double bisect(F&& f, double a, double b, double tol, int max_iter = 200)
{
    double fa = f(a);
    if (fa == 0.0) return a;
    if (f(b) == 0.0) return b;
    for (int it = 0; it < max_iter && std::abs(b - a) > tol; ++it) {
        const double m = 0.5 * (a + b);
        const double fm = f(m);
        if (fm == 0.0) return m;
        if ((fm > 0.0) == (fa > 0.0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

/// Walks outward from x0 in geometrically growing steps until f changes sign,
/// never leaving [lo, hi]. Returns the bracket, or nothing if the walk hits a
/// limit first.
template <class F>
std::optional<std::pair<double, double>> expand_bracket(F&& f, double x0, double lo, double hi, double step0)
{
    const double f0 = f(x0);
    if (f0 == 0.0) return std::pair{x0, x0};
    for (int dir : {+1, -1}) {
        double prev = x0, step = step0;
        for (;;) {
            double x = prev + dir * step;
            if (dir > 0 && x > hi) x = hi;
            if (dir < 0 && x < lo) x = lo;
            const double fx = f(x);
            if ((fx > 0.0) != (f0 > 0.0) || fx == 0.0)
                return dir > 0 ? std::pair{prev, x} : std::pair{x, prev};
            if (x == hi || x == lo) break;
            prev = x;
            step *= 2.0;
        }
    }
    return std::nullopt;
}

} // namespace taa::numeric
