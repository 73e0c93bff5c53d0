#pragma once

#include <cmath>
#include <numbers>

#include "taa/error.hpp"

namespace taa {

namespace detail {

// Giles' single-precision approximation; only used as a starting point.
inline double erfinv_guess(double y) noexcept
{
    double w = -std::log((1.0 - y) * (1.0 + y));
    double p;
    if (w < 5.0) {
        w -= 2.5;
        p = 2.81022636e-08;
        p = 3.43273939e-07 + p * w;
        p = -3.5233877e-06 + p * w;
        p = -4.39150654e-06 + p * w;
        p = 0.00021858087 + p * w;
        p = -0.00125372503 + p * w;
        p = -0.00417768164 + p * w;
        p = 0.246640727 + p * w;
        p = 1.50140941 + p * w;
    } else {
        w = std::sqrt(w) - 3.0;
        p = -0.000200214257;
        p = 0.000100950558 + p * w;
        p = 0.00134934322 + p * w;
        p = -0.00367342844 + p * w;
        p = 0.00573950773 + p * w;
        p = -0.0076224613 + p * w;
        p = 0.00943887047 + p * w;
        p = 1.00167406 + p * w;
        p = 2.83297682 + p * w;
    }
    return p * y;
}

} // namespace detail

/// Inverse error function on (-1, 1). Halley-refined; in the tails the
/// residual is taken on erfc to avoid cancellation.
inline double inverse_erf(double y)
{
    require(std::isfinite(y) && std::abs(y) < 1.0, ErrorKind::parameter,
            "inverse_erf domain is |y| < 1");
    if (y == 0.0) return 0.0;
    const double sign = y < 0.0 ? -1.0 : 1.0;
    const double a = std::abs(y);
    const double tail = 1.0 - a;  // exact for a >= 0.5
    double x = detail::erfinv_guess(a);
    constexpr double two_over_sqrt_pi = 2.0 / 1.7724538509055160273;
    for (int it = 0; it < 50; ++it) {
        const double f = a > 0.5 ? tail - std::erfc(x) : std::erf(x) - a;
        const double fp = two_over_sqrt_pi * std::exp(-x * x);
        if (fp == 0.0) break;
        const double ratio = f / fp;
        const double dx = ratio / (1.0 + x * ratio);
        x -= dx;
        if (std::abs(dx) <= 1e-16 * std::abs(x)) break;
    }
    return sign * x;
}

inline double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_pdf(double x) noexcept
{
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Standard normal quantile for p in (0, 1).
inline double normal_quantile(double p)
{
    require(p > 0.0 && p < 1.0, ErrorKind::parameter, "normal quantile needs 0 < p < 1");
    return std::numbers::sqrt2 * inverse_erf(2.0 * p - 1.0);
}

} // namespace taa
