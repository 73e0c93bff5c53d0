#pragma once

// Nodewise equilibrated growth & remodeling. Unknowns: the evolved hoop
// stretch λ_θh and the fiber mass growth factor g. Fibers are deposited at
// their homeostatic stretch, so only elastin feels λ_θh directly.

#include <array>
#include <cmath>
#include <optional>
#include <sstream>

#include "taa/insult/grid.hpp"
#include "taa/numeric/roots.hpp"
#include "taa/vessel/material.hpp"
#include "taa/vessel/scenario.hpp"

namespace taa {

/// Local loss at a node: `severity` is already severity_max·ϑ.
struct InsultContext {
    InsultKind kind = InsultKind::elastic_fiber;
    double severity = 0.0;

    double elastin_modulus(const MaterialParams& m) const noexcept
    {
        return kind == InsultKind::elastic_fiber ? m.c_e * (1.0 - severity) : m.c_e;
    }
    double mechanosensing_loss() const noexcept { return kind == InsultKind::mechanosensing ? severity : 0.0; }
};

struct NodeEquilibriumState {
    double lambda = 1.0;   // λ_θh
    double growth = 1.0;   // g
    double J = 1.0;
    double thickness = 0.0;  // h_h, mm
    double radius = 0.0;     // mid-wall a_h, mm
    Composition phi;
    double sigma_theta = 0.0, sigma_z = 0.0;
    double p = 0.0;          // Lagrange multiplier, kPa
    double c_e_eff = 0.0;
    std::array<double, 2> residual{};  // scaled by σ_o
    int iterations = 0;
    bool fallback = false;
};

struct EquilibriumBox {
    double lambda_lo = 0.8, lambda_hi = 4.0;
    double g_lo = 0.2, g_hi = 20.0;
};

inline constexpr double equilibrium_tolerance = 1e-10;

namespace detail {

struct GrState {
    double J, h, a;
    Composition phi;
    MixtureStress s;
};

inline GrState gr_state(double lambda, double g, double c_e_eff, const MaterialParams& m)
{
    GrState st;
    st.J = m.phi_e + g * (m.phi_m + m.phi_c);
    st.h = st.J * m.h_o / lambda;
    st.a = m.a_o() * lambda;
    st.phi = {m.phi_e / st.J, g * m.phi_m / st.J, g * m.phi_c / st.J};
    st.s = mixture_stress({lambda, 1.0, 1.0, 1.0}, st.phi, c_e_eff, m);
    return st;
}

} // namespace detail

/// Scaled residuals (R₁, R₂)/σ_o: Laplace equilibrium at the G&R pressure and
/// restoration of the (possibly mis-sensed) intramural stress.
inline std::array<double, 2> equilibrium_residual(double lambda, double g, const InsultContext& ctx, double p_gr,
                                                  const HomeostaticState& homeo, const MaterialParams& m)
{
    const auto st = detail::gr_state(lambda, g, ctx.elastin_modulus(m), m);
    const double r1 = st.s.theta - p_gr * st.a / st.h;
    const double r2 = (1.0 - ctx.mechanosensing_loss()) * (st.s.theta + st.s.z) / 3.0 - homeo.sigma_o;
    return {r1 / homeo.sigma_o, r2 / homeo.sigma_o};
}

namespace detail {

inline double rnorm(const std::array<double, 2>& r) { return std::max(std::abs(r[0]), std::abs(r[1])); }

inline bool in_box(double l, double g, const EquilibriumBox& b)
{
    return l >= b.lambda_lo && l <= b.lambda_hi && g >= b.g_lo && g <= b.g_hi;
}

// Damped Newton with a forward-difference Jacobian.
inline std::optional<std::array<double, 3>> newton_equilibrium(const InsultContext& ctx, double p_gr,
                                                               const HomeostaticState& homeo,
                                                               const MaterialParams& m, const EquilibriumBox& box)
{
    auto res = [&](double l, double g) { return equilibrium_residual(l, g, ctx, p_gr, homeo, m); };
    double l = 1.0, g = 1.0;
    auto r = res(l, g);
    for (int it = 0; it < 100; ++it) {
        if (rnorm(r) <= 0.1 * equilibrium_tolerance) return std::array{l, g, double(it)};
        const double hl = 1e-7 * std::abs(l), hg = 1e-7 * std::abs(g);
        const auto rl = res(l + hl, g);
        const auto rg = res(l, g + hg);
        const double j11 = (rl[0] - r[0]) / hl, j12 = (rg[0] - r[0]) / hg;
        const double j21 = (rl[1] - r[1]) / hl, j22 = (rg[1] - r[1]) / hg;
        const double det = j11 * j22 - j12 * j21;
        if (!std::isfinite(det) || det == 0.0) return std::nullopt;
        const double dl = -(j22 * r[0] - j12 * r[1]) / det;
        const double dg = -(-j21 * r[0] + j11 * r[1]) / det;

        bool accepted = false;
        for (double t = 1.0; t >= 1.0 / 1024.0; t *= 0.5) {
            const double lt = l + t * dl, gt = g + t * dg;
            if (!in_box(lt, gt, box)) continue;
            std::array<double, 2> rt;
            try {
                rt = res(lt, gt);
            } catch (const Error&) {
                continue;
            }
            if (std::isfinite(rt[0]) && std::isfinite(rt[1]) && rnorm(rt) < rnorm(r)) {
                l = lt;
                g = gt;
                r = rt;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // Stalled at roundoff level is still a converged point.
            if (rnorm(r) <= equilibrium_tolerance) return std::array{l, g, double(it)};
            return std::nullopt;
        }
    }
    if (rnorm(r) <= equilibrium_tolerance) return std::array{l, g, 100.0};
    return std::nullopt;
}

// J_h·R₁ is affine in g at fixed λ, so R₁ = 0 defines g(λ) by bisection; a
// scan over λ then brackets R₂(λ, g(λ)) = 0. The root nearest λ = 1 wins.
inline std::optional<std::array<double, 2>> fallback_equilibrium(const InsultContext& ctx, double p_gr,
                                                                 const HomeostaticState& homeo,
                                                                 const MaterialParams& m, const EquilibriumBox& box)
{
    auto g_of = [&](double l) -> std::optional<double> {
        auto r1 = [&](double g) { return equilibrium_residual(l, g, ctx, p_gr, homeo, m)[0]; };
        const double a = r1(box.g_lo), b = r1(box.g_hi);
        if ((a > 0.0) == (b > 0.0) && a != 0.0 && b != 0.0) return std::nullopt;
        return numeric::bisect(r1, box.g_lo, box.g_hi, 1e-15 * box.g_hi);
    };
    auto r2 = [&](double l, double g) { return equilibrium_residual(l, g, ctx, p_gr, homeo, m)[1]; };

    constexpr int n = 320;
    std::optional<std::array<double, 2>> best;
    double best_dist = 1e300;
    bool have_prev = false;
    double prev_l = 0.0, prev_r = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double l = box.lambda_lo + (box.lambda_hi - box.lambda_lo) * i / n;
        const auto g = g_of(l);
        if (!g) {
            have_prev = false;
            continue;
        }
        const double r = r2(l, *g);
        if (have_prev && ((r > 0.0) != (prev_r > 0.0) || r == 0.0)) {
            auto f = [&](double x) {
                const auto gx = g_of(x);
                return gx ? r2(x, *gx) : std::nan("");
            };
            const double root = numeric::bisect(f, prev_l, l, 1e-15);
            const auto groot = g_of(root);
            if (groot && std::abs(root - 1.0) < best_dist) {
                best = std::array{root, *groot};
                best_dist = std::abs(root - 1.0);
            }
        }
        have_prev = true;
        prev_l = l;
        prev_r = r;
    }
    return best;
}

} // namespace detail

inline NodeEquilibriumState equilibrium_state_at(double lambda, double g, const InsultContext& ctx, double p_gr,
                                                 const HomeostaticState& homeo, const MaterialParams& m)
{
    const double ce = ctx.elastin_modulus(m);
    const auto st = detail::gr_state(lambda, g, ce, m);
    NodeEquilibriumState out;
    out.lambda = lambda;
    out.growth = g;
    out.J = st.J;
    out.thickness = st.h;
    out.radius = st.a;
    out.phi = st.phi;
    out.sigma_theta = st.s.theta;
    out.sigma_z = st.s.z;
    out.p = st.s.pressure;
    out.c_e_eff = ce;
    out.residual = equilibrium_residual(lambda, g, ctx, p_gr, homeo, m);
    return out;
}

inline NodeEquilibriumState solve_equilibrium(const InsultContext& ctx, const PressureScenario& scenario,
                                              const HomeostaticState& homeo, const MaterialParams& m,
                                              const EquilibriumBox& box = {})
{
    require(ctx.severity >= 0.0 && ctx.severity < 1.0, ErrorKind::parameter, "local severity must lie in [0,1)");
    NodeEquilibriumState out;
    if (auto x = detail::newton_equilibrium(ctx, scenario.p_gr, homeo, m, box)) {
        out = equilibrium_state_at((*x)[0], (*x)[1], ctx, scenario.p_gr, homeo, m);
        out.iterations = static_cast<int>((*x)[2]);
    } else if (auto y = detail::fallback_equilibrium(ctx, scenario.p_gr, homeo, m, box)) {
        out = equilibrium_state_at((*y)[0], (*y)[1], ctx, scenario.p_gr, homeo, m);
        out.fallback = true;
    } else {
        std::ostringstream msg;
        msg << "no G&R equilibrium in box lambda [" << box.lambda_lo << ", " << box.lambda_hi << "] x g ["
            << box.g_lo << ", " << box.g_hi << "] for " << to_string(ctx.kind) << " loss " << ctx.severity
            << " at P_gr " << scenario.p_gr << " kPa";
        fail(ErrorKind::numerical, msg.str());
    }
    if (detail::rnorm(out.residual) > equilibrium_tolerance) {
        std::ostringstream msg;
        msg << "G&R residual " << detail::rnorm(out.residual) << " above tolerance at lambda " << out.lambda
            << ", g " << out.growth << (out.fallback ? " (fallback)" : "");
        fail(ErrorKind::numerical, msg.str());
    }
    return out;
}

/// Normalized mid-wall radius Λ = λ_θh·λ̃ at pressure P, loading the evolved
/// wall elastically with frozen composition, λ̃_z = 1 and λ̃_r = 1/λ̃.
inline double distension(const NodeEquilibriumState& s, double pressure, const MaterialParams& m)
{
    require(pressure > 0.0, ErrorKind::parameter, "distension pressure must be positive");
    auto f = [&](double t) {
        const auto st = mixture_stress({s.lambda * t, 1.0, t, 1.0}, s.phi, s.c_e_eff, m);
        return st.theta - pressure * s.radius * t / (s.thickness / t);
    };
    const auto bracket = numeric::expand_bracket(f, 1.0, 0.5, 3.0, 0.01);
    if (!bracket) {
        std::ostringstream msg;
        msg << "no distension bracket in [0.5, 3] at P = " << pressure << " kPa (lambda_h " << s.lambda << ")";
        fail(ErrorKind::numerical, msg.str());
    }
    return s.lambda * numeric::bisect(f, bracket->first, bracket->second, 1e-12);
}

} // namespace taa
