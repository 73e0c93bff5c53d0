#pragma once

// Constrained-mixture wall: neo-Hookean elastin plus exponential fiber
// families (smooth muscle circumferential; collagen circumferential, axial
// and two symmetric diagonals). Thin-wall, plane-stress Cauchy stresses.

#include <cmath>
#include <numbers>
#include <sstream>

#include "taa/error.hpp"
#include "taa/io/binary.hpp"

namespace taa {

struct MaterialParams {
    double c_e = 89.71;            // kPa
    double c1_m = 261.4, c2_m = 0.24;
    double c1_c = 234.9, c2_c = 4.08;
    double G_e_theta = 1.9, G_e_z = 1.62;
    double G_m = 1.2, G_c = 1.25;
    double phi_e = 0.34, phi_m = 0.33, phi_c = 0.33;
    double beta_theta = 0.056, beta_z = 0.067, beta_d = 0.877;
    double alpha0 = 29.9 * std::numbers::pi / 180.0;  // diagonal fibers, measured from the axis
    double eta = 1.0;        // turnover ratio; no role at equilibrium
    double k_ratio = 0.0;    // shear/intramural gain ratio; flow stimulus not modeled
    double r_o = 0.647, h_o = 0.040, l_o = 15.0;  // mm

    double G_e_r() const noexcept { return 1.0 / (G_e_theta * G_e_z); }
    double a_o() const noexcept { return r_o + 0.5 * h_o; }  // mid-wall radius

    void validate() const
    {
        require(c_e > 0.0 && c1_m > 0.0 && c1_c > 0.0 && c2_m >= 0.0 && c2_c >= 0.0, ErrorKind::parameter,
                "material moduli must be positive");
        require(G_e_theta > 0.0 && G_e_z > 0.0 && G_m > 0.0 && G_c > 0.0, ErrorKind::parameter,
                "deposition stretches must be positive");
        require(phi_e >= 0.0 && phi_m >= 0.0 && phi_c >= 0.0 && std::abs(phi_e + phi_m + phi_c - 1.0) < 1e-12,
                ErrorKind::parameter, "mass fractions must be non-negative and sum to 1");
        require(beta_theta >= 0.0 && beta_z >= 0.0 && beta_d >= 0.0 &&
                    std::abs(beta_theta + beta_z + beta_d - 1.0) < 1e-12,
                ErrorKind::parameter, "collagen orientation fractions must sum to 1");
        require(r_o > 0.0 && h_o > 0.0 && l_o > 0.0, ErrorKind::parameter, "geometry must be positive");
    }

    io::Json to_json() const
    {
        return {{"c_e", c_e},         {"c1_m", c1_m},       {"c2_m", c2_m},         {"c1_c", c1_c},
                {"c2_c", c2_c},       {"G_e_theta", G_e_theta}, {"G_e_z", G_e_z},   {"G_m", G_m},
                {"G_c", G_c},         {"phi_e", phi_e},     {"phi_m", phi_m},       {"phi_c", phi_c},
                {"beta_theta", beta_theta}, {"beta_z", beta_z}, {"beta_d", beta_d}, {"alpha0", alpha0},
                {"r_o", r_o},         {"h_o", h_o},         {"l_o", l_o}};
    }
};

// Fiber strain energy Ŵ(λ) = c1/(4 c2) (exp(c2 (λ²−1)²) − 1); c2 = 0 is the
// quadratic limit c1/4 (λ²−1)².
inline double fiber_energy(double lambda, double c1, double c2)
{
    const double e = lambda * lambda - 1.0;
    if (c2 == 0.0) return 0.25 * c1 * e * e;
    return c1 / (4.0 * c2) * std::expm1(c2 * e * e);
}

inline double fiber_energy_derivative(double lambda, double c1, double c2)
{
    const double e = lambda * lambda - 1.0;
    const double arg = c2 * e * e;
    if (!(arg < 700.0)) {
        std::ostringstream msg;
        msg << "fiber stretch " << lambda << " overflows the exponential energy (c2 = " << c2 << ")";
        fail(ErrorKind::numerical, msg.str());
    }
    return c1 * lambda * e * std::exp(arg);
}

/// Mass fractions per unit current volume.
struct Composition {
    double elastin = 0.0, muscle = 0.0, collagen = 0.0;

    double sum() const noexcept { return elastin + muscle + collagen; }
};

/// Elastin sees the total stretch from its natural configuration (times its
/// deposition stretch); fibers see only the stretch since their deposition.
struct WallStretch {
    double elastin_theta = 1.0, elastin_z = 1.0;
    double fiber_theta = 1.0, fiber_z = 1.0;
};

struct MixtureStress {
    double theta = 0.0;  // σ_θθ, kPa
    double z = 0.0;      // σ_zz
    double pressure = 0.0;  // Lagrange multiplier p = σ̄_rr
    double radial = 0.0;    // σ̄_rr − p, zero by construction
};

inline MixtureStress mixture_stress(const WallStretch& s, const Composition& phi, double c_e_eff,
                                    const MaterialParams& m)
{
    require(s.elastin_theta > 0.0 && s.elastin_z > 0.0 && s.fiber_theta > 0.0 && s.fiber_z > 0.0,
            ErrorKind::parameter, "stretches must be positive");
    require(std::abs(phi.sum() - 1.0) < 1e-9, ErrorKind::parameter, "composition must sum to 1");

    const double er = 1.0 / (s.elastin_theta * s.elastin_z);
    double st = phi.elastin * c_e_eff * std::pow(m.G_e_theta * s.elastin_theta, 2);
    double sz = phi.elastin * c_e_eff * std::pow(m.G_e_z * s.elastin_z, 2);
    const double sr = phi.elastin * c_e_eff * std::pow(m.G_e_r() * er, 2);

    // fiber Cauchy stress λŴ'(λ) along the fiber
    auto fiber = [](double lam, double c1, double c2) { return lam * fiber_energy_derivative(lam, c1, c2); };

    st += phi.muscle * fiber(m.G_m * s.fiber_theta, m.c1_m, m.c2_m);
    st += phi.collagen * m.beta_theta * fiber(m.G_c * s.fiber_theta, m.c1_c, m.c2_c);
    sz += phi.collagen * m.beta_z * fiber(m.G_c * s.fiber_z, m.c1_c, m.c2_c);

    // ±α₀ pair: same stretch, so β^d/2 each sums to β^d
    const double ts = s.fiber_theta * std::sin(m.alpha0);
    const double zc = s.fiber_z * std::cos(m.alpha0);
    const double ld = std::sqrt(ts * ts + zc * zc);
    const double fd = phi.collagen * m.beta_d * fiber(m.G_c * ld, m.c1_c, m.c2_c);
    st += fd * (ts / ld) * (ts / ld);
    sz += fd * (zc / ld) * (zc / ld);

    MixtureStress out;
    out.pressure = sr;
    out.radial = sr - out.pressure;
    out.theta = st - out.pressure;
    out.z = sz - out.pressure;
    require(std::isfinite(out.theta) && std::isfinite(out.z), ErrorKind::numerical, "non-finite wall stress");
    return out;
}

struct HomeostaticState {
    double sigma_theta = 0.0;  // kPa
    double sigma_z = 0.0;
    double sigma_o = 0.0;      // (σ_θθ + σ_zz + σ_rr)/3 with σ_rr = 0
    double pressure = 0.0;     // P_o from the Laplace relation, kPa
};

inline HomeostaticState homeostatic_state(const MaterialParams& m)
{
    m.validate();
    const auto s = mixture_stress({}, {m.phi_e, m.phi_m, m.phi_c}, m.c_e, m);
    require(s.theta > 0.0, ErrorKind::parameter, "homeostatic hoop stress is not positive");
    HomeostaticState h;
    h.sigma_theta = s.theta;
    h.sigma_z = s.z;
    h.sigma_o = (s.theta + s.z) / 3.0;
    h.pressure = s.theta * m.h_o / m.a_o();
    return h;
}

inline constexpr double kpa_per_mmhg = 0.133322387415;

} // namespace taa
