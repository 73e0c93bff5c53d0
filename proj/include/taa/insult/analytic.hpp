#pragma once

#include <cmath>

#include "taa/insult/profile.hpp"

namespace taa {

/// Double-exponential insult bump. Widths in mm / radians; ν controls how
/// sharp the edges are (ν = 2 gives a Gaussian-like profile).
struct AnalyticInsultParams {
    double end_value = 0.0;
    double apex_value = 1.0;
    double z_apex = 7.5;
    double z_width = 3.0;
    double theta_apex = 0.0;
    double theta_width = 1.0;
    double nu_z = 2.0;
    double nu_theta = 2.0;

    void validate() const
    {
        require(0.0 <= end_value && end_value <= apex_value && apex_value <= 1.0, ErrorKind::parameter,
                "need 0 <= end_value <= apex_value <= 1");
        require(z_width > 0.0 && theta_width > 0.0, ErrorKind::parameter, "insult widths must be positive");
        require(nu_z > 0.0 && nu_theta > 0.0, ErrorKind::parameter, "softness exponents must be positive");
    }

    io::Json to_json() const
    {
        return {{"end", end_value},         {"apex", apex_value},        {"z_apex", z_apex},
                {"z_od", z_width},          {"theta_apex", theta_apex},  {"theta_od", theta_width},
                {"nu_z", nu_z},             {"nu_theta", nu_theta}};
    }
};

/// Insult value at (z, θ). The angular offset is the wrapped distance, so
/// the bump is continuous across θ = 0.
inline double analytic_insult(const AnalyticInsultParams& p, double z, double theta)
{
    const double dz = std::abs((z - p.z_apex) / p.z_width);
    const double dt = wrapped_angle(theta, p.theta_apex) / p.theta_width;
    const double v = p.end_value + (p.apex_value - p.end_value) * std::exp(-std::pow(dz, p.nu_z)) *
                                       std::exp(-std::pow(dt, p.nu_theta));
    require(std::isfinite(v), ErrorKind::parameter, "analytic insult produced a non-finite value");
    return v;
}

inline InsultProfile evaluate_analytic(const CylindricalGrid& grid, const AnalyticInsultParams& p,
                                       InsultKind kind = InsultKind::elastic_fiber, double severity_max = 0.0)
{
    grid.validate();
    p.validate();
    InsultProfile out;
    out.grid = grid;
    out.kind = kind;
    out.severity_max = severity_max;
    out.values.resize(grid.size());
    for (std::size_t i = 0; i < grid.n_z; ++i)
        for (std::size_t j = 0; j < grid.n_theta; ++j)
            out.values[grid.index(i, j)] = analytic_insult(p, grid.z(i), grid.theta(j));
    out.provenance = {{"mode", "analytic"}, {"params", p.to_json()}};
    return out;
}

} // namespace taa
