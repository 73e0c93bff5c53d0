#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "taa/error.hpp"

namespace taa {

/// Node grid on the unrolled cylinder. Row-major storage: z outer, θ inner.
/// θ is periodic: node n_theta-1 neighbours node 0.
struct CylindricalGrid {
    std::size_t n_z = 21;
    std::size_t n_theta = 20;
    double length = 15.0;   // l_o, mm
    double radius = 0.647;  // r_o, mm

    void validate() const
    {
        require(n_z >= 3, ErrorKind::parameter, "grid needs n_z >= 3");
        require(n_theta >= 4, ErrorKind::parameter, "grid needs n_theta >= 4");
        require(length > 0.0 && radius > 0.0, ErrorKind::parameter, "grid length and radius must be positive");
    }

    std::size_t size() const noexcept { return n_z * n_theta; }
    std::size_t index(std::size_t iz, std::size_t jt) const noexcept { return iz * n_theta + jt; }
    std::size_t z_index(std::size_t node) const noexcept { return node / n_theta; }
    std::size_t theta_index(std::size_t node) const noexcept { return node % n_theta; }

    double z(std::size_t iz) const noexcept
    {
        if (iz + 1 == n_z) return length;
        return static_cast<double>(iz) * length / static_cast<double>(n_z - 1);
    }

    double theta(std::size_t jt) const noexcept
    {
        return 2.0 * std::numbers::pi * static_cast<double>(jt) / static_cast<double>(n_theta);
    }

    /// Wrapped index distance min(|Δj|, n - |Δj|).
    std::size_t theta_steps(std::size_t j1, std::size_t j2) const noexcept
    {
        const std::size_t d = j1 > j2 ? j1 - j2 : j2 - j1;
        return d < n_theta - d ? d : n_theta - d;
    }

    /// Nodes in the first and last axial rows, ascending.
    std::vector<std::size_t> boundary_nodes() const
    {
        std::vector<std::size_t> out;
        out.reserve(2 * n_theta);
        for (std::size_t j = 0; j < n_theta; ++j) out.push_back(index(0, j));
        for (std::size_t j = 0; j < n_theta; ++j) out.push_back(index(n_z - 1, j));
        return out;
    }

    bool operator==(const CylindricalGrid&) const = default;
};

/// Angular distance on the circle, in [0, π].
inline double wrapped_angle(double a, double b) noexcept
{
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double d = std::fmod(std::abs(a - b), two_pi);
    return d > std::numbers::pi ? two_pi - d : d;
}

enum class InsultKind { elastic_fiber, mechanosensing };

inline std::string to_string(InsultKind k)
{
    return k == InsultKind::elastic_fiber ? "elastic_fiber" : "mechanosensing";
}

inline InsultKind insult_kind_from_string(const std::string& s)
{
    if (s == "elastic_fiber" || s == "elastin") return InsultKind::elastic_fiber;
    if (s == "mechanosensing") return InsultKind::mechanosensing;
    fail(ErrorKind::config, "unknown insult kind '" + s + "'");
}

} // namespace taa
