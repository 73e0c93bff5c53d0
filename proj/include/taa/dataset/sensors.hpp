#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "taa/insult/grid.hpp"

namespace taa {

enum class LocationEncoding {
    trig,      // (cos θ*, sin θ*, z*/l_o)
    distance,  // scalar distance of (r_o θ*, z*) from the origin, over l_o
};

inline LocationEncoding location_encoding_from_string(const std::string& s)
{
    if (s == "trig") return LocationEncoding::trig;
    if (s == "distance") return LocationEncoding::distance;
    fail(ErrorKind::config, "unknown location encoding '" + s + "'");
}

inline std::size_t location_dim(LocationEncoding e) { return e == LocationEncoding::trig ? 3 : 1; }

/// Five branch inputs of the sensor networks.
struct SensorInputs {
    std::vector<float> u1;  // Λ_D around its maximum
    std::vector<float> u2;  // location of max Λ_D
    std::vector<float> u3;  // D around its minimum
    std::vector<float> u4;  // location of min D
    float u5 = 0.0f;        // hypertension flag
};

/// First index of the extreme value, row-major order.
inline std::size_t argmax(std::span<const double> v)
{
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}
inline std::size_t argmin(std::span<const double> v)
{
    return static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
}

/// Lattice offsets along one axis: spacing 1 → −2..2, spacing 2 → {−2, 0, 2}.
inline std::vector<int> lattice_offsets(int spacing)
{
    require(spacing == 1 || spacing == 2, ErrorKind::parameter, "sensor spacing must be 1 or 2");
    if (spacing == 1) return {-2, -1, 0, 1, 2};
    return {-2, 0, 2};
}

/// Node indices of the lattice centered at `center`; θ wraps, z clamps.
inline std::vector<std::size_t> sensor_nodes(const CylindricalGrid& g, std::size_t center, int spacing)
{
    const auto offs = lattice_offsets(spacing);
    const auto iz0 = static_cast<long>(g.z_index(center));
    const auto jt0 = static_cast<long>(g.theta_index(center));
    const auto nz = static_cast<long>(g.n_z), nt = static_cast<long>(g.n_theta);
    std::vector<std::size_t> out;
    out.reserve(offs.size() * offs.size());
    for (int dz : offs) {
        const long iz = std::clamp(iz0 + dz, 0L, nz - 1);
        for (int dt : offs) {
            const long jt = ((jt0 + dt) % nt + nt) % nt;
            out.push_back(g.index(static_cast<std::size_t>(iz), static_cast<std::size_t>(jt)));
        }
    }
    return out;
}

inline std::vector<float> encode_location(const CylindricalGrid& g, std::size_t node, LocationEncoding e)
{
    const double th = g.theta(g.theta_index(node));
    const double z = g.z(g.z_index(node));
    if (e == LocationEncoding::trig)
        return {static_cast<float>(std::cos(th)), static_cast<float>(std::sin(th)), static_cast<float>(z / g.length)};
    return {static_cast<float>(std::hypot(g.radius * th, z) / g.length)};
}

inline SensorInputs extract_sensors(std::span<const double> lambda_d, std::span<const double> distensibility,
                                    const CylindricalGrid& g, int spacing, bool hypertensive,
                                    LocationEncoding enc = LocationEncoding::trig)
{
    require(lambda_d.size() == g.size() && distensibility.size() == g.size(), ErrorKind::parameter,
            "map size does not match grid");
    SensorInputs s;
    const std::size_t cmax = argmax(lambda_d), cmin = argmin(distensibility);
    for (std::size_t n : sensor_nodes(g, cmax, spacing)) s.u1.push_back(static_cast<float>(lambda_d[n]));
    for (std::size_t n : sensor_nodes(g, cmin, spacing)) s.u3.push_back(static_cast<float>(distensibility[n]));
    s.u2 = encode_location(g, cmax, enc);
    s.u4 = encode_location(g, cmin, enc);
    s.u5 = hypertensive ? 1.0f : 0.0f;
    return s;
}

} // namespace taa
