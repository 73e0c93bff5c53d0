#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "taa/insult/grid.hpp"
#include "taa/io/binary.hpp"

namespace taa {

/// Normalized insult ϑ ∈ [0,1] per grid node. The physical loss applied at a
/// node is severity_max · ϑ.
struct InsultProfile {
    CylindricalGrid grid;
    std::vector<double> values;
    InsultKind kind = InsultKind::elastic_fiber;
    double severity_max = 0.0;
    io::Json provenance = io::Json::object();  // generator params, seed, ...

    double at(std::size_t iz, std::size_t jt) const { return values[grid.index(iz, jt)]; }

    void validate() const
    {
        grid.validate();
        require(values.size() == grid.size(), ErrorKind::parameter, "profile size does not match grid");
        require(severity_max >= 0.0 && severity_max < 1.0, ErrorKind::parameter,
                "severity_max must lie in [0,1)");
        for (double v : values)
            require(v >= 0.0 && v <= 1.0, ErrorKind::parameter, "insult values must lie in [0,1]");
    }
};

inline constexpr std::string_view profile_magic = "TAAPROF1";

inline io::Json grid_to_json(const CylindricalGrid& g)
{
    return {{"n_z", g.n_z}, {"n_theta", g.n_theta}, {"l_o", g.length}, {"r_o", g.radius}};
}

inline CylindricalGrid grid_from_json(const io::Json& j)
{
    try {
        CylindricalGrid g;
        g.n_z = j.at("n_z").get<std::size_t>();
        g.n_theta = j.at("n_theta").get<std::size_t>();
        g.length = j.at("l_o").get<double>();
        g.radius = j.at("r_o").get<double>();
        g.validate();
        return g;
    } catch (const io::Json::exception& e) {
        fail(ErrorKind::format, std::string("bad grid header: ") + e.what());
    } catch (const Error& e) {
        fail(ErrorKind::format, e.what());
    }
}

inline std::string encode_profile(const InsultProfile& p)
{
    io::Json h = {{"grid", grid_to_json(p.grid)},
                  {"kind", to_string(p.kind)},
                  {"severity_max", p.severity_max},
                  {"provenance", p.provenance}};
    std::string payload;
    const auto f = io::to_f32(p.values);
    io::append_f32(payload, f);
    return io::encode_framed(profile_magic, h, payload);
}

inline InsultProfile decode_profile(std::string_view bytes)
{
    auto framed = io::decode_framed(bytes, profile_magic);
    InsultProfile p;
    try {
        p.grid = grid_from_json(framed.header.at("grid"));
        p.kind = insult_kind_from_string(framed.header.at("kind").get<std::string>());
        p.severity_max = framed.header.at("severity_max").get<double>();
        p.provenance = framed.header.value("provenance", io::Json::object());
    } catch (const io::Json::exception& e) {
        fail(ErrorKind::format, std::string("bad profile header: ") + e.what());
    }
    require(framed.payload.size() == 4 * p.grid.size(), ErrorKind::format, "profile payload size mismatch");
    const auto f = io::load_f32(framed.payload, 0, p.grid.size());
    p.values.assign(f.begin(), f.end());
    return p;
}

inline void write_profile(const std::filesystem::path& path, const InsultProfile& p)
{
    io::write_file(path, encode_profile(p));
}

inline InsultProfile read_profile(const std::filesystem::path& path) { return decode_profile(io::read_file(path)); }

} // namespace taa
