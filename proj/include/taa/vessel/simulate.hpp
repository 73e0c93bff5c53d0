#pragma once

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "taa/insult/profile.hpp"
#include "taa/parallel.hpp"
#include "taa/vessel/equilibrium.hpp"

namespace taa {

/// Diastolic/systolic normalized radii and distensibility on the insult grid.
struct FieldMaps {
    CylindricalGrid grid;
    std::vector<double> lambda_d;
    std::vector<double> lambda_s;
    std::vector<double> distensibility;  // (Λ_S − Λ_D)/Λ_D
    ScenarioLabel scenario = ScenarioLabel::normotensive;
    io::Json source = io::Json::object();  // kind, severity_max, insult provenance

    void validate() const
    {
        grid.validate();
        const auto n = grid.size();
        require(lambda_d.size() == n && lambda_s.size() == n && distensibility.size() == n, ErrorKind::parameter,
                "map sizes do not match grid");
        for (std::size_t i = 0; i < n; ++i)
            require(lambda_s[i] > lambda_d[i] && lambda_d[i] > 0.0 && distensibility[i] > 0.0,
                    ErrorKind::parameter, "maps violate 0 < Lambda_D < Lambda_S");
    }
};

struct SimulationStats {
    std::size_t fallback_nodes = 0;
    std::size_t newton_iterations = 0;
};

inline FieldMaps simulate(const InsultProfile& profile, const PressureScenario& scenario, const MaterialParams& m,
                          unsigned jobs = 1, SimulationStats* stats = nullptr)
{
    profile.validate();
    scenario.validate();
    const auto homeo = homeostatic_state(m);
    const auto& g = profile.grid;
    const std::size_t n = g.size();

    FieldMaps out;
    out.grid = g;
    out.scenario = scenario.label;
    out.lambda_d.resize(n);
    out.lambda_s.resize(n);
    out.distensibility.resize(n);
    out.source = {{"kind", to_string(profile.kind)},
                  {"severity_max", profile.severity_max},
                  {"insult", profile.provenance}};
    std::vector<char> fell_back(n, 0);
    std::vector<int> iters(n, 0);

    parallel_for(n, jobs, [&](std::size_t node) {
        try {
            const InsultContext ctx{profile.kind, profile.severity_max * profile.values[node]};
            const auto st = solve_equilibrium(ctx, scenario, homeo, m);
            const double ld = distension(st, scenario.p_dia, m);
            const double ls = distension(st, scenario.p_sys, m);
            require(ls > ld && ld > 0.0, ErrorKind::numerical, "non-monotone pressure-radius response");
            out.lambda_d[node] = ld;
            out.lambda_s[node] = ls;
            out.distensibility[node] = (ls - ld) / ld;
            fell_back[node] = st.fallback;
            iters[node] = st.iterations;
        } catch (const Error& e) {
            std::ostringstream msg;
            msg << "node (z " << g.z_index(node) << ", theta " << g.theta_index(node) << ") at z = "
                << g.z(g.z_index(node)) << " mm, theta = " << g.theta(g.theta_index(node))
                << " rad, insult " << profile.values[node] << ": " << e.what();
            fail(e.kind(), msg.str());
        }
    });
    if (stats) {
        for (std::size_t i = 0; i < n; ++i) {
            stats->fallback_nodes += fell_back[i];
            stats->newton_iterations += static_cast<std::size_t>(iters[i]);
        }
    }
    return out;
}

inline constexpr std::string_view maps_magic = "TAAMAPS1";

inline std::string encode_maps(const FieldMaps& f)
{
    io::Json h = {{"grid", grid_to_json(f.grid)},
                  {"scenario", to_string(f.scenario)},
                  {"fields", {"lambda_d", "lambda_s", "distensibility"}},
                  {"source", f.source}};
    std::string payload;
    for (const auto* v : {&f.lambda_d, &f.lambda_s, &f.distensibility}) {
        const auto x = io::to_f32(*v);
        io::append_f32(payload, x);
    }
    return io::encode_framed(maps_magic, h, payload);
}

inline FieldMaps decode_maps(std::string_view bytes)
{
    auto framed = io::decode_framed(bytes, maps_magic);
    FieldMaps f;
    try {
        f.grid = grid_from_json(framed.header.at("grid"));
        f.scenario = scenario_from_string(framed.header.at("scenario").get<std::string>());
        f.source = framed.header.value("source", io::Json::object());
    } catch (const io::Json::exception& e) {
        fail(ErrorKind::format, std::string("bad maps header: ") + e.what());
    } catch (const Error& e) {
        fail(ErrorKind::format, e.what());
    }
    const std::size_t n = f.grid.size();
    require(framed.payload.size() == 3 * 4 * n, ErrorKind::format, "maps payload size mismatch");
    std::vector<double>* dst[] = {&f.lambda_d, &f.lambda_s, &f.distensibility};
    for (std::size_t k = 0; k < 3; ++k) {
        const auto x = io::load_f32(framed.payload, 4 * n * k, n);
        dst[k]->assign(x.begin(), x.end());
    }
    return f;
}

inline void write_maps(const std::filesystem::path& path, const FieldMaps& f) { io::write_file(path, encode_maps(f)); }
inline FieldMaps read_maps(const std::filesystem::path& path) { return decode_maps(io::read_file(path)); }

} // namespace taa
