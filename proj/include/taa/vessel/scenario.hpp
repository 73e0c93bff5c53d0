#pragma once

#include <array>
#include <string>
#include <vector>

#include "taa/error.hpp"
#include "taa/insult/grid.hpp"

namespace taa {

enum class ScenarioLabel { normotensive, hypertensive };

inline std::string to_string(ScenarioLabel l)
{
    return l == ScenarioLabel::normotensive ? "normotensive" : "hypertensive";
}

inline ScenarioLabel scenario_from_string(const std::string& s)
{
    if (s == "normotensive" || s == "N") return ScenarioLabel::normotensive;
    if (s == "hypertensive" || s == "H") return ScenarioLabel::hypertensive;
    fail(ErrorKind::parameter, "unknown scenario '" + s + "'");
}

/// G&R, diastolic and systolic pressures, kPa.
struct PressureScenario {
    ScenarioLabel label = ScenarioLabel::normotensive;
    double p_gr = 0.0, p_dia = 0.0, p_sys = 0.0;

    bool hypertensive() const noexcept { return label == ScenarioLabel::hypertensive; }

    void validate() const
    {
        require(p_gr > 0.0 && p_dia > 0.0 && p_dia < p_sys, ErrorKind::parameter,
                "scenario needs 0 < P_dia < P_sys and P_gr > 0");
    }

    // Pressures are scaled from the homeostatic P_o by mmHg ratios against the
    // 105 mmHg baseline, so a zero insult at normotension is exactly homeostatic.
    static PressureScenario make(ScenarioLabel label, double p_o)
    {
        PressureScenario s;
        s.label = label;
        const double base = p_o / 105.0;
        if (label == ScenarioLabel::normotensive) {
            s.p_gr = p_o;
            s.p_dia = 99.0 * base;
            s.p_sys = 121.0 * base;
        } else {
            s.p_gr = 140.0 * base;
            s.p_dia = 129.0 * base;
            s.p_sys = 172.0 * base;
        }
        s.validate();
        return s;
    }
};

/// Largest loss fraction studied per (kind, scenario).
inline double max_severity(InsultKind kind, ScenarioLabel label)
{
    const bool n = label == ScenarioLabel::normotensive;
    if (kind == InsultKind::elastic_fiber) return n ? 0.595 : 0.475;
    return n ? 0.184 : 0.108;
}

/// `count` evenly spaced levels from max/10 to max.
inline std::vector<double> severity_levels(double max, std::size_t count = 5)
{
    require(count >= 1 && max > 0.0 && max < 1.0, ErrorKind::parameter, "bad severity range");
    std::vector<double> out(count);
    const double lo = 0.1 * max;
    for (std::size_t i = 0; i < count; ++i)
        out[i] = count == 1 ? max : lo + (max - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    return out;
}

inline std::vector<double> severity_levels(InsultKind kind, ScenarioLabel label, std::size_t count = 5)
{
    return severity_levels(max_severity(kind, label), count);
}

} // namespace taa
