#pragma once

// Flat "key = value" run configuration. Every key has a built-in default, so
// an empty file (or none) is a complete configuration. Lines starting with
// '#' are comments; lists are comma separated.

#include <charconv>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "taa/deeponet/train.hpp"
#include "taa/insult/analytic.hpp"
#include "taa/insult/random_field.hpp"
#include "taa/vessel/material.hpp"

namespace taa {

inline const std::map<std::string, std::string>& config_defaults()
{
    static const std::map<std::string, std::string> d{
        {"seed", "1234"},
        {"jobs", "1"},
        {"grid.n_z", "21"},
        {"grid.n_theta", "20"},
        {"grid.length", "15"},
        {"grid.radius", "0.647"},
        // material (kPa, mm, radians for alpha0 given in degrees)
        {"material.c_e", "89.71"},
        {"material.c1_m", "261.4"},
        {"material.c2_m", "0.24"},
        {"material.c1_c", "234.9"},
        {"material.c2_c", "4.08"},
        {"material.G_e_theta", "1.9"},
        {"material.G_e_z", "1.62"},
        {"material.G_m", "1.2"},
        {"material.G_c", "1.25"},
        {"material.phi_e", "0.34"},
        {"material.phi_m", "0.33"},
        {"material.phi_c", "0.33"},
        {"material.beta_theta", "0.056"},
        {"material.beta_z", "0.067"},
        {"material.beta_d", "0.877"},
        {"material.alpha0_deg", "29.9"},
        {"material.h_o", "0.040"},
        // analytic sweep
        {"sweep.z_od", "2,3,4"},
        {"sweep.z_apex", "6,7.5,9"},
        {"sweep.wide_z_od", "4"},        // z_od whose apex is restricted
        {"sweep.wide_z_apex", "7.5"},
        {"sweep.theta_od_deg", "20,100,180,260,360"},
        {"sweep.theta_apex_deg", "0,90,180,270"},
        {"sweep.end_value", "0"},
        {"sweep.apex_value", "1"},
        {"sweep.nu_z", "2"},
        {"sweep.nu_theta", "2"},
        {"sweep.levels", "5"},
        // maximum loss per kind and pressure condition
        {"severity.elastin.normotensive", "0.595"},
        {"severity.elastin.hypertensive", "0.475"},
        {"severity.mechanosensing.normotensive", "0.184"},
        {"severity.mechanosensing.hypertensive", "0.108"},
        // random profiles
        {"random.propensity", "0.35"},
        {"random.softness", "0.2"},
        {"random.length_theta", "2"},
        {"random.length_z", "2"},
        {"random.boundary_offset", "2"},
        {"random.profiles", "10"},
        {"random.levels", "10"},
        {"case6.elastin_max", "0.60"},
        {"case6.mechanosensing_max", "0.20"},
        // dataset
        {"dataset.test_fraction", "0.1"},
        {"dataset.location", "trig"},
        // network
        {"arch.q", "128"},
        {"arch.fnn_depth", "4"},
        {"arch.fnn_width", "128"},
        {"arch.conv1_filters", "16"},
        {"arch.conv2_filters", "32"},
        {"arch.kernel", "3"},
        {"arch.second_pool", "true"},
        // training and evaluation
        {"train.adam_iters", "20000"},
        {"train.lr", "0.001"},
        {"train.lbfgs_iters", "2000"},
        {"train.trials", "5"},
        {"eval.noise", "0.05"},
    };
    return d;
}

class RunConfig {
public:
    RunConfig() : values_(config_defaults()) {}

    static RunConfig parse(std::string_view text, const std::string& origin = "config")
    {
        RunConfig c;
        std::istringstream in{std::string(text)};
        std::string line;
        for (int no = 1; std::getline(in, line); ++no) {
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos) continue;
            const auto eq = line.find('=');
            require(eq != std::string::npos, ErrorKind::config,
                    origin + ":" + std::to_string(no) + ": expected 'key = value'");
            c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), origin + ":" + std::to_string(no));
        }
        return c;
    }

    static RunConfig load(const std::filesystem::path& p)
    {
        std::string text;
        try {
            text = io::read_file(p);
        } catch (const Error& e) {
            fail(ErrorKind::config, "cannot read config " + p.string() + ": " + e.what());
        }
        return parse(text, p.string());
    }

    void set(const std::string& key, const std::string& value, const std::string& where = "override")
    {
        require(values_.count(key) > 0, ErrorKind::config, where + ": unknown config key '" + key + "'");
        require(!value.empty(), ErrorKind::config, where + ": empty value for '" + key + "'");
        values_[key] = value;
    }

    const std::string& str(const std::string& key) const
    {
        const auto it = values_.find(key);
        require(it != values_.end(), ErrorKind::config, "unknown config key '" + key + "'");
        return it->second;
    }

    double real(const std::string& key) const { return to_real(key, str(key)); }

    std::uint64_t u64(const std::string& key) const
    {
        const auto& s = str(key);
        std::uint64_t v = 0;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        require(r.ec == std::errc{} && r.ptr == s.data() + s.size(), ErrorKind::config,
                "'" + key + "' must be a non-negative integer, got '" + s + "'");
        return v;
    }

    std::size_t count(const std::string& key) const { return static_cast<std::size_t>(u64(key)); }

    bool flag(const std::string& key) const
    {
        const auto& s = str(key);
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        fail(ErrorKind::config, "'" + key + "' must be true or false, got '" + s + "'");
    }

    std::vector<double> reals(const std::string& key) const
    {
        std::vector<double> out;
        std::stringstream ss(str(key));
        for (std::string item; std::getline(ss, item, ',');) out.push_back(to_real(key, trim(item)));
        require(!out.empty(), ErrorKind::config, "'" + key + "' is an empty list");
        return out;
    }

    /// Canonical sorted text; its hash identifies the configuration. The job
    /// count cannot change any output, so it is left out.
    std::string canonical() const
    {
        std::string s;
        for (const auto& [k, v] : values_)
            if (k != "jobs") s += k + "=" + v + "\n";
        return s;
    }
    std::string hash() const { return io::hex64(io::fnv1a(canonical())); }
    const std::map<std::string, std::string>& values() const noexcept { return values_; }

    // ---- typed views

    CylindricalGrid grid() const
    {
        CylindricalGrid g{count("grid.n_z"), count("grid.n_theta"), real("grid.length"), real("grid.radius")};
        try {
            g.validate();
        } catch (const Error& e) {
            fail(ErrorKind::config, e.what());
        }
        return g;
    }

    MaterialParams material() const
    {
        MaterialParams m;
        m.c_e = real("material.c_e");
        m.c1_m = real("material.c1_m");
        m.c2_m = real("material.c2_m");
        m.c1_c = real("material.c1_c");
        m.c2_c = real("material.c2_c");
        m.G_e_theta = real("material.G_e_theta");
        m.G_e_z = real("material.G_e_z");
        m.G_m = real("material.G_m");
        m.G_c = real("material.G_c");
        m.phi_e = real("material.phi_e");
        m.phi_m = real("material.phi_m");
        m.phi_c = real("material.phi_c");
        m.beta_theta = real("material.beta_theta");
        m.beta_z = real("material.beta_z");
        m.beta_d = real("material.beta_d");
        m.alpha0 = real("material.alpha0_deg") * std::numbers::pi / 180.0;
        m.r_o = real("grid.radius");
        m.l_o = real("grid.length");
        m.h_o = real("material.h_o");
        try {
            m.validate();
        } catch (const Error& e) {
            fail(ErrorKind::config, e.what());
        }
        return m;
    }

    double severity_max(InsultKind kind, ScenarioLabel label) const
    {
        const double v = real("severity." + std::string(kind == InsultKind::elastic_fiber ? "elastin" : "mechanosensing") +
                              "." + to_string(label));
        require(v > 0.0 && v < 1.0, ErrorKind::config, "severity ranges must lie in (0,1)");
        return v;
    }

    RandomInsultParams random_params() const
    {
        RandomInsultParams p;
        p.propensity = real("random.propensity");
        p.softness = real("random.softness");
        p.length_theta = real("random.length_theta");
        p.length_z = real("random.length_z");
        p.boundary_offset = real("random.boundary_offset");
        return p;
    }

    ArchConfig arch() const
    {
        ArchConfig a;
        a.q = count("arch.q");
        a.fnn_depth = count("arch.fnn_depth");
        a.fnn_width = count("arch.fnn_width");
        a.conv1_filters = count("arch.conv1_filters");
        a.conv2_filters = count("arch.conv2_filters");
        a.kernel = count("arch.kernel");
        a.second_pool = flag("arch.second_pool");
        require(a.q > 0 && a.fnn_depth > 0 && a.fnn_width > 0 && a.conv1_filters > 0 && a.conv2_filters > 0 &&
                    a.kernel % 2 == 1,
                ErrorKind::config, "architecture sizes must be positive and the kernel odd");
        return a;
    }

    TrainConfig train() const
    {
        TrainConfig t;
        t.adam_iters = count("train.adam_iters");
        t.lr = real("train.lr");
        t.lbfgs_iters = count("train.lbfgs_iters");
        t.trials = count("train.trials");
        t.seed = u64("seed");
        t.validate();
        return t;
    }

    LocationEncoding location() const { return location_encoding_from_string(str("dataset.location")); }

private:
    static std::string trim(const std::string& s)
    {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return {};
        const auto b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
    }

    static double to_real(const std::string& key, const std::string& s)
    {
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used == s.size() && std::isfinite(v)) return v;
        } catch (const std::exception&) {
        }
        fail(ErrorKind::config, "'" + key + "' must be a number, got '" + s + "'");
    }

    std::map<std::string, std::string> values_;
};

} // namespace taa
