#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "taa/dataset/image.hpp"
#include "taa/dataset/sensors.hpp"
#include "taa/insult/profile.hpp"
#include "taa/log.hpp"
#include "taa/vessel/simulate.hpp"

namespace taa {

enum class InputMode { sensor25, sensor9, image };

inline std::string to_string(InputMode m)
{
    switch (m) {
    case InputMode::sensor25: return "sensor25";
    case InputMode::sensor9: return "sensor9";
    case InputMode::image: return "image";
    }
    return "?";
}

inline InputMode input_mode_from_string(const std::string& s)
{
    if (s == "sensor25") return InputMode::sensor25;
    if (s == "sensor9") return InputMode::sensor9;
    if (s == "image") return InputMode::image;
    fail(ErrorKind::config, "unknown input mode '" + s + "' (expected sensor25, sensor9 or image)");
}

inline int sensor_spacing(InputMode m) { return m == InputMode::sensor9 ? 2 : 1; }

/// Feature count per branch; the pressure flag is always the last branch.
inline std::vector<std::size_t> branch_dims(InputMode m, const CylindricalGrid& g, LocationEncoding enc)
{
    if (m == InputMode::image) return {g.size(), g.size(), 1};
    const std::size_t n = m == InputMode::sensor25 ? 25 : 9;
    const std::size_t l = location_dim(enc);
    return {n, l, n, l, 1};
}

inline bool is_image_branch(InputMode m, std::size_t b) { return m == InputMode::image && b < 2; }

struct SampleMeta {
    std::string id;
    int case_id = 0;
    InsultKind kind = InsultKind::elastic_fiber;
    ScenarioLabel scenario = ScenarioLabel::normotensive;
    double severity_max = 0.0;
};

struct Sample {
    SampleMeta meta;
    std::vector<std::vector<float>> inputs;  // one vector per branch
    std::vector<float> target;               // ϑ at every grid node
};

using BranchInputs = std::vector<std::vector<float>>;

inline BranchInputs make_inputs(const FieldMaps& maps, InputMode mode, LocationEncoding enc)
{
    const float flag = maps.scenario == ScenarioLabel::hypertensive ? 1.0f : 0.0f;
    if (mode == InputMode::image)
        return {to_grayscale(maps.lambda_d, maps.grid).pixels, to_grayscale(maps.distensibility, maps.grid).pixels,
                {flag}};
    auto s = extract_sensors(maps.lambda_d, maps.distensibility, maps.grid, sensor_spacing(mode),
                             maps.scenario == ScenarioLabel::hypertensive, enc);
    return {std::move(s.u1), std::move(s.u2), std::move(s.u3), std::move(s.u4), {s.u5}};
}

inline Sample make_sample(const FieldMaps& maps, const InsultProfile& profile, InputMode mode, LocationEncoding enc,
                          SampleMeta meta)
{
    require(maps.grid == profile.grid, ErrorKind::parameter, "maps and profile grids differ");
    meta.kind = profile.kind;
    meta.scenario = maps.scenario;
    meta.severity_max = profile.severity_max;
    Sample s;
    s.meta = std::move(meta);
    s.inputs = make_inputs(maps, mode, enc);
    s.target = io::to_f32(profile.values);
    return s;
}

/// Trunk coordinates (cos θ, sin θ, z/l_o) at every node, row-major.
inline std::vector<std::array<double, 3>> grid_query_points(const CylindricalGrid& g)
{
    std::vector<std::array<double, 3>> out(g.size());
    for (std::size_t i = 0; i < g.n_z; ++i)
        for (std::size_t j = 0; j < g.n_theta; ++j)
            out[g.index(i, j)] = {std::cos(g.theta(j)), std::sin(g.theta(j)), g.z(i) / g.length};
    return out;
}

struct Dataset {
    InputMode mode = InputMode::image;
    LocationEncoding location = LocationEncoding::trig;
    CylindricalGrid grid;
    std::vector<Sample> samples;
    std::vector<std::size_t> train, test;  // indices into samples, ascending
    std::uint64_t seed = 0;
    io::Json info = io::Json::object();

    std::size_t size() const noexcept { return samples.size(); }
    std::vector<std::size_t> dims() const { return branch_dims(mode, grid, location); }

    void validate() const
    {
        const auto d = dims();
        for (const auto& s : samples) {
            require(s.inputs.size() == d.size(), ErrorKind::format, "sample branch count mismatch");
            for (std::size_t b = 0; b < d.size(); ++b)
                require(s.inputs[b].size() == d[b], ErrorKind::format, "sample branch dimension mismatch");
            require(s.target.size() == grid.size(), ErrorKind::format, "sample target size mismatch");
        }
        std::vector<char> seen(samples.size(), 0);
        for (const auto* part : {&train, &test})
            for (std::size_t i : *part) {
                require(i < samples.size() && !seen[i], ErrorKind::format, "train/test indices overlap or overflow");
                seen[i] = 1;
            }
    }
};

/// Portable Fisher-Yates (std::shuffle's draw sequence is unspecified).
inline void seeded_shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng)
{
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

struct Split {
    std::vector<std::size_t> train, test;
};

/// Seeded split with |test| = round(test_frac·N), stratified by (kind,
/// scenario) using largest-remainder quotas.
inline Split split(const std::vector<SampleMeta>& meta, double test_frac, std::uint64_t seed)
{
    const std::size_t n = meta.size();
    require(n >= 10, ErrorKind::parameter, "split needs at least 10 samples");
    require(test_frac > 0.0 && test_frac < 1.0, ErrorKind::parameter, "test fraction must lie in (0,1)");
    const auto total = static_cast<std::size_t>(std::llround(test_frac * static_cast<double>(n)));
    std::mt19937_64 rng(seed);

    std::map<int, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < n; ++i)
        strata[2 * static_cast<int>(meta[i].kind) + static_cast<int>(meta[i].scenario)].push_back(i);

    std::map<int, std::size_t> quota;
    std::vector<std::pair<double, int>> remainders;
    std::size_t assigned = 0;
    for (const auto& [key, members] : strata) {
        const double share = static_cast<double>(total) * static_cast<double>(members.size()) / static_cast<double>(n);
        quota[key] = static_cast<std::size_t>(std::floor(share));
        assigned += quota[key];
        remainders.emplace_back(share - std::floor(share), key);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++quota[remainders[k].second];

    bool degenerate = false;
    for (const auto& [key, members] : strata)
        if (quota[key] == 0 || quota[key] >= members.size()) degenerate = true;

    Split out;
    if (degenerate) {
        log::warn("split: a stratum would be empty on one side; using an unstratified shuffle");
        std::vector<std::size_t> all(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = i;
        seeded_shuffle(all, rng);
        out.test.assign(all.begin(), all.begin() + static_cast<long>(total));
        out.train.assign(all.begin() + static_cast<long>(total), all.end());
    } else {
        for (auto& [key, members] : strata) {
            seeded_shuffle(members, rng);
            out.test.insert(out.test.end(), members.begin(), members.begin() + static_cast<long>(quota[key]));
            out.train.insert(out.train.end(), members.begin() + static_cast<long>(quota[key]), members.end());
        }
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

inline Dataset build_dataset(const std::vector<FieldMaps>& maps, const std::vector<InsultProfile>& profiles,
                             const std::vector<SampleMeta>& meta, InputMode mode, LocationEncoding enc,
                             double test_frac, std::uint64_t seed)
{
    require(maps.size() == profiles.size() && maps.size() == meta.size(), ErrorKind::parameter,
            "maps, profiles and metadata counts differ");
    require(!maps.empty(), ErrorKind::parameter, "cannot build an empty dataset");
    Dataset d;
    d.mode = mode;
    d.location = enc;
    d.grid = maps.front().grid;
    d.seed = seed;
    d.samples.reserve(maps.size());
    for (std::size_t i = 0; i < maps.size(); ++i) d.samples.push_back(make_sample(maps[i], profiles[i], mode, enc, meta[i]));
    std::vector<SampleMeta> m;
    for (const auto& s : d.samples) m.push_back(s.meta);
    auto sp = split(m, test_frac, seed);
    d.train = std::move(sp.train);
    d.test = std::move(sp.test);
    d.validate();
    return d;
}

// ------------------------------------------------------------------ noise

/// Population standard deviation of each branch, pooled over its features
/// and the given samples.
inline std::vector<double> channel_std(const std::vector<BranchInputs>& inputs)
{
    require(!inputs.empty(), ErrorKind::parameter, "channel_std of no samples");
    const std::size_t nb = inputs.front().size();
    std::vector<double> out(nb, 0.0);
    for (std::size_t b = 0; b < nb; ++b) {
        double sum = 0.0, sq = 0.0, cnt = 0.0;
        for (const auto& s : inputs)
            for (float v : s[b]) {
                sum += v;
                sq += static_cast<double>(v) * v;
                cnt += 1.0;
            }
        const double mean = sum / cnt;
        out[b] = std::sqrt(std::max(0.0, sq / cnt - mean * mean));
    }
    return out;
}

/// Adds i.i.d. N(0, (level·std_b)²) to every continuous feature. The flag
/// branch is untouched and image branches are clamped back to [0,1].
inline void add_noise(std::vector<BranchInputs>& inputs, const std::vector<double>& stds, double level,
                      InputMode mode, std::mt19937_64& rng)
{
    require(level >= 0.0, ErrorKind::parameter, "noise level must be non-negative");
    if (level == 0.0) return;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& s : inputs) {
        require(s.size() == stds.size(), ErrorKind::parameter, "noise scale count does not match branches");
        for (std::size_t b = 0; b + 1 < s.size(); ++b) {
            const double sd = level * stds[b];
            for (float& v : s[b]) {
                double x = v + sd * normal(rng);
                if (is_image_branch(mode, b)) x = std::clamp(x, 0.0, 1.0);
                v = static_cast<float>(x);
            }
        }
    }
}

// ------------------------------------------------------------------ files

inline constexpr std::string_view dataset_magic = "TAADATA1";

inline io::Json meta_to_json(const SampleMeta& m)
{
    return {{"id", m.id},
            {"case", m.case_id},
            {"kind", to_string(m.kind)},
            {"scenario", to_string(m.scenario)},
            {"severity_max", m.severity_max}};
}

inline SampleMeta meta_from_json(const io::Json& j)
{
    SampleMeta m;
    m.id = j.at("id").get<std::string>();
    m.case_id = j.at("case").get<int>();
    m.kind = insult_kind_from_string(j.at("kind").get<std::string>());
    m.scenario = scenario_from_string(j.at("scenario").get<std::string>());
    m.severity_max = j.at("severity_max").get<double>();
    return m;
}

struct EncodedDataset {
    io::Json manifest;
    std::string payload;
};

inline EncodedDataset encode_dataset(const Dataset& d)
{
    d.validate();
    const auto dims = d.dims();
    const std::size_t n = d.size(), p = d.grid.size();
    EncodedDataset out;
    out.payload.append(dataset_magic);
    io::Json blocks = io::Json::array();
    auto add_block = [&](const std::string& name, std::vector<std::size_t> shape, auto&& fill) {
        const std::size_t offset = out.payload.size();
        fill();
        std::size_t count = 1;
        for (auto s : shape) count *= s;
        blocks.push_back({{"name", name}, {"dtype", "f32"}, {"shape", shape}, {"offset", offset}, {"count", count}});
        require(out.payload.size() == offset + 4 * count, ErrorKind::format, "block size accounting error");
    };
    for (std::size_t b = 0; b < dims.size(); ++b)
        add_block("branch" + std::to_string(b), {n, dims[b]}, [&] {
            for (const auto& s : d.samples) io::append_f32(out.payload, s.inputs[b]);
        });
    add_block("targets", {n, p}, [&] {
        for (const auto& s : d.samples) io::append_f32(out.payload, s.target);
    });
    add_block("query_points", {p, 3}, [&] {
        for (const auto& q : grid_query_points(d.grid)) {
            const std::array<float, 3> f = {static_cast<float>(q[0]), static_cast<float>(q[1]), static_cast<float>(q[2])};
            io::append_f32(out.payload, f);
        }
    });

    io::Json samples = io::Json::array();
    for (const auto& s : d.samples) samples.push_back(meta_to_json(s.meta));
    out.manifest = {{"format", "taa-dataset"},
                    {"version", 1},
                    {"mode", to_string(d.mode)},
                    {"location_encoding", d.location == LocationEncoding::trig ? "trig" : "distance"},
                    {"grid", grid_to_json(d.grid)},
                    {"n_samples", n},
                    {"n_train", d.train.size()},
                    {"n_test", d.test.size()},
                    {"branch_dims", dims},
                    {"seed", d.seed},
                    {"train", d.train},
                    {"test", d.test},
                    {"samples", samples},
                    {"blocks", blocks},
                    {"payload_bytes", out.payload.size()},
                    {"info", d.info}};
    return out;
}

inline Dataset decode_dataset(const io::Json& manifest, std::string_view payload)
{
    Dataset d;
    std::vector<std::size_t> dims;
    io::Json blocks;
    try {
        require(manifest.at("format") == "taa-dataset" && manifest.at("version") == 1, ErrorKind::format,
                "not a version-1 dataset manifest");
        d.mode = input_mode_from_string(manifest.at("mode").get<std::string>());
        d.location = location_encoding_from_string(manifest.at("location_encoding").get<std::string>());
        d.grid = grid_from_json(manifest.at("grid"));
        d.seed = manifest.at("seed").get<std::uint64_t>();
        d.train = manifest.at("train").get<std::vector<std::size_t>>();
        d.test = manifest.at("test").get<std::vector<std::size_t>>();
        d.info = manifest.value("info", io::Json::object());
        dims = manifest.at("branch_dims").get<std::vector<std::size_t>>();
        for (const auto& s : manifest.at("samples")) d.samples.push_back({meta_from_json(s), {}, {}});
        blocks = manifest.at("blocks");
        require(manifest.at("n_samples").get<std::size_t>() == d.samples.size(), ErrorKind::format,
                "sample count mismatch");
        require(manifest.at("payload_bytes").get<std::size_t>() == payload.size(), ErrorKind::format,
                "payload size does not match manifest");
    } catch (const io::Json::exception& e) {
        fail(ErrorKind::format, std::string("bad dataset manifest: ") + e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::format) throw;
        fail(ErrorKind::format, e.what());
    }
    require(dims == branch_dims(d.mode, d.grid, d.location), ErrorKind::format,
            "branch dimensions do not match mode and grid");
    require(payload.substr(0, dataset_magic.size()) == dataset_magic, ErrorKind::format, "bad dataset magic");
    require(blocks.is_array() && blocks.size() == dims.size() + 2, ErrorKind::format, "unexpected block count");

    const std::size_t n = d.samples.size(), p = d.grid.size();
    std::size_t expect = dataset_magic.size();
    auto block = [&](std::size_t k, std::size_t count) {
        const auto& b = blocks[k];
        const auto off = b.at("offset").get<std::size_t>();
        require(off == expect && b.at("count").get<std::size_t>() == count, ErrorKind::format,
                "dataset block layout mismatch");
        expect = off + 4 * count;
        return io::load_f32(payload, off, count);
    };
    for (auto& s : d.samples) s.inputs.resize(dims.size());
    for (std::size_t b = 0; b < dims.size(); ++b) {
        const auto v = block(b, n * dims[b]);
        for (std::size_t i = 0; i < n; ++i)
            d.samples[i].inputs[b].assign(v.begin() + static_cast<long>(i * dims[b]),
                                          v.begin() + static_cast<long>((i + 1) * dims[b]));
    }
    const auto t = block(dims.size(), n * p);
    for (std::size_t i = 0; i < n; ++i)
        d.samples[i].target.assign(t.begin() + static_cast<long>(i * p), t.begin() + static_cast<long>((i + 1) * p));
    block(dims.size() + 1, 3 * p);
    require(expect == payload.size(), ErrorKind::format, "trailing bytes after last dataset block");
    d.validate();
    return d;
}

inline void write_dataset(const std::filesystem::path& dir, const Dataset& d)
{
    const auto enc = encode_dataset(d);
    io::write_file(dir / "manifest.json", enc.manifest.dump(1));
    io::write_file(dir / "payload.bin", enc.payload);
}

inline Dataset read_dataset(const std::filesystem::path& dir)
{
    const auto text = io::read_file(dir / "manifest.json");
    io::Json manifest;
    try {
        manifest = io::Json::parse(text);
    } catch (const io::Json::exception& e) {
        fail(ErrorKind::format, std::string("manifest is not JSON: ") + e.what());
    }
    return decode_dataset(manifest, io::read_file(dir / "payload.bin"));
}

} // namespace taa
