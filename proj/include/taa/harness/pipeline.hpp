#pragma once

// Experiment cases and the file-based pipeline stages. Layout under the
// output directory:
//
//   case{N}/profiles/{id}.prof + index.json
//   case{N}/maps/{id}.maps + index.json
//   case{N}/dataset_{arch}/manifest.json + payload.bin
//   case{N}/models/{arch}/trial{i}.ckpt + trial{i}.loss
//   case{N}/report_{arch}.json
//
// Every artifact carries {config_hash, seed, stage}. Nothing time-dependent
// is written, so reruns are byte-identical.

#include <cstdio>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "taa/deeponet/train.hpp"
#include "taa/harness/config.hpp"
#include "taa/insult/analytic.hpp"
#include "taa/insult/random_field.hpp"
#include "taa/vessel/simulate.hpp"

namespace taa {

namespace fs = std::filesystem;

struct CaseSpec {
    int id = 1;
    std::vector<InsultKind> kinds;
    std::vector<ScenarioLabel> scenarios;
    bool random = false;
    std::string title;
};

inline CaseSpec case_spec(int id)
{
    using K = InsultKind;
    using S = ScenarioLabel;
    switch (id) {
    case 1: return {1, {K::elastic_fiber}, {S::normotensive}, false, "analytic elastic fiber integrity (N)"};
    case 2: return {2, {K::mechanosensing}, {S::normotensive}, false, "analytic mechanosensing (N)"};
    case 3:
        return {3, {K::elastic_fiber, K::mechanosensing}, {S::normotensive}, false,
                "analytic elastic fiber integrity or mechanosensing (N)"};
    case 4: return {4, {K::mechanosensing}, {S::normotensive, S::hypertensive}, false, "analytic mechanosensing (N & H)"};
    case 5:
        return {5, {K::elastic_fiber, K::mechanosensing}, {S::normotensive, S::hypertensive}, false,
                "analytic elastic fiber integrity or mechanosensing (N & H)"};
    case 6:
        return {6, {K::elastic_fiber, K::mechanosensing}, {S::normotensive}, true,
                "random elastic fiber integrity or mechanosensing (N)"};
    default: fail(ErrorKind::config, "case must be 1..6, got " + std::to_string(id));
    }
}

inline const char* kind_tag(InsultKind k) { return k == InsultKind::elastic_fiber ? "el" : "ms"; }

inline io::Json provenance(const RunConfig& c, const std::string& stage)
{
    return {{"config_hash", c.hash()}, {"seed", c.u64("seed")}, {"stage", stage}};
}

inline fs::path case_dir(const fs::path& out, int case_id) { return out / ("case" + std::to_string(case_id)); }

inline void write_json(const fs::path& p, const io::Json& j) { io::write_file(p, j.dump(1) + "\n"); }

inline io::Json read_json(const fs::path& p)
{
    const auto text = io::read_file(p);
    try {
        return io::Json::parse(text);
    } catch (const io::Json::exception& e) {
        fail(ErrorKind::format, p.string() + " is not JSON: " + e.what());
    }
}

// ------------------------------------------------------------------ profiles

/// One analytic shape; angles in degrees.
struct AnalyticShape {
    double z_od = 0.0, z_apex = 0.0, theta_od = 0.0, theta_apex = 0.0;
};

/// Cartesian product of the sweep lists, except that the wide z_od only
/// takes the central apex and a full-circumference θ_od only the first θ
/// apex (the ring is rotation invariant up to its small wrap seam).
inline std::vector<AnalyticShape> analytic_shapes(const RunConfig& c)
{
    const double wide = c.real("sweep.wide_z_od");
    std::vector<std::pair<double, double>> zs;
    for (double od : c.reals("sweep.z_od")) {
        if (od == wide)
            zs.emplace_back(od, c.real("sweep.wide_z_apex"));
        else
            for (double apex : c.reals("sweep.z_apex")) zs.emplace_back(od, apex);
    }
    const auto apexes = c.reals("sweep.theta_apex_deg");
    std::vector<AnalyticShape> out;
    for (const auto& [zod, zap] : zs)
        for (double tod : c.reals("sweep.theta_od_deg")) {
            if (tod >= 360.0) {
                out.push_back({zod, zap, tod, apexes.front()});
                continue;
            }
            for (double tap : apexes) out.push_back({zod, zap, tod, tap});
        }
    return out;
}

inline AnalyticInsultParams to_params(const AnalyticShape& s, const RunConfig& c)
{
    constexpr double deg = std::numbers::pi / 180.0;
    AnalyticInsultParams p;
    p.end_value = c.real("sweep.end_value");
    p.apex_value = c.real("sweep.apex_value");
    p.z_width = s.z_od;
    p.z_apex = s.z_apex;
    p.theta_width = s.theta_od * deg;
    p.theta_apex = s.theta_apex * deg;
    p.nu_z = c.real("sweep.nu_z");
    p.nu_theta = c.real("sweep.nu_theta");
    return p;
}

struct ProfileEntry {
    std::string id;
    ScenarioLabel scenario = ScenarioLabel::normotensive;
    InsultProfile profile;
};

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::string entry_id(ScenarioLabel s, InsultKind k, std::size_t shape, std::size_t level)
{
    char buf[48];
    std::snprintf(buf, sizeof buf, "%c-%s-s%03zu-l%02zu", s == ScenarioLabel::normotensive ? 'N' : 'H', kind_tag(k),
                  shape, level);
    return buf;
}

/// Analytic cases: scenario × kind × shape × severity level.
inline std::vector<ProfileEntry> enumerate_analytic(const CaseSpec& cs, const RunConfig& c)
{
    require(!cs.random, ErrorKind::config, "case " + std::to_string(cs.id) + " uses random profiles");
    const auto grid = c.grid();
    const auto shapes = analytic_shapes(c);
    std::vector<ProfileEntry> out;
    for (auto scen : cs.scenarios)
        for (auto kind : cs.kinds) {
            const auto levels = severity_levels(c.severity_max(kind, scen), c.count("sweep.levels"));
            for (std::size_t s = 0; s < shapes.size(); ++s) {
                const auto base = evaluate_analytic(grid, to_params(shapes[s], c), kind);
                for (std::size_t l = 0; l < levels.size(); ++l) {
                    ProfileEntry e{entry_id(scen, kind, s, l), scen, base};
                    e.profile.severity_max = levels[l];
                    e.profile.provenance["shape_deg"] = {{"z_od", shapes[s].z_od},
                                                         {"z_apex", shapes[s].z_apex},
                                                         {"theta_od", shapes[s].theta_od},
                                                         {"theta_apex", shapes[s].theta_apex}};
                    out.push_back(std::move(e));
                }
            }
        }
    return out;
}

/// Random case: profile p has kind kinds[p % |kinds|] and one latent draw,
/// reused across all severity levels.
inline std::vector<ProfileEntry> enumerate_random(const CaseSpec& cs, const RunConfig& c)
{
    require(cs.random, ErrorKind::config, "case " + std::to_string(cs.id) + " uses analytic profiles");
    const RandomInsultGenerator gen(c.grid(), c.random_params());
    const std::uint64_t seed = c.u64("seed");
    std::vector<ProfileEntry> out;
    for (auto scen : cs.scenarios)
        for (std::size_t p = 0; p < c.count("random.profiles"); ++p) {
            const InsultKind kind = cs.kinds[p % cs.kinds.size()];
            const double top = c.real(kind == InsultKind::elastic_fiber ? "case6.elastin_max" : "case6.mechanosensing_max");
            const auto levels = severity_levels(top, c.count("random.levels"));
            const auto base = gen.generate(kind, 0.0, splitmix64(seed ^ (0x72616e64ULL + p)));
            for (std::size_t l = 0; l < levels.size(); ++l) {
                ProfileEntry e{entry_id(scen, kind, p, l), scen, base};
                e.profile.severity_max = levels[l];
                out.push_back(std::move(e));
            }
        }
    return out;
}

inline std::vector<ProfileEntry> enumerate_case(const CaseSpec& cs, const RunConfig& c)
{
    return cs.random ? enumerate_random(cs, c) : enumerate_analytic(cs, c);
}

struct IndexEntry {
    std::string id;
    InsultKind kind = InsultKind::elastic_fiber;
    ScenarioLabel scenario = ScenarioLabel::normotensive;
    double severity_max = 0.0;
};

inline io::Json index_entry_json(const IndexEntry& e)
{
    return {{"id", e.id}, {"kind", to_string(e.kind)}, {"scenario", to_string(e.scenario)}, {"severity_max", e.severity_max}};
}

inline std::vector<IndexEntry> read_index(const fs::path& p)
{
    const auto j = read_json(p);
    std::vector<IndexEntry> out;
    try {
        for (const auto& e : j.at("entries"))
            out.push_back({e.at("id").get<std::string>(), insult_kind_from_string(e.at("kind").get<std::string>()),
                           scenario_from_string(e.at("scenario").get<std::string>()),
                           e.at("severity_max").get<double>()});
    } catch (const io::Json::exception& ex) {
        fail(ErrorKind::format, p.string() + ": " + ex.what());
    }
    return out;
}

struct GenerateResult {
    std::size_t count = 0;
    std::size_t shapes = 0;  // analytic shapes per (kind, scenario); 0 for random
};

/// Writes every profile of a case plus its index.
inline GenerateResult cmd_generate(int case_id, const RunConfig& c, const fs::path& out)
{
    const CaseSpec cs = case_spec(case_id);
    const std::string stage = cs.random ? "gen-random" : "gen-analytic";
    auto entries = enumerate_case(cs, c);
    const fs::path dir = case_dir(out, case_id) / "profiles";
    fs::remove_all(dir);
    io::Json idx = io::Json::array();
    for (auto& e : entries) {
        e.profile.provenance["origin"] = provenance(c, stage);
        e.profile.provenance["id"] = e.id;
        write_profile(dir / (e.id + ".prof"), e.profile);
        idx.push_back(index_entry_json({e.id, e.profile.kind, e.scenario, e.profile.severity_max}));
    }
    GenerateResult r{entries.size(), cs.random ? 0 : analytic_shapes(c).size()};
    write_json(dir / "index.json", {{"provenance", provenance(c, stage)},
                                    {"case", case_id},
                                    {"title", cs.title},
                                    {"count", r.count},
                                    {"shapes", r.shapes},
                                    {"entries", idx}});
    log::info("case " + std::to_string(case_id) + ": wrote " + std::to_string(r.count) + " profiles");
    return r;
}

// ------------------------------------------------------------------ simulate

struct SimulateFailure {
    std::string id;
    std::string error;
};

struct SimulateResult {
    std::size_t written = 0;
    std::vector<SimulateFailure> failures;
};

/// Forward simulation of every indexed profile. A failing profile is
/// logged and left out; the others are still written.
inline SimulateResult cmd_simulate(int case_id, const RunConfig& c, const fs::path& out)
{
    const fs::path cdir = case_dir(out, case_id);
    const auto entries = read_index(cdir / "profiles" / "index.json");
    const auto m = c.material();
    const double p_o = homeostatic_state(m).pressure;
    const fs::path dir = cdir / "maps";
    fs::remove_all(dir);
    fs::create_directories(dir);

    std::vector<std::optional<std::string>> errors(entries.size());
    std::mutex log_mu;
    parallel_for(entries.size(), resolve_jobs(static_cast<unsigned>(c.count("jobs"))), [&](std::size_t i) {
        const auto& e = entries[i];
        try {
            const auto prof = read_profile(cdir / "profiles" / (e.id + ".prof"));
            FieldMaps maps = simulate(prof, PressureScenario::make(e.scenario, p_o), m);
            maps.source["origin"] = provenance(c, "simulate");
            maps.source["id"] = e.id;
            write_maps(dir / (e.id + ".maps"), maps);
        } catch (const Error& ex) {
            if (ex.kind() == ErrorKind::io) throw;
            errors[i] = ex.what();
            std::lock_guard lock(log_mu);
            log::warn("simulate " + e.id + " failed: " + ex.what());
        }
    });

    SimulateResult r;
    io::Json ok = io::Json::array(), bad = io::Json::array();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (errors[i]) {
            r.failures.push_back({entries[i].id, *errors[i]});
            bad.push_back({{"id", entries[i].id}, {"error", *errors[i]}});
        } else {
            ++r.written;
            ok.push_back(index_entry_json(entries[i]));
        }
    }
    write_json(dir / "index.json", {{"provenance", provenance(c, "simulate")},
                                    {"case", case_id},
                                    {"count", r.written},
                                    {"entries", ok},
                                    {"failures", bad}});
    log::info("case " + std::to_string(case_id) + ": simulated " + std::to_string(r.written) + " of " +
              std::to_string(entries.size()) + " profiles");
    return r;
}

// ------------------------------------------------------------------ dataset

inline fs::path dataset_dir(const fs::path& out, int case_id, InputMode arch)
{
    return case_dir(out, case_id) / ("dataset_" + to_string(arch));
}

inline Dataset cmd_build_dataset(int case_id, InputMode arch, const RunConfig& c, const fs::path& out)
{
    const fs::path cdir = case_dir(out, case_id);
    const auto entries = read_index(cdir / "maps" / "index.json");
    std::vector<FieldMaps> maps;
    std::vector<InsultProfile> profiles;
    std::vector<SampleMeta> meta;
    for (const auto& e : entries) {
        maps.push_back(read_maps(cdir / "maps" / (e.id + ".maps")));
        profiles.push_back(read_profile(cdir / "profiles" / (e.id + ".prof")));
        SampleMeta sm;
        sm.id = e.id;
        sm.case_id = case_id;
        meta.push_back(sm);
    }
    Dataset d = build_dataset(maps, profiles, meta, arch, c.location(), c.real("dataset.test_fraction"), c.u64("seed"));
    d.info = {{"provenance", provenance(c, "build-dataset")}, {"case", case_id}};
    const fs::path dir = dataset_dir(out, case_id, arch);
    fs::remove_all(dir);
    write_dataset(dir, d);
    log::info("case " + std::to_string(case_id) + " " + to_string(arch) + ": " + std::to_string(d.train.size()) +
              " train / " + std::to_string(d.test.size()) + " test samples");
    return d;
}

// ------------------------------------------------------------------ train

inline fs::path model_dir(const fs::path& out, int case_id, InputMode arch)
{
    return case_dir(out, case_id) / "models" / to_string(arch);
}

inline fs::path checkpoint_path(const fs::path& out, int case_id, InputMode arch, std::size_t trial)
{
    return model_dir(out, case_id, arch) / ("trial" + std::to_string(trial) + ".ckpt");
}

inline std::string format_losses(const std::vector<double>& v)
{
    std::string s;
    char buf[32];
    for (double x : v) {
        std::snprintf(buf, sizeof buf, "%.17g\n", x);
        s += buf;
    }
    return s;
}

/// Trains every trial (seed + i) and writes checkpoints and loss traces.
inline std::vector<TrainResult> cmd_train(int case_id, InputMode arch, const RunConfig& c, const fs::path& out)
{
    const Dataset d = read_dataset(dataset_dir(out, case_id, arch));
    require(d.mode == arch, ErrorKind::config, "dataset mode does not match --arch");
    const TrainConfig cfg = c.train();
    const ArchConfig a = c.arch();
    const fs::path dir = model_dir(out, case_id, arch);
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::vector<TrainResult> res(cfg.trials);
    parallel_for(cfg.trials, resolve_jobs(static_cast<unsigned>(c.count("jobs"))), [&](std::size_t i) {
        DeepONet m = DeepONet::make(arch, d.grid, d.location, a);
        TrainConfig tc = cfg;
        tc.seed = cfg.seed + i;
        res[i] = train(m, d, tc);
        write_checkpoint(checkpoint_path(out, case_id, arch, i), m,
                         {{"provenance", provenance(c, "train")},
                          {"case", case_id},
                          {"trial", i},
                          {"trial_seed", tc.seed},
                          {"train", tc.to_json()},
                          {"adam_steps", res[i].adam_steps},
                          {"lbfgs_steps", res[i].lbfgs_steps},
                          {"initial_loss", res[i].initial_loss},
                          {"final_loss", res[i].final_loss}});
        io::write_file(dir / ("trial" + std::to_string(i) + ".loss"), format_losses(res[i].loss_history));
        char buf[160];
        std::snprintf(buf, sizeof buf, "case %d %s trial %zu: loss %.4g -> %.4g (%zu Adam, %zu L-BFGS, %.0f s)",
                      case_id, to_string(arch).c_str(), i, res[i].initial_loss, res[i].final_loss,
                      res[i].adam_steps, res[i].lbfgs_steps, res[i].seconds);
        log::info(buf);
    });
    return res;
}

// ------------------------------------------------------------------ report

struct ReportRow {
    int case_id = 0;
    InputMode arch = InputMode::image;
    std::size_t n_train = 0, n_test = 0, params = 0;
    double noise = 0.0;
    double clean_mean = 0.0, clean_std = 0.0, noisy_mean = 0.0, noisy_std = 0.0;
    std::vector<double> clean, noisy;  // per trial
    io::Json provenance = io::Json::object();

    double inflation() const { return noisy_mean / clean_mean; }

    io::Json to_json() const
    {
        return {{"case", case_id},       {"arch", to_string(arch)},   {"n_train", n_train},
                {"n_test", n_test},      {"params", params},          {"noise", noise},
                {"err_clean", clean_mean}, {"err_clean_std", clean_std}, {"err_noisy", noisy_mean},
                {"err_noisy_std", noisy_std}, {"trials_clean", clean}, {"trials_noisy", noisy},
                {"provenance", provenance}};
    }

    static ReportRow from_json(const io::Json& j)
    {
        try {
            ReportRow r;
            r.case_id = j.at("case").get<int>();
            r.arch = input_mode_from_string(j.at("arch").get<std::string>());
            r.n_train = j.at("n_train").get<std::size_t>();
            r.n_test = j.at("n_test").get<std::size_t>();
            r.params = j.at("params").get<std::size_t>();
            r.noise = j.at("noise").get<double>();
            r.clean_mean = j.at("err_clean").get<double>();
            r.clean_std = j.at("err_clean_std").get<double>();
            r.noisy_mean = j.at("err_noisy").get<double>();
            r.noisy_std = j.at("err_noisy_std").get<double>();
            r.clean = j.at("trials_clean").get<std::vector<double>>();
            r.noisy = j.at("trials_noisy").get<std::vector<double>>();
            r.provenance = j.value("provenance", io::Json::object());
            return r;
        } catch (const io::Json::exception& e) {
            fail(ErrorKind::format, std::string("bad report row: ") + e.what());
        }
    }
};

inline fs::path report_row_path(const fs::path& out, int case_id, InputMode arch)
{
    return case_dir(out, case_id) / ("report_" + to_string(arch) + ".json");
}

/// Scores every trained checkpoint on the test split, clean and with
/// noise on the test inputs, and writes the report row.
inline ReportRow cmd_evaluate(int case_id, InputMode arch, const RunConfig& c, const fs::path& out)
{
    const Dataset d = read_dataset(dataset_dir(out, case_id, arch));
    require(d.mode == arch, ErrorKind::config, "dataset mode does not match --arch");
    const TrainConfig cfg = c.train();
    const double noise = c.real("eval.noise");
    require(noise >= 0.0, ErrorKind::config, "noise level must be non-negative");

    ReportRow row;
    row.case_id = case_id;
    row.arch = arch;
    row.n_train = d.train.size();
    row.n_test = d.test.size();
    row.noise = noise;
    row.clean.resize(cfg.trials);
    row.noisy.resize(cfg.trials);
    std::vector<std::size_t> params(cfg.trials);
    parallel_for(cfg.trials, resolve_jobs(static_cast<unsigned>(c.count("jobs"))), [&](std::size_t i) {
        const DeepONet m = read_checkpoint(checkpoint_path(out, case_id, arch, i));
        require(m.mode() == arch, ErrorKind::format, "checkpoint mode does not match --arch");
        params[i] = m.num_params();
        row.clean[i] = mean_of(relative_errors(m, d, d.test));
        row.noisy[i] = noise > 0.0 ? mean_of(relative_errors(m, d, d.test, noise, noise_seed_for(cfg.seed + i)))
                                   : row.clean[i];
    });
    row.params = params.front();
    row.clean_mean = mean_of(row.clean);
    row.clean_std = std_of(row.clean);
    row.noisy_mean = mean_of(row.noisy);
    row.noisy_std = std_of(row.noisy);
    row.provenance = provenance(c, "evaluate");
    write_json(report_row_path(out, case_id, arch), row.to_json());
    char buf[200];
    std::snprintf(buf, sizeof buf, "case %d %s: clean %.3f%% +- %.3f%%, noisy %.3f%% +- %.3f%%", case_id,
                  to_string(arch).c_str(), 100 * row.clean_mean, 100 * row.clean_std, 100 * row.noisy_mean,
                  100 * row.noisy_std);
    log::info(buf);
    return row;
}

inline int arch_rank(InputMode a)
{
    return a == InputMode::sensor25 ? 0 : a == InputMode::sensor9 ? 1 : 2;
}

inline void sort_rows(std::vector<ReportRow>& rows)
{
    std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
        return a.case_id != b.case_id ? a.case_id < b.case_id : arch_rank(a.arch) < arch_rank(b.arch);
    });
}

/// Rows found under out/case*/report_*.json, ordered by (case, arch).
inline std::vector<ReportRow> collect_rows(const fs::path& out)
{
    std::vector<ReportRow> rows;
    for (int id = 1; id <= 6; ++id)
        for (auto a : {InputMode::sensor25, InputMode::sensor9, InputMode::image}) {
            const auto p = report_row_path(out, id, a);
            if (fs::exists(p)) rows.push_back(ReportRow::from_json(read_json(p)));
        }
    sort_rows(rows);
    return rows;
}

inline std::string render_table(std::vector<ReportRow> rows)
{
    sort_rows(rows);
    std::string s;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-6s %-9s %6s %6s %8s %20s %20s\n", "case", "arch", "N", "N*", "params",
                  "err_clean", "err_noisy");
    s += buf;
    for (const auto& r : rows) {
        char clean[40], noisy[40];
        std::snprintf(clean, sizeof clean, "%.3f +- %.3f%%", 100 * r.clean_mean, 100 * r.clean_std);
        std::snprintf(noisy, sizeof noisy, "%.3f +- %.3f%%", 100 * r.noisy_mean, 100 * r.noisy_std);
        std::snprintf(buf, sizeof buf, "%-6d %-9s %6zu %6zu %8zu %20s %20s\n", r.case_id, to_string(r.arch).c_str(),
                      r.n_train, r.n_test, r.params, clean, noisy);
        s += buf;
    }
    return s;
}

inline io::Json rows_to_json(std::vector<ReportRow> rows)
{
    sort_rows(rows);
    io::Json j = io::Json::array();
    for (const auto& r : rows) j.push_back(r.to_json());
    return j;
}

inline std::vector<ReportRow> rows_from_json(const io::Json& j)
{
    require(j.is_array(), ErrorKind::format, "report JSON must be an array");
    std::vector<ReportRow> rows;
    for (const auto& r : j) rows.push_back(ReportRow::from_json(r));
    return rows;
}

/// Writes report.txt and report.json at the top of the output directory.
inline std::vector<ReportRow> cmd_report(const fs::path& out)
{
    auto rows = collect_rows(out);
    io::write_file(out / "report.txt", render_table(rows));
    write_json(out / "report.json", rows_to_json(rows));
    return rows;
}

// ------------------------------------------------------------------ run-case

/// Whole pipeline for one case and architecture. Returns the report row;
/// simulation failures abort before training.
inline ReportRow run_case(int case_id, InputMode arch, const RunConfig& c, const fs::path& out)
{
    cmd_generate(case_id, c, out);
    const auto sim = cmd_simulate(case_id, c, out);
    if (!sim.failures.empty())
        fail(ErrorKind::numerical, std::to_string(sim.failures.size()) + " profile(s) failed to simulate; first: " +
                                       sim.failures.front().id + ": " + sim.failures.front().error);
    cmd_build_dataset(case_id, arch, c, out);
    cmd_train(case_id, arch, c, out);
    auto row = cmd_evaluate(case_id, arch, c, out);
    cmd_report(out);
    return row;
}

} // namespace taa
