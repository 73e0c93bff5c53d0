// taa: command-line driver for the insult -> maps -> DeepONet pipeline.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "taa/harness/pipeline.hpp"

using namespace taa;

namespace {

struct Options {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<double> noise;
    std::optional<std::size_t> trials;
    std::optional<unsigned> jobs;
    int case_id = 0;  // 0 = per-command default
    std::string arch = "image";
    std::vector<std::string> overrides;
    bool verbose = false;
};

RunConfig load_config(const Options& o)
{
    RunConfig c = o.config.empty() ? RunConfig{} : RunConfig::load(o.config);
    for (const auto& kv : o.overrides) {
        const auto eq = kv.find('=');
        require(eq != std::string::npos, ErrorKind::config, "--set expects key=value, got '" + kv + "'");
        c.set(kv.substr(0, eq), kv.substr(eq + 1), "--set");
    }
    if (o.seed) c.set("seed", std::to_string(*o.seed), "--seed");
    if (o.noise) c.set("eval.noise", std::to_string(*o.noise), "--noise");
    if (o.trials) c.set("train.trials", std::to_string(*o.trials), "--trials");
    if (o.jobs) c.set("jobs", std::to_string(*o.jobs), "--jobs");
    return c;
}

InputMode arch_of(const Options& o)
{
    try {
        return input_mode_from_string(o.arch);
    } catch (const Error& e) {
        fail(ErrorKind::config, e.what());
    }
}

int case_of(const Options& o, int fallback)
{
    const int id = o.case_id ? o.case_id : fallback;
    case_spec(id);  // validates
    return id;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Synthetic TAA insult data generation and DeepONet inverse surrogates"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* s, bool with_arch) {
        s->add_option("--config", o.config, "key = value configuration file")->check(CLI::ExistingFile);
        s->add_option("--out", o.out, "output directory")->capture_default_str();
        s->add_option("--seed", o.seed, "master seed");
        s->add_option("--jobs", o.jobs, "worker threads (0 = all cores)");
        s->add_option("--case", o.case_id, "experiment case 1..6");
        s->add_option("--set", o.overrides, "override a config key (key=value), repeatable");
        s->add_flag("-v,--verbose", o.verbose, "debug logging");
        if (with_arch) {
            s->add_option("--arch", o.arch, "sensor25 | sensor9 | image")
                ->check(CLI::IsMember({"sensor25", "sensor9", "image"}))
                ->capture_default_str();
            s->add_option("--trials", o.trials, "independent training trials");
            s->add_option("--noise", o.noise, "relative Gaussian noise on test inputs");
        }
    };

    auto* gen_a = app.add_subcommand("gen-analytic", "write the analytic insult profiles of a case");
    auto* gen_r = app.add_subcommand("gen-random", "write the random insult profiles of a case");
    auto* sim = app.add_subcommand("simulate", "forward-simulate the profiles of a case into field maps");
    auto* build = app.add_subcommand("build-dataset", "turn field maps into a DeepONet dataset");
    auto* tr = app.add_subcommand("train", "train every trial and write checkpoints");
    auto* ev = app.add_subcommand("evaluate", "score checkpoints on the test split and write a report row");
    auto* run = app.add_subcommand("run-case", "generate, simulate, build, train and evaluate one case");
    auto* rep = app.add_subcommand("report", "collect report rows into report.txt and report.json");
    auto* cfg = app.add_subcommand("config", "print the effective configuration");
    for (auto* s : {gen_a, gen_r, sim, cfg}) common(s, false);
    for (auto* s : {build, tr, ev, run}) common(s, true);
    rep->add_option("--out", o.out, "output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    if (o.verbose) log::set_level(log::Level::debug);

    try {
        const fs::path out = o.out;
        if (rep->parsed()) {
            std::cout << render_table(cmd_report(out));
            return 0;
        }
        const RunConfig c = load_config(o);
        if (cfg->parsed()) {
            std::cout << c.canonical() << "# hash " << c.hash() << "\n";
        } else if (gen_a->parsed()) {
            const int id = case_of(o, 1);
            require(!case_spec(id).random, ErrorKind::config, "case " + std::to_string(id) + " is a random case");
            const auto r = cmd_generate(id, c, out);
            std::printf("%zu profiles (%zu shapes per kind and scenario)\n", r.count, r.shapes);
        } else if (gen_r->parsed()) {
            const int id = case_of(o, 6);
            require(case_spec(id).random, ErrorKind::config, "case " + std::to_string(id) + " is an analytic case");
            std::printf("%zu profiles\n", cmd_generate(id, c, out).count);
        } else if (sim->parsed()) {
            const auto r = cmd_simulate(case_of(o, 1), c, out);
            std::printf("%zu maps written, %zu failed\n", r.written, r.failures.size());
            for (const auto& f : r.failures) std::fprintf(stderr, "failed %s: %s\n", f.id.c_str(), f.error.c_str());
            if (!r.failures.empty()) return exit_code(ErrorKind::numerical);
        } else if (build->parsed()) {
            const auto d = cmd_build_dataset(case_of(o, 1), arch_of(o), c, out);
            std::printf("%zu train, %zu test\n", d.train.size(), d.test.size());
        } else if (tr->parsed()) {
            cmd_train(case_of(o, 1), arch_of(o), c, out);
        } else if (ev->parsed()) {
            std::cout << render_table({cmd_evaluate(case_of(o, 1), arch_of(o), c, out)});
        } else if (run->parsed()) {
            std::cout << render_table({run_case(case_of(o, 1), arch_of(o), c, out)});
        }
        return 0;
    } catch (const Error& e) {
        std::fprintf(stderr, "taa: %s\n", e.what());
        return exit_code(e.kind());
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "taa: io error: %s\n", e.what());
        return exit_code(ErrorKind::io);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "taa: %s\n", e.what());
        return exit_code(ErrorKind::numerical);
    }
}
