// Quickstart: analytic elastin insults -> G&R maps -> small 9-sensor
// DeepONet that recovers the insult field from the maps.
//
//   ./build/samples/quickstart [out_dir]

#include <cstdio>
#include <numbers>

#include "taa/deeponet/train.hpp"
#include "taa/insult/analytic.hpp"
#include "taa/vessel/simulate.hpp"

using namespace taa;

int main(int argc, char** argv)
{
    const std::filesystem::path out = argc > 1 ? argv[1] : "quickstart_out";
    std::filesystem::create_directories(out);

    const CylindricalGrid grid;  // 21 × 20 nodes over 15 mm
    const MaterialParams mat;
    const auto homeo = homeostatic_state(mat);
    const auto scenario = PressureScenario::make(ScenarioLabel::normotensive, homeo.pressure);
    std::printf("homeostatic pressure %.3f kPa (%.1f mmHg)\n", homeo.pressure, homeo.pressure / kpa_per_mmhg);

    // 3 axial apexes × 4 circumferential apexes × 5 severities
    std::vector<FieldMaps> maps;
    std::vector<InsultProfile> profiles;
    std::vector<SampleMeta> meta;
    for (double z_apex : {6.0, 7.5, 9.0})
        for (int k = 0; k < 4; ++k)
            for (double sev : severity_levels(InsultKind::elastic_fiber, ScenarioLabel::normotensive)) {
                AnalyticInsultParams p;
                p.z_apex = z_apex;
                p.theta_apex = k * std::numbers::pi / 2;
                p.theta_width = 100.0 * std::numbers::pi / 180.0;
                profiles.push_back(evaluate_analytic(grid, p, InsultKind::elastic_fiber, sev));
                maps.push_back(simulate(profiles.back(), scenario, mat));
                SampleMeta m;
                m.id = "q" + std::to_string(meta.size());
                meta.push_back(m);
            }
    const auto& worst = maps.back();
    std::printf("%zu maps; most severe: max Lambda_D %.3f, min distensibility %.4f\n", maps.size(),
                *std::max_element(worst.lambda_d.begin(), worst.lambda_d.end()),
                *std::min_element(worst.distensibility.begin(), worst.distensibility.end()));
    write_pgm(out / "lambda_d.pgm", to_grayscale(worst.lambda_d, grid));

    const Dataset d = build_dataset(maps, profiles, meta, InputMode::sensor9, LocationEncoding::trig, 0.2, 7);
    ArchConfig arch;
    arch.q = 32;
    arch.fnn_depth = 3;
    arch.fnn_width = 32;
    TrainConfig cfg;
    cfg.adam_iters = 1500;
    cfg.lbfgs_iters = 300;
    cfg.seed = 7;

    DeepONet model = DeepONet::make(d.mode, d.grid, d.location, arch);
    const auto r = train(model, d, cfg);
    const auto err = relative_errors(model, d, d.test);
    std::printf("%zu parameters, loss %.3g -> %.3g in %.1f s; test relative L2 error %.1f%% over %zu samples\n",
                model.num_params(), r.initial_loss, r.final_loss, r.seconds, 100.0 * mean_of(err), err.size());
    write_checkpoint(out / "sensor9.ckpt", model);
    std::printf("wrote %s\n", (out / "lambda_d.pgm").c_str());
    return 0;
}
