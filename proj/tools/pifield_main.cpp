// Command-line pipeline: synthesize views, sample training points, train the
// implicit fields, extract and texture iso-surfaces, evaluate, and rerun the
// sampling ablation. Exit code 0 only when the command's postconditions hold;
// failures emit machine-readable JSON on stderr.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "pifield/pifield.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out;
    std::string fixture;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int views = 0;
    int grid = 0;
    std::string preset;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "pipeline config JSON");
    cmd->add_option("--out", flags.out, "output directory (overrides config)");
    cmd->add_option("--seed", flags.seed, "root seed (overrides config)")
        ->each([&](const std::string&) { flags.seed_set = true; });
    cmd->add_option("--views", flags.views, "yaw sweep size (overrides config)");
    cmd->add_option("--grid", flags.grid, "extraction resolution (overrides config)");
    cmd->add_option("--preset", flags.preset, "mlp preset: desk|paper (overrides config)");
}

pifield::PipelineConfig resolve(const CommonFlags& flags) {
    pifield::PipelineConfig cfg;
    if (!flags.config_path.empty()) cfg = pifield::load_config(flags.config_path);
    if (!flags.out.empty()) cfg.out = flags.out;
    if (flags.seed_set) cfg.seed = flags.seed;
    if (flags.views > 0) cfg.views = flags.views;
    if (flags.grid > 0) cfg.grid = flags.grid;
    if (!flags.preset.empty()) cfg.preset = flags.preset;
    cfg.validate();
    return cfg;
}

void print_eval(const pifield::EvalReport& rep) {
    std::printf("%-12s %12s\n", "metric", "value");
    std::printf("%-12s %12.6f\n", "p2s_cm", rep.p2s_cm);
    std::printf("%-12s %12.6f\n", "chamfer_cm", rep.chamfer_cm);
    std::printf("%-12s %12.6f\n", "normal_l2", rep.normal_l2);
    if (rep.iou) std::printf("%-12s %12.6f\n", "iou", *rep.iou);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pixel-aligned implicit field pipeline"};
    app.require_subcommand(1);

    CommonFlags flags;
    auto* synth = app.add_subcommand("synth", "render yaw-sweep views of a mesh");
    auto* sample = app.add_subcommand("sample", "generate labeled training points");
    auto* train = app.add_subcommand("train", "train surface/texture/multiview fields");
    auto* reconstruct =
        app.add_subcommand("reconstruct", "extract the 0.5 iso-surface from a checkpoint");
    auto* texture = app.add_subcommand("texture", "color a reconstruction with the texture field");
    auto* eval = app.add_subcommand("eval", "evaluate a reconstruction against ground truth");
    auto* ablation = app.add_subcommand("ablation", "rerun the sampling-scheme comparison");
    auto* fixture = app.add_subcommand("fixture", "write a procedural fixture mesh as OBJ");
    for (auto* cmd : {synth, sample, train, reconstruct, texture, eval, ablation})
        add_common(cmd, flags);
    std::string fixture_name = "sphere", fixture_path = "fixture.obj";
    fixture->add_option("--name", fixture_name,
                        "sphere|unit-sphere|torus|capsule|two-spheres|two-tone-sphere");
    fixture->add_option("--path", fixture_path, "output OBJ path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (fixture->parsed()) {
            pifield::save_obj(pifield::make_fixture(fixture_name), fixture_path);
            return 0;
        }
        pifield::PipelineConfig cfg = resolve(flags);
        if (synth->parsed()) {
            pifield::cmd_synth(cfg);
        } else if (sample->parsed()) {
            pifield::cmd_sample(cfg);
        } else if (train->parsed()) {
            pifield::TrainReport rep = pifield::cmd_train(cfg);
            std::printf("trained %s: final loss %.6f, checksum %016llx\n",
                        cfg.train_mode.c_str(), rep.epoch_losses.back(),
                        (unsigned long long)rep.param_checksum);
        } else if (reconstruct->parsed()) {
            std::string path = pifield::cmd_reconstruct(cfg);
            std::printf("wrote %s\n", path.c_str());
        } else if (texture->parsed()) {
            std::string path = pifield::cmd_texture(cfg);
            std::printf("wrote %s\n", path.c_str());
        } else if (eval->parsed()) {
            print_eval(pifield::cmd_eval(cfg));
        } else if (ablation->parsed()) {
            auto rows = pifield::cmd_ablation(cfg);
            std::printf("%-16s %10s %10s %12s\n", "scheme", "iou", "p2s_cm", "chamfer_cm");
            for (const auto& r : rows)
                std::printf("%-16s %10.4f %10.4f %12.4f\n", r.scheme.c_str(), r.iou, r.p2s_cm,
                            r.chamfer_cm);
        }
    } catch (const std::exception& e) {
        nlohmann::json err{{"error", e.what()}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
