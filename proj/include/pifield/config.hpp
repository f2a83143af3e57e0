#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "pifield/field.hpp"
#include "pifield/math.hpp"
#include "pifield/sampler.hpp"
#include "pifield/train.hpp"

namespace pifield {

// Pipeline configuration: one JSON document drives every subcommand. The
// schema is strict -- unknown keys are rejected before any work happens.
struct PipelineConfig {
    std::uint64_t seed = 1;
    std::string out = "out";
    std::string mesh;     // input OBJ for synth/sample/train/eval
    int views = 4;        // yaw sweep size for synth
    int train_views = 1;  // how many of the synth views training consumes
    int recon_views = 1;  // how many views inference fuses
    int grid = 128;       // extraction resolution
    std::string preset = "desk"; // desk | paper
    int image_size = 256;
    Vec3 light{0.0, 0.0, -1.0}; // camera-space, toward the light
    int extractor_levels = 4;
    int extractor_proj_dim = 16;
    SamplingConfig sampling;
    TrainConfig train;
    std::string sample_mode = "occupancy"; // occupancy | texture
    std::string train_mode = "surface";    // surface | texture | multiview
    std::string surface_checkpoint;        // prefix
    std::string texture_checkpoint;        // prefix
    std::string recon;                     // reconstructed OBJ (texture/eval input)
    std::string gt;                        // ground-truth OBJ for eval
    bool save_grid = false;
    // Ablation budget (kept small so the five schemes finish on a desk CPU).
    int ablation_epochs = 60;
    std::size_t ablation_points = 2500;
    int ablation_grid = 48;
    std::string ablation_fixture = "sphere";

    void validate() const {
        if (views < 1) throw Error("config: views must be >= 1");
        if (train_views < 1 || recon_views < 1)
            throw Error("config: train_views/recon_views must be >= 1");
        if (grid < 2) throw Error("config: grid must be >= 2");
        if (preset != "desk" && preset != "paper")
            throw Error("config: preset must be 'desk' or 'paper'");
        if (image_size < 8) throw Error("config: image_size too small");
        if (extractor_levels < 1) throw Error("config: extractor levels must be >= 1");
        if (extractor_proj_dim < 0) throw Error("config: extractor proj_dim must be >= 0");
        if (sample_mode != "occupancy" && sample_mode != "texture")
            throw Error("config: sample_mode must be 'occupancy' or 'texture'");
        if (train_mode != "surface" && train_mode != "texture" && train_mode != "multiview")
            throw Error("config: train_mode must be surface|texture|multiview");
        sampling.validate();
        train.validate();
    }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                                const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key()))
            throw Error("config: unknown key '" + it.key() + "' in " + where);
    }
}

template <class T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace detail

inline PipelineConfig config_from_json(const nlohmann::json& j) {
    PipelineConfig cfg;
    detail::reject_unknown_keys(
        j,
        {"seed", "out", "mesh", "views", "train_views", "recon_views", "grid", "preset",
         "image_size", "light", "extractor", "sampling", "train", "sample_mode", "train_mode",
         "surface_checkpoint", "texture_checkpoint", "recon", "gt", "save_grid", "ablation"},
        "top level");
    detail::read_if(j, "seed", cfg.seed);
    detail::read_if(j, "out", cfg.out);
    detail::read_if(j, "mesh", cfg.mesh);
    detail::read_if(j, "views", cfg.views);
    detail::read_if(j, "train_views", cfg.train_views);
    detail::read_if(j, "recon_views", cfg.recon_views);
    detail::read_if(j, "grid", cfg.grid);
    detail::read_if(j, "preset", cfg.preset);
    detail::read_if(j, "image_size", cfg.image_size);
    if (j.contains("light")) {
        auto l = j.at("light");
        cfg.light = normalized({l.at(0).get<double>(), l.at(1).get<double>(),
                                l.at(2).get<double>()});
    }
    if (j.contains("extractor")) {
        const auto& e = j.at("extractor");
        detail::reject_unknown_keys(e, {"levels", "proj_dim"}, "extractor");
        detail::read_if(e, "levels", cfg.extractor_levels);
        detail::read_if(e, "proj_dim", cfg.extractor_proj_dim);
    }
    if (j.contains("sampling")) {
        const auto& s = j.at("sampling");
        detail::reject_unknown_keys(
            s, {"n_points", "sigma_cm", "mix_adaptive", "mix_uniform", "bbox_pad",
                "texture_offset_d_cm"},
            "sampling");
        detail::read_if(s, "n_points", cfg.sampling.n_points);
        detail::read_if(s, "sigma_cm", cfg.sampling.sigma_cm);
        detail::read_if(s, "mix_adaptive", cfg.sampling.mix_adaptive);
        detail::read_if(s, "mix_uniform", cfg.sampling.mix_uniform);
        detail::read_if(s, "bbox_pad", cfg.sampling.bbox_pad);
        detail::read_if(s, "texture_offset_d_cm", cfg.sampling.texture_offset_d_cm);
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        detail::reject_unknown_keys(
            t,
            {"optimizer", "learning_rate", "lr_decay_factor", "lr_decay_epoch", "epochs",
             "points_per_object", "batch_objects", "resample_each_epoch", "finetune_lr",
             "fuse_views"},
            "train");
        if (t.contains("optimizer")) {
            std::string o = t.at("optimizer").get<std::string>();
            if (o == "rmsprop")
                cfg.train.optimizer = OptimizerKind::RmsProp;
            else if (o == "adam")
                cfg.train.optimizer = OptimizerKind::Adam;
            else
                throw Error("config: optimizer must be 'rmsprop' or 'adam'");
        }
        detail::read_if(t, "learning_rate", cfg.train.learning_rate);
        detail::read_if(t, "lr_decay_factor", cfg.train.lr_decay_factor);
        detail::read_if(t, "lr_decay_epoch", cfg.train.lr_decay_epoch);
        detail::read_if(t, "epochs", cfg.train.epochs);
        detail::read_if(t, "points_per_object", cfg.train.points_per_object);
        detail::read_if(t, "batch_objects", cfg.train.batch_objects);
        detail::read_if(t, "resample_each_epoch", cfg.train.resample_each_epoch);
        detail::read_if(t, "finetune_lr", cfg.train.finetune_lr);
        detail::read_if(t, "fuse_views", cfg.train.fuse_views);
    }
    detail::read_if(j, "sample_mode", cfg.sample_mode);
    detail::read_if(j, "train_mode", cfg.train_mode);
    detail::read_if(j, "surface_checkpoint", cfg.surface_checkpoint);
    detail::read_if(j, "texture_checkpoint", cfg.texture_checkpoint);
    detail::read_if(j, "recon", cfg.recon);
    detail::read_if(j, "gt", cfg.gt);
    detail::read_if(j, "save_grid", cfg.save_grid);
    if (j.contains("ablation")) {
        const auto& a = j.at("ablation");
        detail::reject_unknown_keys(a, {"epochs", "points", "grid", "fixture"}, "ablation");
        detail::read_if(a, "epochs", cfg.ablation_epochs);
        detail::read_if(a, "points", cfg.ablation_points);
        detail::read_if(a, "grid", cfg.ablation_grid);
        detail::read_if(a, "fixture", cfg.ablation_fixture);
    }
    cfg.seed = j.contains("seed") ? j.at("seed").get<std::uint64_t>() : cfg.seed;
    cfg.validate();
    return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open config: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("config parse error in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

} // namespace pifield
