#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pifield/config.hpp"
#include "pifield/extract.hpp"
#include "pifield/metrics.hpp"
#include "pifield/render.hpp"
#include "pifield/shapes.hpp"
#include "pifield/tensor_io.hpp"

namespace pifield {

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create directory " + dir + ": " + ec.message());
}

inline std::string view_base(const std::string& dir, int k) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "view_%03d", k);
    return dir + "/" + buf;
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open for write: " + path);
    os << j.dump(2) << "\n";
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("JSON parse error in " + path + ": " + e.what());
    }
    return j;
}

// ---- fixtures ----

// Named procedural shapes at human-ish scale so the sampling sigmas (in cm)
// are meaningful. "unit-sphere" is the radius-1 fixture used by the overfit
// acceptance run.
inline TriMesh make_fixture(const std::string& name) {
    if (name == "sphere") return make_icosphere(50.0, 3);
    if (name == "unit-sphere") return make_icosphere(1.0, 3);
    if (name == "torus") return make_torus(35.0, 15.0, 48, 24);
    if (name == "capsule") return make_capsule(25.0, 30.0, 32, 8);
    if (name == "two-spheres")
        return make_two_spheres(30.0, {-40.0, 0.0, 0.0}, 20.0, {45.0, 0.0, 0.0}, 3);
    if (name == "two-tone-sphere") {
        TriMesh m = make_icosphere(20.0, 3);
        paint_two_tone(m, {1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, {0.0, 0.0, 1.0});
        return m;
    }
    throw Error("unknown fixture '" + name + "'");
}

// ---- checkpoints ----

struct Checkpoint {
    FieldNet net;
    PyramidExtractor extractor;
    Aabb train_bounds;
    int epoch = 0;
};

inline void save_checkpoint(const std::string& prefix, const FieldNet& net,
                            const PyramidExtractor& extractor, const Aabb& train_bounds,
                            int epoch) {
    nlohmann::json j{
        {"mlp_spec", mlp_spec_to_json(net.spec())},
        {"extractor", {{"levels", extractor.levels()},
                       {"proj_dim", extractor.has_projection() ? int(extractor.bias().size()) : 0}}},
        {"bounds",
         {{"min", {train_bounds.min.x, train_bounds.min.y, train_bounds.min.z}},
          {"max", {train_bounds.max.x, train_bounds.max.y, train_bounds.max.z}}}},
        {"epoch", epoch},
    };
    write_json_file(prefix + ".json", j);
    TensorFile params;
    params.dtype = 2;
    params.dims = {std::uint32_t(net.parameter_count())};
    params.data = net.params();
    save_tensor(prefix + "_params.pift", params);
    if (extractor.has_projection()) {
        TensorFile w;
        w.dtype = 2;
        w.dims = {std::uint32_t(extractor.bias().size()), std::uint32_t(extractor.raw_dim())};
        w.data = extractor.weights();
        save_tensor(prefix + "_projw.pift", w);
        TensorFile b;
        b.dtype = 2;
        b.dims = {std::uint32_t(extractor.bias().size())};
        b.data = extractor.bias();
        save_tensor(prefix + "_projb.pift", b);
    }
}

inline Checkpoint load_checkpoint(const std::string& prefix) {
    nlohmann::json j = read_json_file(prefix + ".json");
    Checkpoint ck;
    ck.net = FieldNet(mlp_spec_from_json(j.at("mlp_spec")));
    TensorFile params = load_tensor(prefix + "_params.pift");
    if (params.data.size() != ck.net.parameter_count())
        throw Error("checkpoint " + prefix + ": parameter count mismatch (file " +
                    std::to_string(params.data.size()) + ", spec " +
                    std::to_string(ck.net.parameter_count()) + ")");
    ck.net.params() = params.data;
    int levels = j.at("extractor").at("levels").get<int>();
    int proj_dim = j.at("extractor").at("proj_dim").get<int>();
    ck.extractor = PyramidExtractor(levels, 3, proj_dim);
    if (proj_dim > 0) {
        TensorFile w = load_tensor(prefix + "_projw.pift");
        TensorFile b = load_tensor(prefix + "_projb.pift");
        if (w.dims.size() != 2 || int(w.dims[0]) != proj_dim ||
            int(w.dims[1]) != ck.extractor.raw_dim() || b.data.size() != std::size_t(proj_dim))
            throw Error("checkpoint " + prefix + ": projection shape mismatch");
        ck.extractor.weights() = w.data;
        ck.extractor.bias() = b.data;
    }
    auto& bj = j.at("bounds");
    ck.train_bounds.min = {bj.at("min").at(0).get<double>(), bj.at("min").at(1).get<double>(),
                           bj.at("min").at(2).get<double>()};
    ck.train_bounds.max = {bj.at("max").at(0).get<double>(), bj.at("max").at(1).get<double>(),
                           bj.at("max").at(2).get<double>()};
    ck.epoch = j.at("epoch").get<int>();
    return ck;
}

// ---- synth ----

inline TriMesh load_watertight_mesh(const std::string& path) {
    TriMesh mesh = load_obj(path);
    auto rep = is_watertight(mesh);
    if (!rep.watertight)
        throw Error(path + ": mesh is not watertight (" + std::to_string(rep.boundary_edges) +
                    " boundary, " + std::to_string(rep.nonmanifold_edges) +
                    " non-manifold edges)");
    return mesh;
}

// Renders the yaw sweep and writes per-view images plus camera JSON.
inline void cmd_synth(const PipelineConfig& cfg) {
    if (cfg.mesh.empty()) throw Error("synth: config needs 'mesh'");
    TriMesh mesh = load_watertight_mesh(cfg.mesh);
    ensure_dir(cfg.out);
    WeakPerspectiveCamera base = frame_mesh(mesh, cfg.image_size, cfg.image_size);
    auto cams = yaw_sweep(cfg.views, base);
    for (int k = 0; k < cfg.views; ++k) {
        RenderOutput r = rasterize(mesh, cams[k], cfg.light, cfg.image_size, cfg.image_size);
        std::string base_path = view_base(cfg.out, k);
        write_ppm(r.rgb, base_path + ".ppm");
        write_pfm(r.normal, base_path + "_normal.pfm");
        write_pfm(r.depth, base_path + "_depth.pfm");
        write_pfm(r.mask, base_path + "_mask.pfm");
        write_json_file(base_path + "_cam.json", camera_to_json(cams[k]));
    }
}

// Reads views 0..n-1 written by cmd_synth and builds feature pyramids.
inline std::vector<TrainView> load_train_views(const std::string& dir, int n,
                                               const PyramidExtractor& extractor) {
    std::vector<TrainView> views;
    views.reserve(n);
    for (int k = 0; k < n; ++k) {
        std::string base_path = view_base(dir, k);
        TrainView v;
        v.cam = camera_from_json(read_json_file(base_path + "_cam.json"));
        v.pyramid = extractor.make_pyramid(read_ppm(base_path + ".ppm"));
        views.push_back(std::move(v));
    }
    return views;
}

// ---- sample ----

inline void cmd_sample(const PipelineConfig& cfg) {
    if (cfg.mesh.empty()) throw Error("sample: config needs 'mesh'");
    ensure_dir(cfg.out);
    TriMesh mesh = load_obj(cfg.mesh);
    SamplingConfig scfg = cfg.sampling;
    scfg.seed = derive_seed(cfg.seed, "cmd-sample");
    SampleBatch batch;
    if (cfg.sample_mode == "occupancy") {
        auto rep = is_watertight(mesh);
        if (!rep.watertight) throw Error(cfg.mesh + ": occupancy sampling needs a watertight mesh");
        Bvh bvh(mesh);
        OccupancyOracle oracle(mesh, bvh);
        batch = sample_occupancy(mesh, oracle, scfg);
    } else {
        batch = sample_texture(mesh, scfg);
    }
    TensorFile points;
    points.dtype = 2;
    points.dims = {std::uint32_t(batch.size()), 3};
    points.data.reserve(batch.size() * 3);
    for (const auto& p : batch.points) {
        points.data.push_back(p.x);
        points.data.push_back(p.y);
        points.data.push_back(p.z);
    }
    save_tensor(cfg.out + "/samples_points.pift", points);
    TensorFile labels;
    labels.dtype = 2;
    if (cfg.sample_mode == "occupancy") {
        labels.dims = {std::uint32_t(batch.size()), 1};
        labels.data = batch.occupancy;
    } else {
        labels.dims = {std::uint32_t(batch.size()), 3};
        for (const auto& c : batch.colors) {
            labels.data.push_back(c.x);
            labels.data.push_back(c.y);
            labels.data.push_back(c.z);
        }
        TensorFile sources;
        sources.dtype = 2;
        sources.dims = {std::uint32_t(batch.size()), 3};
        for (const auto& s : batch.source_points) {
            sources.data.push_back(s.x);
            sources.data.push_back(s.y);
            sources.data.push_back(s.z);
        }
        save_tensor(cfg.out + "/samples_sources.pift", sources);
    }
    save_tensor(cfg.out + "/samples_labels.pift", labels);
}

// ---- train ----

inline void write_train_report(const std::string& out_dir, const std::string& mode,
                               const TrainReport& report, std::uint64_t seed) {
    // Per-epoch records are fully deterministic; wall time lives in the
    // separate metadata file so reruns stay byte-identical.
    std::ofstream os(out_dir + "/train_report_" + mode + ".jsonl");
    if (!os) throw Error("cannot write train report in " + out_dir);
    for (std::size_t e = 0; e < report.epoch_losses.size(); ++e) {
        nlohmann::json rec{
            {"epoch", e}, {"loss", report.epoch_losses[e]}, {"lr", report.epoch_lrs[e]}};
        os << rec.dump() << "\n";
    }
    nlohmann::json meta{
        {"wall_seconds", report.wall_seconds},
        {"param_checksum", report.param_checksum},
        {"seed", seed},
        {"epochs", report.epoch_losses.size()},
    };
    write_json_file(out_dir + "/train_meta_" + mode + ".json", meta);
}

inline TrainReport cmd_train(const PipelineConfig& cfg) {
    if (cfg.mesh.empty()) throw Error("train: config needs 'mesh'");
    ensure_dir(cfg.out);
    TriMesh mesh = load_watertight_mesh(cfg.mesh);
    Aabb train_bounds = bounds(mesh).padded(cfg.sampling.bbox_pad);
    bool paper = cfg.preset == "paper";

    TrainConfig tcfg = cfg.train;
    tcfg.seed = derive_seed(cfg.seed, "cmd-train-" + cfg.train_mode);
    SamplingConfig scfg = cfg.sampling;

    TrainReport report;
    if (cfg.train_mode == "surface") {
        PyramidExtractor extractor(cfg.extractor_levels, 3, cfg.extractor_proj_dim);
        extractor.init_projection(derive_seed(cfg.seed, "surface-extractor"));
        FieldNet net(surface_mlp_spec(extractor.feature_dim(), paper));
        net.init_params(derive_seed(cfg.seed, "surface-net"));
        std::vector<TrainObject> objects;
        objects.push_back(make_train_object(
            std::move(mesh), load_train_views(cfg.out, cfg.train_views, extractor)));
        report = train_surface(objects, extractor, net, tcfg, scfg);
        save_checkpoint(cfg.out + "/ckpt_surface", net, extractor, train_bounds, tcfg.epochs);
    } else if (cfg.train_mode == "texture") {
        if (cfg.surface_checkpoint.empty())
            throw Error("train texture: config needs 'surface_checkpoint'");
        if (!mesh.has_colors()) throw Error("train texture: mesh has no vertex colors");
        Checkpoint surface = load_checkpoint(cfg.surface_checkpoint);
        PyramidExtractor extractor_c(cfg.extractor_levels, 3, cfg.extractor_proj_dim);
        extractor_c.init_projection(derive_seed(cfg.seed, "texture-extractor"));
        FieldNet net_c(texture_mlp_spec(extractor_c.feature_dim(),
                                        surface.extractor.feature_dim(), paper));
        net_c.init_params(derive_seed(cfg.seed, "texture-net"));
        tcfg.optimizer = OptimizerKind::Adam;
        std::vector<TrainObject> objects;
        objects.push_back(make_train_object(
            std::move(mesh), load_train_views(cfg.out, cfg.train_views, extractor_c)));
        report = train_texture(objects, extractor_c, surface.extractor, net_c, tcfg, scfg);
        save_checkpoint(cfg.out + "/ckpt_texture", net_c, extractor_c, train_bounds, tcfg.epochs);
    } else { // multiview fine-tune
        if (cfg.surface_checkpoint.empty())
            throw Error("train multiview: config needs 'surface_checkpoint'");
        Checkpoint surface = load_checkpoint(cfg.surface_checkpoint);
        if (cfg.train_views < tcfg.fuse_views)
            throw Error("train multiview: train_views < fuse_views");
        std::vector<TrainObject> objects;
        objects.push_back(make_train_object(
            std::move(mesh), load_train_views(cfg.out, cfg.train_views, surface.extractor)));
        report = finetune_multiview(objects, surface.extractor, surface.net, tcfg, scfg);
        save_checkpoint(cfg.out + "/ckpt_multiview", surface.net, surface.extractor,
                        train_bounds, surface.epoch + tcfg.epochs);
    }
    write_train_report(cfg.out, cfg.train_mode, report, cfg.seed);
    return report;
}

// ---- reconstruct / texture / eval ----

inline std::string cmd_reconstruct(const PipelineConfig& cfg) {
    if (cfg.surface_checkpoint.empty())
        throw Error("reconstruct: config needs 'surface_checkpoint'");
    ensure_dir(cfg.out);
    Checkpoint ck = load_checkpoint(cfg.surface_checkpoint);
    auto views = load_train_views(cfg.out, cfg.recon_views, ck.extractor);
    Aabb box = ck.train_bounds.padded(0.05);
    ScalarGrid grid = evaluate_grid(ck.net, ck.extractor, views, box, cfg.grid);
    TriMesh recon = marching_cubes(grid, 0.5);
    std::string path = cfg.recon.empty() ? cfg.out + "/recon.obj" : cfg.recon;
    save_obj(recon, path);
    if (cfg.save_grid) {
        TensorFile t;
        t.dtype = 2;
        t.dims = {std::uint32_t(grid.nx), std::uint32_t(grid.ny), std::uint32_t(grid.nz)};
        t.data = grid.values;
        save_tensor(cfg.out + "/grid.pift", t);
        write_json_file(cfg.out + "/grid_bounds.json", grid_bounds_to_json(grid));
    }
    return path;
}

inline std::string cmd_texture(const PipelineConfig& cfg) {
    if (cfg.texture_checkpoint.empty() || cfg.surface_checkpoint.empty())
        throw Error("texture: config needs 'texture_checkpoint' and 'surface_checkpoint'");
    std::string recon_path = cfg.recon.empty() ? cfg.out + "/recon.obj" : cfg.recon;
    TriMesh recon = load_obj(recon_path);
    Checkpoint tex = load_checkpoint(cfg.texture_checkpoint);
    Checkpoint surf = load_checkpoint(cfg.surface_checkpoint);
    auto views = load_train_views(cfg.out, cfg.recon_views, tex.extractor);
    texture_vertices(recon, tex.net, tex.extractor, surf.extractor, views);
    std::string path = cfg.out + "/recon_textured.obj";
    save_obj(recon, path);
    return path;
}

inline EvalReport cmd_eval(const PipelineConfig& cfg) {
    std::string gt_path = cfg.gt.empty() ? cfg.mesh : cfg.gt;
    if (gt_path.empty()) throw Error("eval: config needs 'gt' or 'mesh'");
    std::string recon_path = cfg.recon.empty() ? cfg.out + "/recon.obj" : cfg.recon;
    TriMesh recon = load_obj(recon_path);
    TriMesh gt = load_obj(gt_path);
    if (recon.triangles.empty()) throw Error("eval: reconstruction " + recon_path + " is empty");
    Bvh recon_bvh(recon);
    Bvh gt_bvh(gt);
    EvalReport rep;
    rep.seed = derive_seed(cfg.seed, "cmd-eval");
    rep.chamfer_samples = 10000;
    rep.p2s_cm = p2s(recon, gt_bvh);
    rep.chamfer_cm = chamfer(recon, recon_bvh, gt, gt_bvh, rep.chamfer_samples, rep.seed);
    WeakPerspectiveCamera cam;
    std::string cam_path = view_base(cfg.out, 0) + "_cam.json";
    if (std::filesystem::exists(cam_path))
        cam = camera_from_json(read_json_file(cam_path));
    else
        cam = frame_mesh(gt, cfg.image_size, cfg.image_size);
    rep.normal_l2 = normal_reprojection(recon, gt, cam, cfg.light);
    if (!cfg.surface_checkpoint.empty()) {
        Checkpoint ck = load_checkpoint(cfg.surface_checkpoint);
        auto views = load_train_views(cfg.out, cfg.recon_views, ck.extractor);
        auto rep_wt = is_watertight(gt);
        if (rep_wt.watertight) {
            ScalarGrid net_grid =
                evaluate_grid(ck.net, ck.extractor, views, ck.train_bounds, cfg.grid);
            OccupancyOracle oracle(gt, gt_bvh);
            ScalarGrid gt_grid =
                oracle_grid(oracle, ck.train_bounds, cfg.grid, derive_seed(cfg.seed, "eval-iou"));
            rep.iou = occupancy_iou(net_grid, gt_grid);
        }
    }
    ensure_dir(cfg.out);
    write_json_file(cfg.out + "/eval.json", eval_report_to_json(rep));
    return rep;
}

// ---- ablation ----

struct AblationRow {
    std::string scheme;
    double iou = 0.0;
    double p2s_cm = 0.0;
    double chamfer_cm = 0.0;
};

// Trains one surface model per sampling scheme with identical seeds, budgets,
// and initialization, then scores each against the fixture oracle.
inline std::vector<AblationRow> cmd_ablation(const PipelineConfig& cfg) {
    ensure_dir(cfg.out);
    struct Scheme {
        const char* name;
        double sigma;
        int mix_adaptive, mix_uniform;
    };
    const Scheme schemes[] = {
        {"uniform", 5.0, 0, 1},          {"sigma3", 3.0, 1, 0},  {"sigma5", 5.0, 1, 0},
        {"sigma15", 15.0, 1, 0},         {"sigma5+uniform", 5.0, 16, 1},
    };

    std::vector<std::string> fixtures;
    if (cfg.ablation_fixture == "both") {
        fixtures = {"sphere", "torus"};
    } else {
        fixtures = {cfg.ablation_fixture};
    }

    // Shared per-fixture data: mesh, oracle grid, one rendered view.
    struct FixtureData {
        std::shared_ptr<TriMesh> mesh;
        std::shared_ptr<Bvh> bvh;
        Aabb train_bounds;
        ScalarGrid gt_grid;
        std::vector<WeakPerspectiveCamera> cams;
        FeatureImage rgb;
    };
    std::vector<FixtureData> fixture_data;
    for (const auto& fname : fixtures) {
        FixtureData fd;
        fd.mesh = std::make_shared<TriMesh>(make_fixture(fname));
        require_normals(*fd.mesh);
        fd.bvh = std::make_shared<Bvh>(*fd.mesh);
        fd.train_bounds = bounds(*fd.mesh).padded(cfg.sampling.bbox_pad);
        WeakPerspectiveCamera base = frame_mesh(*fd.mesh, cfg.image_size, cfg.image_size);
        fd.cams = yaw_sweep(1, base);
        RenderOutput r =
            rasterize(*fd.mesh, fd.cams[0], cfg.light, cfg.image_size, cfg.image_size);
        fd.rgb = r.rgb;
        OccupancyOracle oracle(*fd.mesh, *fd.bvh);
        fd.gt_grid = oracle_grid(oracle, fd.train_bounds, cfg.ablation_grid,
                                 derive_seed(cfg.seed, "ablation-gt"));
        fixture_data.push_back(std::move(fd));
    }

    std::vector<AblationRow> rows;
    for (const auto& scheme : schemes) {
        AblationRow row;
        row.scheme = scheme.name;
        double iou_sum = 0.0, p2s_sum = 0.0, chamfer_sum = 0.0;
        for (std::size_t f = 0; f < fixture_data.size(); ++f) {
            auto& fd = fixture_data[f];
            PyramidExtractor extractor(cfg.extractor_levels, 3, cfg.extractor_proj_dim);
            extractor.init_projection(derive_seed(cfg.seed, "ablation-extractor"));
            FieldNet net(surface_mlp_spec(extractor.feature_dim(), false));
            net.init_params(derive_seed(cfg.seed, "ablation-net"));

            std::vector<TrainObject> objects(1);
            objects[0].mesh = fd.mesh;
            objects[0].bvh = fd.bvh;
            TrainView view;
            view.cam = fd.cams[0];
            view.pyramid = extractor.make_pyramid(fd.rgb);
            objects[0].views.push_back(std::move(view));

            TrainConfig tcfg = cfg.train;
            tcfg.epochs = cfg.ablation_epochs;
            tcfg.points_per_object = cfg.ablation_points;
            tcfg.lr_decay_epoch = std::max(1, cfg.ablation_epochs * 5 / 6);
            tcfg.seed = derive_seed(cfg.seed, "ablation-train", f);
            SamplingConfig scfg = cfg.sampling;
            scfg.sigma_cm = scheme.sigma;
            scfg.mix_adaptive = scheme.mix_adaptive;
            scfg.mix_uniform = scheme.mix_uniform;

            TrainReport report = train_surface(objects, extractor, net, tcfg, scfg);
            save_checkpoint(cfg.out + "/ckpt_ablation_" + fixtures[f] + "_" + scheme.name, net,
                            extractor, fd.train_bounds, tcfg.epochs);

            ScalarGrid net_grid = evaluate_grid(net, extractor, objects[0].views,
                                                fd.train_bounds, cfg.ablation_grid);
            iou_sum += occupancy_iou(net_grid, fd.gt_grid);
            TriMesh recon = marching_cubes(net_grid, 0.5);
            if (recon.triangles.empty()) {
                p2s_sum += std::numeric_limits<double>::infinity();
                chamfer_sum += std::numeric_limits<double>::infinity();
            } else {
                Bvh recon_bvh(recon);
                p2s_sum += p2s(recon, *fd.bvh);
                chamfer_sum += chamfer(recon, recon_bvh, *fd.mesh, *fd.bvh, 10000,
                                       derive_seed(cfg.seed, "ablation-chamfer"));
            }
        }
        double inv = 1.0 / double(fixture_data.size());
        row.iou = iou_sum * inv;
        row.p2s_cm = p2s_sum * inv;
        row.chamfer_cm = chamfer_sum * inv;
        rows.push_back(row);
    }

    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows)
        j.push_back({{"scheme", r.scheme},
                     {"iou", r.iou},
                     {"p2s_cm", r.p2s_cm},
                     {"chamfer_cm", r.chamfer_cm}});
    write_json_file(cfg.out + "/ablation.json", j);

    std::ofstream os(cfg.out + "/ablation.txt");
    if (!os) throw Error("cannot write ablation table");
    char line[128];
    std::snprintf(line, sizeof(line), "%-16s %10s %10s %12s\n", "scheme", "iou", "p2s_cm",
                  "chamfer_cm");
    os << line;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%-16s %10.4f %10.4f %12.4f\n", r.scheme.c_str(),
                      r.iou, r.p2s_cm, r.chamfer_cm);
        os << line;
    }
    return rows;
}

} // namespace pifield
