#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "pifield/mesh.hpp"
#include "pifield/occupancy.hpp"
#include "pifield/parallel.hpp"
#include "pifield/rng.hpp"

namespace pifield {

// Training-point generator settings. Defaults follow the training recipe:
// sigma = 5 cm, adaptive:uniform = 16:1, texture offset d = 1 cm.
struct SamplingConfig {
    std::size_t n_points = 5000;
    double sigma_cm = 5.0;
    int mix_adaptive = 16;
    int mix_uniform = 1;
    double bbox_pad = 0.1;
    double texture_offset_d_cm = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_points == 0) throw Error("sampling: n_points must be > 0");
        if (sigma_cm <= 0.0) throw Error("sampling: sigma_cm must be > 0");
        if (mix_adaptive < 0 || mix_uniform < 0 || mix_adaptive + mix_uniform <= 0)
            throw Error("sampling: mix ratio components must be non-negative, sum positive");
        if (bbox_pad < 0.0) throw Error("sampling: bbox_pad must be >= 0");
        if (texture_offset_d_cm <= 0.0) throw Error("sampling: texture offset must be > 0");
    }
};

// Labeled 3D points. Occupancy batches carry one scalar per point; texture
// batches carry RGB plus the on-surface source point whose color labels the
// offset query point.
struct SampleBatch {
    std::vector<Vec3> points;
    std::vector<double> occupancy;     // occupancy mode
    std::vector<Vec3> colors;          // texture mode
    std::vector<Vec3> source_points;   // texture mode
    std::size_t size() const { return points.size(); }
};

// Deterministic adaptive split: round(n * a / (a + u)) adaptive, rest uniform.
inline std::size_t adaptive_count(std::size_t n, int mix_adaptive, int mix_uniform) {
    double frac = double(mix_adaptive) / double(mix_adaptive + mix_uniform);
    return std::size_t(std::llround(double(n) * frac));
}

// Mixed occupancy sampling: adaptive points are surface samples perturbed by
// independent per-axis N(0, sigma) offsets; uniform points fill the padded
// bounding box. Every point is labeled by the parity oracle (winding-number
// fallback on degenerate queries). Point i draws from its own derived stream,
// so batches are bit-identical for a given config regardless of thread count.
inline SampleBatch sample_occupancy(TriMesh& mesh, const OccupancyOracle& oracle,
                                    const SamplingConfig& cfg) {
    cfg.validate();
    require_normals(mesh);
    AreaTable table(mesh);
    Aabb box = bounds(mesh).padded(cfg.bbox_pad);
    std::size_t n_adaptive = adaptive_count(cfg.n_points, cfg.mix_adaptive, cfg.mix_uniform);

    SampleBatch batch;
    batch.points.resize(cfg.n_points);
    batch.occupancy.resize(cfg.n_points);
    std::uint64_t point_seed = derive_seed(cfg.seed, "occupancy-points");
    std::uint64_t label_seed = derive_seed(cfg.seed, "occupancy-labels");
    parallel_for(cfg.n_points, [&](std::size_t i) {
        Rng rng(derive_seed(point_seed, i));
        Vec3 p;
        if (i < n_adaptive) {
            SurfaceSample s = sample_surface_one(mesh, table, rng);
            p = s.point + Vec3{rng.normal(0.0, cfg.sigma_cm), rng.normal(0.0, cfg.sigma_cm),
                               rng.normal(0.0, cfg.sigma_cm)};
        } else {
            p = {rng.uniform(box.min.x, box.max.x), rng.uniform(box.min.y, box.max.y),
                 rng.uniform(box.min.z, box.max.z)};
        }
        batch.points[i] = p;
        Rng label_rng(derive_seed(label_seed, i));
        batch.occupancy[i] = double(oracle.inside_or_winding(p, label_rng));
    });
    return batch;
}

// Texture sampling: on-surface points with barycentric-interpolated colors,
// queried at X' = X + eps * N with scalar eps ~ N(0, d) along the normal.
inline SampleBatch sample_texture(TriMesh& mesh, const SamplingConfig& cfg) {
    cfg.validate();
    if (!mesh.has_colors()) throw Error("sample_texture: mesh has no vertex colors");
    require_normals(mesh);
    AreaTable table(mesh);

    SampleBatch batch;
    batch.points.resize(cfg.n_points);
    batch.colors.resize(cfg.n_points);
    batch.source_points.resize(cfg.n_points);
    std::uint64_t point_seed = derive_seed(cfg.seed, "texture-points");
    parallel_for(cfg.n_points, [&](std::size_t i) {
        Rng rng(derive_seed(point_seed, i));
        SurfaceSample s = sample_surface_one(mesh, table, rng);
        const auto& tri = mesh.triangles[s.triangle];
        Vec3 color = mesh.vertex_colors[tri[0]] * s.bary.x +
                     mesh.vertex_colors[tri[1]] * s.bary.y +
                     mesh.vertex_colors[tri[2]] * s.bary.z;
        double eps = rng.normal(0.0, cfg.texture_offset_d_cm);
        batch.source_points[i] = s.point;
        batch.points[i] = s.point + s.normal * eps;
        batch.colors[i] = color;
    });
    return batch;
}

} // namespace pifield
