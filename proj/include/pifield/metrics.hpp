#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "pifield/bvh.hpp"
#include "pifield/extract.hpp"
#include "pifield/mesh.hpp"
#include "pifield/occupancy.hpp"
#include "pifield/render.hpp"
#include "pifield/rng.hpp"

namespace pifield {

struct EvalReport {
    double p2s_cm = 0.0;
    double chamfer_cm = 0.0;
    double normal_l2 = 0.0;
    std::optional<double> iou;
    std::size_t chamfer_samples = 0;
    std::uint64_t seed = 0;
};

// Mean distance from reconstructed-mesh vertices to the ground-truth surface.
inline double p2s(const TriMesh& recon, const Bvh& gt_bvh) {
    if (recon.vertices.empty()) throw Error("p2s: empty reconstruction");
    if (gt_bvh.empty()) throw Error("p2s: empty ground truth");
    std::size_t n = recon.vertices.size();
    // Fixed-size chunks with an ordered merge keep the sum thread-count
    // independent (pairwise-style reduction).
    std::size_t grain = 512;
    std::size_t nchunks = (n + grain - 1) / grain;
    std::vector<double> partial(nchunks, 0.0);
    parallel_chunks(n, grain, [&](std::size_t c, std::size_t b, std::size_t e) {
        double sum = 0.0;
        for (std::size_t i = b; i < e; ++i)
            sum += gt_bvh.closest_point(recon.vertices[i]).distance;
        partial[c] = sum;
    });
    double total = 0.0;
    for (double s : partial) total += s;
    return total / double(n);
}

// Symmetric Chamfer: half the sum of mean sample-to-surface distances in both
// directions, n area-weighted samples per direction, paired seeds.
inline double chamfer(TriMesh& recon, const Bvh& recon_bvh, TriMesh& gt, const Bvh& gt_bvh,
                      std::size_t n_samples = 10000, std::uint64_t seed = 0) {
    if (recon.triangles.empty() || gt.triangles.empty()) throw Error("chamfer: empty mesh");
    auto one_way = [&](TriMesh& from, const Bvh& to, std::uint64_t s) {
        Rng rng(derive_seed(s, "chamfer"));
        auto samples = sample_surface(from, n_samples, rng);
        double sum = 0.0;
        for (const auto& sample : samples) sum += to.closest_point(sample.point).distance;
        return sum / double(n_samples);
    };
    return 0.5 * (one_way(recon, gt_bvh, seed) + one_way(gt, recon_bvh, seed));
}

// L2 normal-reprojection error: both meshes rendered from the same camera,
// mean over the union of masks of the Euclidean norm of the normal
// difference. A pixel covered by only one mesh contributes the full norm of
// the present normal (the other side is the zero vector).
inline double normal_reprojection(TriMesh& recon, TriMesh& gt, const WeakPerspectiveCamera& cam,
                                  const Vec3& light_dir = {0.0, 0.0, -1.0}) {
    RenderOutput ra = rasterize(recon, cam, light_dir, cam.image_width, cam.image_height);
    RenderOutput rb = rasterize(gt, cam, light_dir, cam.image_width, cam.image_height);
    double sum = 0.0;
    std::size_t count = 0;
    for (int y = 0; y < cam.image_height; ++y) {
        for (int x = 0; x < cam.image_width; ++x) {
            bool ma = ra.mask.at(0, y, x) > 0.5;
            bool mb = rb.mask.at(0, y, x) > 0.5;
            if (!ma && !mb) continue;
            Vec3 na{ra.normal.at(0, y, x), ra.normal.at(1, y, x), ra.normal.at(2, y, x)};
            Vec3 nb{rb.normal.at(0, y, x), rb.normal.at(1, y, x), rb.normal.at(2, y, x)};
            sum += norm(na - nb);
            ++count;
        }
    }
    return count > 0 ? sum / double(count) : 0.0;
}

// Lattice IoU of two fields thresholded at 0.5. Defined as 1 when both are
// empty.
inline double occupancy_iou(const ScalarGrid& a, const ScalarGrid& b, double iso = 0.5) {
    if (a.values.size() != b.values.size()) throw Error("occupancy_iou: grid size mismatch");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        bool ia = a.values[i] > iso;
        bool ib = b.values[i] > iso;
        inter += (ia && ib);
        uni += (ia || ib);
    }
    return uni == 0 ? 1.0 : double(inter) / double(uni);
}

// Ground-truth occupancy sampled on the same lattice (for IoU against a
// learned field). Deterministic per-point ray directions.
inline ScalarGrid oracle_grid(const OccupancyOracle& oracle, const Aabb& bounds, int resolution,
                              std::uint64_t seed = 0) {
    ScalarGrid grid(resolution, resolution, resolution, bounds);
    std::uint64_t base = derive_seed(seed, "oracle-grid");
    parallel_chunks(grid.values.size(), 4096, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t idx = b; idx < e; ++idx) {
            int i = int(idx % grid.nx);
            int j = int((idx / grid.nx) % grid.ny);
            int k = int(idx / (std::size_t(grid.nx) * grid.ny));
            Rng rng(derive_seed(base, idx));
            grid.values[idx] = double(oracle.inside_or_winding(grid.lattice_point(i, j, k), rng));
        }
    });
    return grid;
}

inline nlohmann::json eval_report_to_json(const EvalReport& r) {
    nlohmann::json j{
        {"p2s_cm", r.p2s_cm},
        {"chamfer_cm", r.chamfer_cm},
        {"normal_l2", r.normal_l2},
        {"chamfer_samples", r.chamfer_samples},
        {"seed", r.seed},
    };
    if (r.iou) j["iou"] = *r.iou;
    return j;
}

} // namespace pifield
