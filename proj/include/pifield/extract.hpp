#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "pifield/featext.hpp"
#include "pifield/field.hpp"
#include "pifield/math.hpp"
#include "pifield/mc_tables.hpp"
#include "pifield/mesh.hpp"
#include "pifield/parallel.hpp"
#include "pifield/train.hpp"

namespace pifield {

// Dense field samples on a corner lattice: point (i,j,k) sits at
// bounds.min + (i,j,k) * extent / (res - 1).
struct ScalarGrid {
    int nx = 0, ny = 0, nz = 0;
    Aabb bounds;
    std::vector<double> values; // x-fastest: [(k*ny + j)*nx + i]

    ScalarGrid() = default;
    ScalarGrid(int nx_, int ny_, int nz_, const Aabb& b)
        : nx(nx_), ny(ny_), nz(nz_), bounds(b),
          values(std::size_t(nx_) * ny_ * nz_, 0.0) {
        if (nx < 2 || ny < 2 || nz < 2) throw Error("scalar grid: resolution must be >= 2");
    }

    std::size_t index(int i, int j, int k) const {
        return (std::size_t(k) * ny + j) * nx + i;
    }
    double at(int i, int j, int k) const { return values[index(i, j, k)]; }
    double& at(int i, int j, int k) { return values[index(i, j, k)]; }

    Vec3 lattice_point(int i, int j, int k) const {
        Vec3 ext = bounds.extent();
        return {bounds.min.x + ext.x * i / (nx - 1), bounds.min.y + ext.y * j / (ny - 1),
                bounds.min.z + ext.z * k / (nz - 1)};
    }

    Vec3 cell_size() const {
        Vec3 ext = bounds.extent();
        return {ext.x / (nx - 1), ext.y / (ny - 1), ext.z / (nz - 1)};
    }
};

// Evaluates the surface field on a lattice; fuses embeddings when more than
// one view is given. Parallel over lattice points (disjoint writes).
inline ScalarGrid evaluate_grid(const FieldNet& net, const PyramidExtractor& extractor,
                                const std::vector<TrainView>& views, const Aabb& bounds,
                                int resolution) {
    if (views.empty()) throw Error("evaluate_grid: no views");
    ScalarGrid grid(resolution, resolution, resolution, bounds);
    std::size_t total = grid.values.size();
    bool fused = views.size() > 1;
    int feat_dim = extractor.feature_dim();
    int input_dim = net.spec().input_dim;
    parallel_chunks(total, 4096, [&](std::size_t, std::size_t b, std::size_t e) {
        Workspace ws;
        std::vector<Workspace> view_ws;
        Workspace tail_ws;
        std::vector<double> raw(extractor.raw_dim()), feat(feat_dim);
        std::vector<std::vector<double>> inputs(views.size(),
                                                std::vector<double>(input_dim));
        for (std::size_t idx = b; idx < e; ++idx) {
            int i = int(idx % grid.nx);
            int j = int((idx / grid.nx) % grid.ny);
            int k = int(idx / (std::size_t(grid.nx) * grid.ny));
            Vec3 x = grid.lattice_point(i, j, k);
            if (!fused) {
                Projection pr = project(views[0].cam, x);
                extractor.extract(views[0].pyramid, pr.pixel, raw.data(), feat.data());
                grid.values[idx] = net.forward(feat, pr.depth, ws)[0];
            } else {
                for (std::size_t v = 0; v < views.size(); ++v) {
                    Projection pr = project(views[v].cam, x);
                    extractor.extract(views[v].pyramid, pr.pixel, raw.data(),
                                      inputs[v].data());
                    inputs[v][feat_dim] = pr.depth;
                }
                grid.values[idx] = net.fuse_forward(inputs, view_ws, tail_ws)[0];
            }
        }
    });
    return grid;
}

// Standard marching cubes at the given iso level. Edge vertices are placed by
// linear interpolation (midpoint when both corners sit exactly on the iso);
// shared-edge vertices are welded through canonical lattice-edge keys, and
// triangles are oriented with normals pointing toward lower field values.
// The 256-case table handles ambiguous cases without an asymptotic decider,
// which is adequate for 0.5-level occupancy fields.
inline TriMesh marching_cubes(const ScalarGrid& grid, double iso = 0.5) {
    using namespace detail;
    // Corner c of cell (i,j,k) offsets per the classic table convention:
    // 0..3 ring the bottom face, 4..7 the top.
    static constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                          {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
    TriMesh mesh;
    std::unordered_map<std::uint64_t, int> edge_vertex;
    double corner_val[8];
    std::size_t corner_idx[8];
    int edge_out[12];

    auto lattice_index = [&](int i, int j, int k) { return grid.index(i, j, k); };
    // Canonical edge key: lattice point id * 3 + axis of the +1 step.
    auto edge_key = [&](std::size_t point_idx, int axis) {
        return std::uint64_t(point_idx) * 3 + std::uint64_t(axis);
    };

    for (int k = 0; k + 1 < grid.nz; ++k) {
        for (int j = 0; j + 1 < grid.ny; ++j) {
            for (int i = 0; i + 1 < grid.nx; ++i) {
                int cube = 0;
                for (int c = 0; c < 8; ++c) {
                    int ci = i + kCorner[c][0], cj = j + kCorner[c][1], ck = k + kCorner[c][2];
                    corner_idx[c] = lattice_index(ci, cj, ck);
                    corner_val[c] = grid.values[corner_idx[c]];
                    if (corner_val[c] < iso) cube |= (1 << c);
                }
                std::uint16_t mask = kMcEdgeMask[cube];
                if (mask == 0) continue;
                for (int eidx = 0; eidx < 12; ++eidx) {
                    if (!(mask & (1 << eidx))) continue;
                    int ca = kMcEdgeCorners[eidx][0], cb = kMcEdgeCorners[eidx][1];
                    // Orient the edge along the +axis lattice direction.
                    int a = ca, b = cb;
                    int axis = 0;
                    for (int d = 0; d < 3; ++d) {
                        if (kCorner[ca][d] != kCorner[cb][d]) {
                            axis = d;
                            if (kCorner[ca][d] > kCorner[cb][d]) std::swap(a, b);
                            break;
                        }
                    }
                    std::uint64_t key = edge_key(corner_idx[a], axis);
                    auto it = edge_vertex.find(key);
                    if (it == edge_vertex.end()) {
                        double va = corner_val[a], vb = corner_val[b];
                        double t = (va == vb) ? 0.5 : (iso - va) / (vb - va);
                        t = std::clamp(t, 0.0, 1.0);
                        Vec3 pa = grid.lattice_point(i + kCorner[a][0], j + kCorner[a][1],
                                                     k + kCorner[a][2]);
                        Vec3 pb = grid.lattice_point(i + kCorner[b][0], j + kCorner[b][1],
                                                     k + kCorner[b][2]);
                        int vid = int(mesh.vertices.size());
                        mesh.vertices.push_back(pa + (pb - pa) * t);
                        it = edge_vertex.emplace(key, vid).first;
                    }
                    edge_out[eidx] = it->second;
                }
                const auto& tris = kMcTriangles[cube];
                for (int t = 0; tris[t] >= 0; t += 3) {
                    // Table order already orients normals toward the
                    // below-iso side (outside for occupancy fields).
                    mesh.triangles.push_back(
                        {edge_out[tris[t]], edge_out[tris[t + 1]], edge_out[tris[t + 2]]});
                }
            }
        }
    }
    return mesh;
}

// Colors every vertex by the texture field (multi-view fused when more than
// one view is given); output clamped to [0,1].
inline void texture_vertices(TriMesh& mesh, const FieldNet& net_c,
                             const PyramidExtractor& extractor_c,
                             const PyramidExtractor& extractor_v,
                             const std::vector<TrainView>& views) {
    if (views.empty()) throw Error("texture_vertices: no views");
    mesh.vertex_colors.resize(mesh.vertices.size());
    int fc = extractor_c.feature_dim();
    int fv = extractor_v.feature_dim();
    int input_dim = net_c.spec().input_dim;
    bool fused = views.size() > 1;
    parallel_chunks(mesh.vertices.size(), 1024, [&](std::size_t, std::size_t b, std::size_t e) {
        Workspace ws;
        std::vector<Workspace> view_ws;
        Workspace tail_ws;
        std::vector<double> raw_c(extractor_c.raw_dim()), raw_v(extractor_v.raw_dim());
        std::vector<double> feat(fc + fv);
        std::vector<std::vector<double>> inputs(views.size(), std::vector<double>(input_dim));
        for (std::size_t i = b; i < e; ++i) {
            const Vec3& x = mesh.vertices[i];
            std::span<const double> out;
            if (!fused) {
                Projection pr = project(views[0].cam, x);
                extractor_c.extract(views[0].pyramid, pr.pixel, raw_c.data(), feat.data());
                extractor_v.extract(views[0].pyramid, pr.pixel, raw_v.data(), feat.data() + fc);
                out = net_c.forward(feat, pr.depth, ws);
            } else {
                for (std::size_t v = 0; v < views.size(); ++v) {
                    Projection pr = project(views[v].cam, x);
                    extractor_c.extract(views[v].pyramid, pr.pixel, raw_c.data(),
                                        inputs[v].data());
                    extractor_v.extract(views[v].pyramid, pr.pixel, raw_v.data(),
                                        inputs[v].data() + fc);
                    inputs[v][fc + fv] = pr.depth;
                }
                out = net_c.fuse_forward(inputs, view_ws, tail_ws);
            }
            mesh.vertex_colors[i] = {std::clamp(out[0], 0.0, 1.0), std::clamp(out[1], 0.0, 1.0),
                                     std::clamp(out[2], 0.0, 1.0)};
        }
    });
}

// ---- grid serialization (tensor file + JSON bounds) ----

inline nlohmann::json grid_bounds_to_json(const ScalarGrid& grid) {
    return {
        {"resolution", {grid.nx, grid.ny, grid.nz}},
        {"min", {grid.bounds.min.x, grid.bounds.min.y, grid.bounds.min.z}},
        {"max", {grid.bounds.max.x, grid.bounds.max.y, grid.bounds.max.z}},
    };
}

} // namespace pifield
