#pragma once

#include <map>
#include <utility>

#include "pifield/bvh.hpp"
#include "pifield/mesh.hpp"
#include "pifield/rng.hpp"

namespace pifield {

struct WatertightReport {
    bool watertight = false;
    int boundary_edges = 0;
    int nonmanifold_edges = 0;
};

// True iff every undirected edge is shared by exactly two triangles with
// opposite orientation.
inline WatertightReport is_watertight(const TriMesh& mesh) {
    // Per undirected edge: count of (a<b) and (b<a) directed occurrences.
    std::map<std::pair<int, int>, std::pair<int, int>> edges;
    for (const auto& tri : mesh.triangles) {
        for (int k = 0; k < 3; ++k) {
            int a = tri[k], b = tri[(k + 1) % 3];
            if (a < b)
                edges[{a, b}].first++;
            else
                edges[{b, a}].second++;
        }
    }
    WatertightReport rep;
    for (const auto& [edge, dirs] : edges) {
        int total = dirs.first + dirs.second;
        if (total == 1)
            rep.boundary_edges++;
        else if (total > 2 || dirs.first != 1 || dirs.second != 1)
            rep.nonmanifold_edges++;
    }
    rep.watertight =
        !mesh.triangles.empty() && rep.boundary_edges == 0 && rep.nonmanifold_edges == 0;
    return rep;
}

// Generalized winding number: sum of signed solid angles / 4*pi. Inside iff
// > 0.5 for watertight meshes. Brute force over all triangles; this is the
// independent test oracle, deliberately BVH-free.
inline double winding_number(const TriMesh& mesh, const Vec3& q) {
    double total = 0.0;
    for (const auto& tri : mesh.triangles) {
        Vec3 a = mesh.vertices[tri[0]] - q;
        Vec3 b = mesh.vertices[tri[1]] - q;
        Vec3 c = mesh.vertices[tri[2]] - q;
        double la = norm(a), lb = norm(b), lc = norm(c);
        double det = dot(a, cross(b, c));
        double denom = la * lb * lc + dot(a, b) * lc + dot(b, c) * la + dot(c, a) * lb;
        total += 2.0 * std::atan2(det, denom);
    }
    return total / (4.0 * kPi);
}

// Raised when 8 re-cast attempts all hit numerically degenerate
// configurations; callers may treat the point as on-surface.
struct DegenerateQuery : Error {
    explicit DegenerateQuery(const Vec3& p)
        : Error("degenerate occupancy query at (" + std::to_string(p.x) + ", " +
                std::to_string(p.y) + ", " + std::to_string(p.z) + ")") {}
};

// Ground-truth occupancy via ray parity: cast a ray in a seeded pseudo-random
// direction, count crossings, odd means inside. Requires a watertight mesh.
class OccupancyOracle {
public:
    OccupancyOracle(const TriMesh& mesh, const Bvh& bvh, double eps_surface = 1e-4)
        : mesh_(&mesh), bvh_(&bvh), eps_surface_(eps_surface) {
        auto rep = is_watertight(mesh);
        if (!rep.watertight)
            throw Error("occupancy oracle requires a watertight mesh (" +
                        std::to_string(rep.boundary_edges) + " boundary, " +
                        std::to_string(rep.nonmanifold_edges) + " non-manifold edges)");
    }

    // 0 or 1 per the ground-truth field definition; surface points fall out
    // as 0 via the parity of tangential rays being even almost surely.
    int inside(const Vec3& x, Rng& rng) const {
        for (int attempt = 0; attempt < 8; ++attempt) {
            auto crossings = bvh_->count_crossings(x, rng.unit_vector());
            if (crossings) return *crossings & 1;
        }
        throw DegenerateQuery(x);
    }

    // inside() with the test-oracle fallback for degenerate queries.
    int inside_or_winding(const Vec3& x, Rng& rng) const {
        try {
            return inside(x, rng);
        } catch (const DegenerateQuery&) {
            return winding_number(*mesh_, x) > 0.5 ? 1 : 0;
        }
    }

    const TriMesh& mesh() const { return *mesh_; }
    const Bvh& bvh() const { return *bvh_; }
    double eps_surface() const { return eps_surface_; }

private:
    const TriMesh* mesh_;
    const Bvh* bvh_;
    double eps_surface_;
};

} // namespace pifield
