#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "pifield/mesh.hpp"

namespace pifield {

// Binary BVH over triangles: median split on the longest centroid axis,
// leaf size 4. Immutable after construction; queries are reentrant.
class Bvh {
public:
    struct Node {
        Aabb box;
        int left = -1, right = -1; // internal children
        int first = 0, count = 0;  // leaf triangle range in tri_order
        bool is_leaf() const { return count > 0; }
    };

    Bvh() = default;

    explicit Bvh(const TriMesh& mesh, int leaf_size = 4) : mesh_(&mesh) {
        int n = int(mesh.triangles.size());
        tri_order_.resize(n);
        std::iota(tri_order_.begin(), tri_order_.end(), 0);
        centroids_.resize(n);
        boxes_.resize(n);
        for (int t = 0; t < n; ++t) {
            const auto& tri = mesh.triangles[t];
            Aabb b;
            b.expand(mesh.vertices[tri[0]]);
            b.expand(mesh.vertices[tri[1]]);
            b.expand(mesh.vertices[tri[2]]);
            boxes_[t] = b;
            centroids_[t] = b.center();
        }
        if (n > 0) build(0, n, leaf_size);
        centroids_.clear();
        centroids_.shrink_to_fit();
    }

    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<int>& tri_order() const { return tri_order_; }
    bool empty() const { return nodes_.empty(); }

    struct ClosestHit {
        Vec3 point;
        double distance = std::numeric_limits<double>::infinity();
        int triangle = -1;
    };

    // Exact closest surface point: equals the brute-force minimum of
    // point-triangle distance over all triangles.
    ClosestHit closest_point(const Vec3& q) const {
        ClosestHit best;
        if (nodes_.empty()) return best;
        double best_d2 = std::numeric_limits<double>::infinity();
        int stack[64];
        int sp = 0;
        stack[sp++] = 0;
        while (sp > 0) {
            const Node& node = nodes_[stack[--sp]];
            if (node.box.dist2(q) >= best_d2) continue;
            if (node.is_leaf()) {
                for (int i = node.first; i < node.first + node.count; ++i) {
                    int t = tri_order_[i];
                    const auto& tri = mesh_->triangles[t];
                    Vec3 cp = closest_point_on_triangle(q, mesh_->vertices[tri[0]],
                                                        mesh_->vertices[tri[1]],
                                                        mesh_->vertices[tri[2]]);
                    double d2 = norm2(cp - q);
                    if (d2 < best_d2) {
                        best_d2 = d2;
                        best.point = cp;
                        best.triangle = t;
                    }
                }
            } else {
                // Visit the nearer child first for tighter pruning.
                double dl = nodes_[node.left].box.dist2(q);
                double dr = nodes_[node.right].box.dist2(q);
                if (dl < dr) {
                    if (dr < best_d2) stack[sp++] = node.right;
                    if (dl < best_d2) stack[sp++] = node.left;
                } else {
                    if (dl < best_d2) stack[sp++] = node.left;
                    if (dr < best_d2) stack[sp++] = node.right;
                }
            }
        }
        best.distance = std::sqrt(best_d2);
        return best;
    }

    // Counts ray-triangle crossings with t > 0. Returns nullopt when a hit is
    // numerically degenerate (grazes an edge/vertex within 1e-9 in barycentric
    // terms, starts on the surface, or the ray is parallel within 1e-12):
    // callers re-cast in a fresh direction.
    std::optional<int> count_crossings(const Vec3& origin, const Vec3& dir) const {
        if (nodes_.empty()) return 0;
        int count = 0;
        int stack[64];
        int sp = 0;
        stack[sp++] = 0;
        while (sp > 0) {
            const Node& node = nodes_[stack[--sp]];
            if (!ray_box(origin, dir, node.box)) continue;
            if (node.is_leaf()) {
                for (int i = node.first; i < node.first + node.count; ++i) {
                    int t = tri_order_[i];
                    const auto& tri = mesh_->triangles[t];
                    int r = ray_triangle(origin, dir, mesh_->vertices[tri[0]],
                                         mesh_->vertices[tri[1]], mesh_->vertices[tri[2]]);
                    if (r < 0) return std::nullopt;
                    count += r;
                }
            } else {
                stack[sp++] = node.left;
                stack[sp++] = node.right;
            }
        }
        return count;
    }

    // Ericson's closest-point-on-triangle.
    static Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                                          const Vec3& c) {
        Vec3 ab = b - a, ac = c - a, ap = p - a;
        double d1 = dot(ab, ap), d2 = dot(ac, ap);
        if (d1 <= 0.0 && d2 <= 0.0) return a;
        Vec3 bp = p - b;
        double d3 = dot(ab, bp), d4 = dot(ac, bp);
        if (d3 >= 0.0 && d4 <= d3) return b;
        double vc = d1 * d4 - d3 * d2;
        if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + ab * (d1 / (d1 - d3));
        Vec3 cp = p - c;
        double d5 = dot(ab, cp), d6 = dot(ac, cp);
        if (d6 >= 0.0 && d5 <= d6) return c;
        double vb = d5 * d2 - d1 * d6;
        if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + ac * (d2 / (d2 - d6));
        double va = d3 * d6 - d5 * d4;
        if (va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0) {
            double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
            return b + (c - b) * w;
        }
        double denom = 1.0 / (va + vb + vc);
        return a + ab * (vb * denom) + ac * (vc * denom);
    }

private:
    // Returns 1 on a clean crossing (t > 0), 0 on a clean miss, -1 on a
    // numerically degenerate configuration.
    static int ray_triangle(const Vec3& o, const Vec3& d, const Vec3& a, const Vec3& b,
                            const Vec3& c) {
        constexpr double kBaryEps = 1e-9;
        constexpr double kParallelEps = 1e-12;
        Vec3 e1 = b - a, e2 = c - a;
        Vec3 pv = cross(d, e2);
        double det = dot(e1, pv);
        double scale = norm(e1) * norm(e2);
        if (std::abs(det) <= kParallelEps * scale) {
            // Parallel ray: degenerate only if the ray's plane could be hit;
            // conservatively re-cast whenever the triangle faces edge-on.
            return -1;
        }
        double inv = 1.0 / det;
        Vec3 tv = o - a;
        double u = dot(tv, pv) * inv;
        if (u < -kBaryEps || u > 1.0 + kBaryEps) return 0;
        Vec3 qv = cross(tv, e1);
        double v = dot(d, qv) * inv;
        if (v < -kBaryEps || u + v > 1.0 + kBaryEps) return 0;
        double t = dot(e2, qv) * inv;
        if (t <= -kBaryEps) return 0;
        // Candidate hit; flag grazes of edges/vertices and on-surface origins.
        if (u < kBaryEps || v < kBaryEps || u + v > 1.0 - kBaryEps || std::abs(t) < kBaryEps)
            return -1;
        return t > 0.0 ? 1 : 0;
    }

    static bool ray_box(const Vec3& o, const Vec3& d, const Aabb& box) {
        double tmin = 0.0, tmax = std::numeric_limits<double>::infinity();
        for (int i = 0; i < 3; ++i) {
            if (d[i] == 0.0) {
                if (o[i] < box.min[i] || o[i] > box.max[i]) return false;
            } else {
                double inv = 1.0 / d[i];
                double t1 = (box.min[i] - o[i]) * inv;
                double t2 = (box.max[i] - o[i]) * inv;
                if (t1 > t2) std::swap(t1, t2);
                tmin = std::max(tmin, t1);
                tmax = std::min(tmax, t2);
                if (tmin > tmax) return false;
            }
        }
        return true;
    }

    int build(int first, int last, int leaf_size) {
        Node node;
        for (int i = first; i < last; ++i) node.box.expand(boxes_[tri_order_[i]]);
        int idx = int(nodes_.size());
        nodes_.push_back(node);
        int count = last - first;
        if (count <= leaf_size) {
            nodes_[idx].first = first;
            nodes_[idx].count = count;
            return idx;
        }
        Aabb cbox;
        for (int i = first; i < last; ++i) cbox.expand(centroids_[tri_order_[i]]);
        Vec3 ext = cbox.extent();
        int axis = 0;
        if (ext.y > ext.x) axis = 1;
        if (ext.z > ext[axis]) axis = 2;
        int mid = (first + last) / 2;
        std::nth_element(tri_order_.begin() + first, tri_order_.begin() + mid,
                         tri_order_.begin() + last, [&](int lhs, int rhs) {
                             return centroids_[lhs][axis] < centroids_[rhs][axis];
                         });
        int left = build(first, mid, leaf_size);
        int right = build(mid, last, leaf_size);
        nodes_[idx].left = left;
        nodes_[idx].right = right;
        return idx;
    }

    const TriMesh* mesh_ = nullptr;
    std::vector<Node> nodes_;
    std::vector<int> tri_order_;
    std::vector<Vec3> centroids_; // build scratch
    std::vector<Aabb> boxes_;
};

// Convenience wrapper matching the evaluation metric's wording: returns the
// nearest surface point and its distance in cm.
inline std::pair<Vec3, double> closest_point(const Bvh& bvh, const Vec3& q) {
    auto hit = bvh.closest_point(q);
    return {hit.point, hit.distance};
}

} // namespace pifield
