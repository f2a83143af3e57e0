#pragma once

#include <cstdint>
#include <map>
#include <utility>

#include "pifield/mesh.hpp"

namespace pifield {

// Procedural watertight fixtures used by tests, the ablation runner, and the
// CLI demo paths. All dimensions in cm.

// Icosahedron subdivided `subdivisions` times and projected to the sphere.
// 0 -> 20 tris, 1 -> 80, 2 -> 320, 3 -> 1280, 4 -> 5120.
inline TriMesh make_icosphere(double radius = 1.0, int subdivisions = 3,
                              const Vec3& center = {}) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {
        {-1, t, 0}, {1, t, 0},   {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
        {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1},
    };
    for (auto& v : verts) v = normalized(v);
    std::vector<std::array<int, 3>> tris = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},  {5, 11, 4},
        {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6},  {3, 6, 8},
        {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1},
    };
    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            int idx = int(verts.size());
            verts.push_back(normalized(verts[a] + verts[b]));
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(tris.size() * 4);
        for (const auto& tr : tris) {
            int ab = mid(tr[0], tr[1]), bc = mid(tr[1], tr[2]), ca = mid(tr[2], tr[0]);
            next.push_back({tr[0], ab, ca});
            next.push_back({tr[1], bc, ab});
            next.push_back({tr[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        tris = std::move(next);
    }
    TriMesh m;
    m.vertices.reserve(verts.size());
    for (const auto& v : verts) m.vertices.push_back(center + v * radius);
    m.triangles = std::move(tris);
    return m;
}

// Torus around the z axis (major circle in the xy plane) so a yaw sweep sees
// genuinely different aspects. Membership: (sqrt(x^2+y^2)-R)^2 + z^2 < r^2.
inline TriMesh make_torus(double major_radius, double minor_radius, int major_segments = 48,
                          int minor_segments = 24) {
    TriMesh m;
    m.vertices.reserve(std::size_t(major_segments) * minor_segments);
    for (int i = 0; i < major_segments; ++i) {
        double theta = 2.0 * kPi * i / major_segments;
        double ct = std::cos(theta), st = std::sin(theta);
        for (int j = 0; j < minor_segments; ++j) {
            double phi = 2.0 * kPi * j / minor_segments;
            double ring = major_radius + minor_radius * std::cos(phi);
            m.vertices.push_back({ring * ct, ring * st, minor_radius * std::sin(phi)});
        }
    }
    auto idx = [&](int i, int j) {
        return (i % major_segments) * minor_segments + (j % minor_segments);
    };
    for (int i = 0; i < major_segments; ++i) {
        for (int j = 0; j < minor_segments; ++j) {
            int a = idx(i, j), b = idx(i + 1, j), c = idx(i + 1, j + 1), d = idx(i, j + 1);
            m.triangles.push_back({a, b, c});
            m.triangles.push_back({a, c, d});
        }
    }
    return m;
}

// Capsule around the y axis: cylinder of half-height plus hemispherical caps.
inline TriMesh make_capsule(double radius, double half_height, int segments = 32,
                            int hemi_rings = 8) {
    TriMesh m;
    // Latitude rings from bottom pole to top pole; t in [-pi/2, pi/2] with the
    // equator duplicated at both cylinder ends.
    std::vector<int> ring_start;
    std::vector<int> ring_size;
    auto add_ring = [&](double y, double ring_radius) {
        ring_start.push_back(int(m.vertices.size()));
        ring_size.push_back(segments);
        for (int s = 0; s < segments; ++s) {
            double a = 2.0 * kPi * s / segments;
            m.vertices.push_back({ring_radius * std::cos(a), y, ring_radius * std::sin(a)});
        }
    };
    int bottom_pole = int(m.vertices.size());
    m.vertices.push_back({0.0, -half_height - radius, 0.0});
    for (int k = 1; k <= hemi_rings; ++k) {
        double t = -kPi / 2.0 + kPi / 2.0 * k / hemi_rings; // (-pi/2, 0]
        add_ring(-half_height + radius * std::sin(t), radius * std::cos(t));
    }
    for (int k = 0; k < hemi_rings; ++k) {
        double t = kPi / 2.0 * k / hemi_rings; // [0, pi/2)
        add_ring(half_height + radius * std::sin(t), radius * std::cos(t));
    }
    int top_pole = int(m.vertices.size());
    m.vertices.push_back({0.0, half_height + radius, 0.0});

    auto rv = [&](int ring, int s) { return ring_start[ring] + (s % segments); };
    // Rings wind +x toward +z, which is clockwise seen from +y, so outward
    // faces need the reversed quad order.
    for (int s = 0; s < segments; ++s)
        m.triangles.push_back({bottom_pole, rv(0, s), rv(0, s + 1)});
    for (int r = 0; r + 1 < int(ring_start.size()); ++r) {
        for (int s = 0; s < segments; ++s) {
            int a = rv(r, s), b = rv(r, s + 1), c = rv(r + 1, s + 1), d = rv(r + 1, s);
            m.triangles.push_back({a, c, b});
            m.triangles.push_back({a, d, c});
        }
    }
    int last = int(ring_start.size()) - 1;
    for (int s = 0; s < segments; ++s)
        m.triangles.push_back({top_pole, rv(last, s + 1), rv(last, s)});
    return m;
}

// Two disjoint icospheres merged into one mesh (still watertight: two shells).
inline TriMesh make_two_spheres(double radius_a, const Vec3& center_a, double radius_b,
                                const Vec3& center_b, int subdivisions = 3) {
    TriMesh a = make_icosphere(radius_a, subdivisions, center_a);
    TriMesh b = make_icosphere(radius_b, subdivisions, center_b);
    int offset = int(a.vertices.size());
    a.vertices.insert(a.vertices.end(), b.vertices.begin(), b.vertices.end());
    for (const auto& t : b.triangles)
        a.triangles.push_back({t[0] + offset, t[1] + offset, t[2] + offset});
    return a;
}

// Paints vertices by which side of the plane through `center` with normal
// `axis` they fall on. Used by the texture-overfit fixtures.
inline void paint_two_tone(TriMesh& m, const Vec3& axis, const Vec3& color_pos,
                           const Vec3& color_neg, const Vec3& center = {}) {
    m.vertex_colors.resize(m.vertices.size());
    for (std::size_t i = 0; i < m.vertices.size(); ++i)
        m.vertex_colors[i] = dot(m.vertices[i] - center, axis) >= 0.0 ? color_pos : color_neg;
}

} // namespace pifield
