#pragma once

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pifield/math.hpp"
#include "pifield/rng.hpp"

namespace pifield {

// Indexed triangle mesh in world centimeters. Normals are computed lazily by
// area-weighted face-normal averaging when the source file carried none.
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<Vec3> vertex_normals; // empty until computed or loaded
    std::vector<Vec3> vertex_colors;  // empty unless per-vertex RGB in [0,1]

    bool has_normals() const { return vertex_normals.size() == vertices.size(); }
    bool has_colors() const { return vertex_colors.size() == vertices.size(); }
};

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
    return 0.5 * norm(cross(b - a, c - a));
}

inline double triangle_area(const TriMesh& m, int t) {
    const auto& tri = m.triangles[t];
    return triangle_area(m.vertices[tri[0]], m.vertices[tri[1]], m.vertices[tri[2]]);
}

inline Vec3 face_normal(const TriMesh& m, int t) {
    const auto& tri = m.triangles[t];
    return normalized(cross(m.vertices[tri[1]] - m.vertices[tri[0]],
                            m.vertices[tri[2]] - m.vertices[tri[0]]));
}

inline double surface_area(const TriMesh& m) {
    double a = 0.0;
    for (int t = 0; t < int(m.triangles.size()); ++t) a += triangle_area(m, t);
    return a;
}

inline Aabb bounds(const TriMesh& m) {
    Aabb box;
    for (const auto& v : m.vertices) box.expand(v);
    return box;
}

// Area-weighted face-normal averaging; result vectors have unit length.
inline void compute_vertex_normals(TriMesh& m) {
    m.vertex_normals.assign(m.vertices.size(), Vec3{});
    for (const auto& tri : m.triangles) {
        Vec3 n = cross(m.vertices[tri[1]] - m.vertices[tri[0]],
                       m.vertices[tri[2]] - m.vertices[tri[0]]); // length = 2 * area
        for (int k = 0; k < 3; ++k) m.vertex_normals[tri[k]] += n;
    }
    for (auto& n : m.vertex_normals) n = normalized(n);
}

inline void require_normals(TriMesh& m) {
    if (!m.has_normals()) compute_vertex_normals(m);
}

// Rigid yaw rotation of vertices and (present) normals about the world y axis.
inline TriMesh rotated_y(const TriMesh& m, double angle) {
    TriMesh out = m;
    for (auto& v : out.vertices) v = rotate_y(v, angle);
    for (auto& n : out.vertex_normals) n = rotate_y(n, angle);
    return out;
}

inline TriMesh translated(const TriMesh& m, const Vec3& t) {
    TriMesh out = m;
    for (auto& v : out.vertices) v = v + t;
    return out;
}

struct ObjLoadStats {
    int degenerate_dropped = 0;
};

namespace detail {

inline double parse_double(const std::string& tok, const std::string& path, int line) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size())
        throw Error(path + ":" + std::to_string(line) + ": bad number '" + tok + "'");
    return v;
}

// "7", "7/2", "7//3", "7/2/3" -> vertex index (1-based, negatives relative).
inline int parse_face_vertex(const std::string& tok, int vertex_count, const std::string& path,
                             int line) {
    std::size_t slash = tok.find('/');
    std::string idx_str = slash == std::string::npos ? tok : tok.substr(0, slash);
    int idx = 0;
    auto [p, ec] = std::from_chars(idx_str.data(), idx_str.data() + idx_str.size(), idx);
    if (ec != std::errc{} || p != idx_str.data() + idx_str.size() || idx == 0)
        throw Error(path + ":" + std::to_string(line) + ": bad face index '" + tok + "'");
    int resolved = idx > 0 ? idx - 1 : vertex_count + idx;
    if (resolved < 0 || resolved >= vertex_count)
        throw Error(path + ":" + std::to_string(line) + ": face index " + std::to_string(idx) +
                    " out of range (have " + std::to_string(vertex_count) + " vertices)");
    return resolved;
}

} // namespace detail

// ASCII Wavefront OBJ subset: v (3 or 6 floats), vn, f (with / and // forms,
// polygons fan-triangulated). Unknown records are ignored. Degenerate
// triangles (area <= 1e-12 cm^2) are dropped and counted.
inline TriMesh load_obj(const std::string& path, ObjLoadStats* stats = nullptr) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open: " + path);

    TriMesh mesh;
    std::vector<Vec3> normals;
    bool any_color = false;
    int line_no = 0;
    std::string line;
    std::vector<std::string> toks;
    while (std::getline(is, line)) {
        ++line_no;
        toks.clear();
        std::istringstream ls(line);
        std::string tok;
        while (ls >> tok) toks.push_back(tok);
        if (toks.empty() || toks[0][0] == '#') continue;
        const std::string& key = toks[0];
        if (key == "v") {
            if (toks.size() != 4 && toks.size() != 7)
                throw Error(path + ":" + std::to_string(line_no) +
                            ": v record needs 3 or 6 floats");
            Vec3 p{detail::parse_double(toks[1], path, line_no),
                   detail::parse_double(toks[2], path, line_no),
                   detail::parse_double(toks[3], path, line_no)};
            mesh.vertices.push_back(p);
            if (toks.size() == 7) {
                any_color = true;
                mesh.vertex_colors.resize(mesh.vertices.size(), Vec3{});
                mesh.vertex_colors.back() = {detail::parse_double(toks[4], path, line_no),
                                             detail::parse_double(toks[5], path, line_no),
                                             detail::parse_double(toks[6], path, line_no)};
            } else if (any_color) {
                mesh.vertex_colors.resize(mesh.vertices.size(), Vec3{});
            }
        } else if (key == "vn") {
            if (toks.size() != 4)
                throw Error(path + ":" + std::to_string(line_no) + ": vn record needs 3 floats");
            normals.push_back(normalized(Vec3{detail::parse_double(toks[1], path, line_no),
                                              detail::parse_double(toks[2], path, line_no),
                                              detail::parse_double(toks[3], path, line_no)}));
        } else if (key == "f") {
            if (toks.size() < 4)
                throw Error(path + ":" + std::to_string(line_no) + ": face needs >= 3 vertices");
            std::vector<int> poly;
            for (std::size_t i = 1; i < toks.size(); ++i)
                poly.push_back(detail::parse_face_vertex(toks[i], int(mesh.vertices.size()), path,
                                                         line_no));
            for (std::size_t i = 2; i < poly.size(); ++i)
                mesh.triangles.push_back({poly[0], int(poly[i - 1]), int(poly[i])});
        }
        // vt, o, g, s, usemtl, mtllib: ignored
    }

    // Drop zero-area triangles.
    int dropped = 0;
    std::vector<std::array<int, 3>> kept;
    kept.reserve(mesh.triangles.size());
    for (const auto& tri : mesh.triangles) {
        if (triangle_area(mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]) >
            1e-12) {
            kept.push_back(tri);
        } else {
            ++dropped;
        }
    }
    mesh.triangles = std::move(kept);
    if (stats) stats->degenerate_dropped = dropped;

    if (normals.size() == mesh.vertices.size()) mesh.vertex_normals = std::move(normals);
    return mesh;
}

// Writes v (6 floats when colors present) and f records; 6 decimal digits.
inline void save_obj(const TriMesh& mesh, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open for write: " + path);
    char buf[256];
    bool colors = mesh.has_colors();
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3& v = mesh.vertices[i];
        if (colors) {
            const Vec3& c = mesh.vertex_colors[i];
            std::snprintf(buf, sizeof(buf), "v %.6f %.6f %.6f %.6f %.6f %.6f\n", v.x, v.y, v.z,
                          c.x, c.y, c.z);
        } else {
            std::snprintf(buf, sizeof(buf), "v %.6f %.6f %.6f\n", v.x, v.y, v.z);
        }
        os << buf;
    }
    for (const auto& t : mesh.triangles) {
        std::snprintf(buf, sizeof(buf), "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
        os << buf;
    }
    if (!os) throw Error("write failed: " + path);
}

struct SurfaceSample {
    Vec3 point;
    Vec3 normal; // interpolated vertex normal, renormalized
    int triangle = 0;
    Vec3 bary; // barycentric coordinates within the triangle
};

// Cumulative triangle-area table for O(log n) area-weighted picks.
struct AreaTable {
    std::vector<double> cumulative;
    double total = 0.0;

    explicit AreaTable(const TriMesh& m) {
        cumulative.reserve(m.triangles.size());
        for (int t = 0; t < int(m.triangles.size()); ++t) {
            total += triangle_area(m, t);
            cumulative.push_back(total);
        }
    }

    int pick(double u) const {
        auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u * total);
        return int(std::min<std::size_t>(it - cumulative.begin(), cumulative.size() - 1));
    }
};

// One sample: triangle by area, position barycentric-uniform (sqrt warp).
inline SurfaceSample sample_surface_one(const TriMesh& m, const AreaTable& table, Rng& rng) {
    int t = table.pick(rng.uniform());
    double r1 = std::sqrt(rng.uniform());
    double r2 = rng.uniform();
    Vec3 bary{1.0 - r1, r1 * (1.0 - r2), r1 * r2};
    const auto& tri = m.triangles[t];
    SurfaceSample s;
    s.triangle = t;
    s.bary = bary;
    s.point = m.vertices[tri[0]] * bary.x + m.vertices[tri[1]] * bary.y +
              m.vertices[tri[2]] * bary.z;
    s.normal = normalized(m.vertex_normals[tri[0]] * bary.x + m.vertex_normals[tri[1]] * bary.y +
                          m.vertex_normals[tri[2]] * bary.z);
    return s;
}

// Area-weighted surface samples with interpolated normals. Mesh must be
// non-empty; normals are computed on demand.
inline std::vector<SurfaceSample> sample_surface(TriMesh& mesh, std::size_t n, Rng& rng) {
    if (mesh.triangles.empty()) throw Error("sample_surface: empty mesh");
    require_normals(mesh);
    AreaTable table(mesh);
    std::vector<SurfaceSample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(sample_surface_one(mesh, table, rng));
    return out;
}

} // namespace pifield
