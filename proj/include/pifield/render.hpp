#pragma once

#include <limits>
#include <vector>

#include "pifield/camera.hpp"
#include "pifield/image.hpp"
#include "pifield/mesh.hpp"
#include "pifield/parallel.hpp"

namespace pifield {

// Rasterizer products. Normals are camera-space unit vectors (zero on
// background); depth is camera-space cm with +inf on background; mask is
// exactly (depth < inf).
struct RenderOutput {
    FeatureImage rgb;    // 3 channels
    FeatureImage normal; // 3 channels
    FeatureImage depth;  // 1 channel
    FeatureImage mask;   // 1 channel
};

inline constexpr double kDepthSentinel = std::numeric_limits<double>::infinity();

// Z-buffered weak-perspective rasterization with Lambertian shading plus a
// 0.2 constant ambient term: rgb = albedo * (max(0, n.l) + 0.2). The light
// direction is given in camera space, pointing from the surface toward the
// light. Albedo comes from interpolated vertex colors, 0.8 gray otherwise.
// Pixel centers sit at integer coordinates; shared edges follow a top-left
// fill rule (y down); no anti-aliasing so outputs are bitwise deterministic.
inline RenderOutput rasterize(TriMesh& mesh, const WeakPerspectiveCamera& cam,
                              const Vec3& light_dir, int width, int height) {
    if (mesh.triangles.empty()) throw Error("rasterize: empty mesh");
    require_normals(mesh);

    RenderOutput out;
    out.rgb = FeatureImage(3, width, height, 0.0);
    out.normal = FeatureImage(3, width, height, 0.0);
    out.depth = FeatureImage(1, width, height, kDepthSentinel);
    out.mask = FeatureImage(1, width, height, 0.0);

    // Project all vertices once; keep camera-space depth and normals.
    std::size_t nv = mesh.vertices.size();
    std::vector<Vec2> pix(nv);
    std::vector<double> cam_z(nv);
    std::vector<Vec3> cam_n(nv);
    for (std::size_t i = 0; i < nv; ++i) {
        Vec3 xc = rotate_y(mesh.vertices[i], -cam.yaw);
        pix[i] = {cam.scale * xc.x + cam.principal.x, cam.scale * -xc.y + cam.principal.y};
        cam_z[i] = xc.z;
        cam_n[i] = rotate_y(mesh.vertex_normals[i], -cam.yaw);
    }
    bool has_colors = mesh.has_colors();
    const Vec3 default_albedo{0.8, 0.8, 0.8};

    // Parallel over horizontal bands: every band rasterizes all triangles but
    // writes only its own rows, so the result is thread-count independent.
    int n_bands = std::min(std::max(1, max_threads()), height);
    int band_h = (height + n_bands - 1) / n_bands;
    parallel_chunks(std::size_t(n_bands), 1, [&](std::size_t band, std::size_t, std::size_t) {
        int y_lo = int(band) * band_h;
        int y_hi = std::min(height, y_lo + band_h);
        if (y_lo >= y_hi) return;
        for (const auto& tri : mesh.triangles) {
            int i0 = tri[0], i1 = tri[1], i2 = tri[2];
            Vec2 p0 = pix[i0], p1 = pix[i1], p2 = pix[i2];
            double area2 = (p1.x - p0.x) * (p2.y - p0.y) - (p1.y - p0.y) * (p2.x - p0.x);
            if (area2 == 0.0) continue;
            if (area2 < 0.0) { // canonical orientation for the fill rule
                std::swap(i1, i2);
                std::swap(p1, p2);
                area2 = -area2;
            }
            int min_x = std::max(0, int(std::ceil(std::min({p0.x, p1.x, p2.x}))));
            int max_x = std::min(width - 1, int(std::floor(std::max({p0.x, p1.x, p2.x}))));
            int min_y = std::max(y_lo, int(std::ceil(std::min({p0.y, p1.y, p2.y}))));
            int max_y = std::min(y_hi - 1, int(std::floor(std::max({p0.y, p1.y, p2.y}))));
            if (min_x > max_x || min_y > max_y) continue;

            auto edge = [](const Vec2& a, const Vec2& b, double px, double py) {
                return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
            };
            // Top-left rule in y-down coordinates: top = horizontal going
            // right, left = going down.
            auto accepts_zero = [](const Vec2& a, const Vec2& b) {
                return (a.y == b.y && b.x > a.x) || b.y > a.y;
            };
            bool z0 = accepts_zero(p1, p2), z1 = accepts_zero(p2, p0), z2 = accepts_zero(p0, p1);

            for (int py = min_y; py <= max_y; ++py) {
                for (int px = min_x; px <= max_x; ++px) {
                    double e0 = edge(p1, p2, px, py); // opposite vertex 0
                    double e1 = edge(p2, p0, px, py);
                    double e2 = edge(p0, p1, px, py);
                    bool in = (e0 > 0.0 || (e0 == 0.0 && z0)) &&
                              (e1 > 0.0 || (e1 == 0.0 && z1)) &&
                              (e2 > 0.0 || (e2 == 0.0 && z2));
                    if (!in) continue;
                    double w0 = e0 / area2, w1 = e1 / area2, w2 = e2 / area2;
                    double z = w0 * cam_z[i0] + w1 * cam_z[i1] + w2 * cam_z[i2];
                    if (z >= out.depth.at(0, py, px)) continue;
                    Vec3 n = normalized(cam_n[i0] * w0 + cam_n[i1] * w1 + cam_n[i2] * w2);
                    Vec3 albedo = default_albedo;
                    if (has_colors)
                        albedo = mesh.vertex_colors[i0] * w0 + mesh.vertex_colors[i1] * w1 +
                                 mesh.vertex_colors[i2] * w2;
                    double diffuse = std::max(0.0, dot(n, light_dir));
                    out.depth.at(0, py, px) = z;
                    out.mask.at(0, py, px) = 1.0;
                    for (int c = 0; c < 3; ++c) {
                        out.normal.at(c, py, px) = n[c];
                        out.rgb.at(c, py, px) = albedo[c] * (diffuse + 0.2);
                    }
                }
            }
        }
    });
    return out;
}

} // namespace pifield
