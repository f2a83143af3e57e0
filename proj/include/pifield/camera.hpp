#pragma once

#include <vector>

#include <json.hpp>

#include "pifield/math.hpp"
#include "pifield/mesh.hpp"

namespace pifield {

// Weak-perspective camera. World points are rotated by -yaw about the world
// y axis into camera space; the image plane scales (Xc.x, -Xc.y) uniformly
// (pixel y points down, world +y is up). Pixel (0,0) is the center of the
// top-left pixel. Depth is normalized to [-1, 1] over the subject volume:
//   z = (Xc.z - depth_center) / depth_half_range.
struct WeakPerspectiveCamera {
    double yaw = 0.0;            // radians
    double scale = 1.0;          // pixels per cm
    Vec2 principal{256.0, 256.0};
    int image_width = 512;
    int image_height = 512;
    double depth_center = 0.0;     // cm, camera space
    double depth_half_range = 1.0; // cm

    bool valid() const {
        return scale > 0.0 && depth_half_range > 0.0 && image_width > 0 && image_height > 0;
    }
};

struct Projection {
    Vec2 pixel;
    double depth = 0.0; // normalized
};

inline Vec3 to_camera_space(const WeakPerspectiveCamera& cam, const Vec3& world) {
    return rotate_y(world, -cam.yaw);
}

inline Projection project(const WeakPerspectiveCamera& cam, const Vec3& world) {
    Vec3 xc = to_camera_space(cam, world);
    Projection p;
    p.pixel = {cam.scale * xc.x + cam.principal.x, cam.scale * -xc.y + cam.principal.y};
    p.depth = (xc.z - cam.depth_center) / cam.depth_half_range;
    return p;
}

// n cameras at yaw = 2*pi*k/n, all other fields copied from base.
inline std::vector<WeakPerspectiveCamera> yaw_sweep(int n_views,
                                                    const WeakPerspectiveCamera& base) {
    if (n_views < 1) throw Error("yaw_sweep: n_views must be >= 1");
    std::vector<WeakPerspectiveCamera> cams(n_views, base);
    for (int k = 0; k < n_views; ++k) cams[k].yaw = 2.0 * kPi * k / n_views;
    return cams;
}

// Frames a mesh for rendering: subject centered, ~90% of the smaller image
// dimension, depth range covering the bounding sphere at every yaw.
inline WeakPerspectiveCamera frame_mesh(const TriMesh& mesh, int image_width,
                                        int image_height) {
    Aabb box = bounds(mesh);
    Vec3 c = box.center();
    double radius = 0.0;
    for (const auto& v : mesh.vertices) radius = std::max(radius, norm(v - c));
    // Rotation happens about the world origin, so the sweep must stay inside
    // the frame for every yaw: bound by |center| + bounding-sphere radius.
    double orbit = norm(c) + radius;
    WeakPerspectiveCamera cam;
    cam.image_width = image_width;
    cam.image_height = image_height;
    cam.principal = {(image_width - 1) * 0.5, (image_height - 1) * 0.5};
    cam.scale = orbit > 0.0 ? 0.45 * std::min(image_width, image_height) / orbit : 1.0;
    cam.depth_center = 0.0;
    cam.depth_half_range = orbit > 0.0 ? 1.05 * orbit : 1.0;
    return cam;
}

inline nlohmann::json camera_to_json(const WeakPerspectiveCamera& cam) {
    return {
        {"yaw_deg", cam.yaw * 180.0 / kPi},
        {"scale", cam.scale},
        {"principal", {cam.principal.x, cam.principal.y}},
        {"image_size", {cam.image_width, cam.image_height}},
        {"depth_center", cam.depth_center},
        {"depth_half_range", cam.depth_half_range},
    };
}

inline WeakPerspectiveCamera camera_from_json(const nlohmann::json& j) {
    WeakPerspectiveCamera cam;
    cam.yaw = j.at("yaw_deg").get<double>() * kPi / 180.0;
    cam.scale = j.at("scale").get<double>();
    cam.principal = {j.at("principal").at(0).get<double>(),
                     j.at("principal").at(1).get<double>()};
    cam.image_width = j.at("image_size").at(0).get<int>();
    cam.image_height = j.at("image_size").at(1).get<int>();
    cam.depth_center = j.at("depth_center").get<double>();
    cam.depth_half_range = j.at("depth_half_range").get<double>();
    if (!cam.valid()) throw Error("invalid camera JSON");
    return cam;
}

} // namespace pifield
