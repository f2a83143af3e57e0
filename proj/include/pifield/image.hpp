#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "pifield/math.hpp"

namespace pifield {

// Dense multi-channel image, row-major [channel][y][x], double precision so
// feature gradients check out against finite differences.
struct FeatureImage {
    int channels = 0;
    int width = 0;
    int height = 0;
    std::vector<double> data;

    FeatureImage() = default;
    FeatureImage(int c, int w, int h, double fill = 0.0)
        : channels(c), width(w), height(h), data(std::size_t(c) * w * h, fill) {}

    double& at(int c, int y, int x) {
        return data[(std::size_t(c) * height + y) * width + x];
    }
    double at(int c, int y, int x) const {
        return data[(std::size_t(c) * height + y) * width + x];
    }
};

// Bilinear interpolation of the four nearest pixel centers; coordinates are
// clamped to [0, W-1] x [0, H-1] (replicate border). Pixel (0,0) is centered
// at coordinate (0, 0).
inline void bilinear_sample(const FeatureImage& img, double x, double y, double* out) {
    double cx = std::clamp(x, 0.0, double(img.width - 1));
    double cy = std::clamp(y, 0.0, double(img.height - 1));
    int x0 = int(cx);
    int y0 = int(cy);
    int x1 = std::min(x0 + 1, img.width - 1);
    int y1 = std::min(y0 + 1, img.height - 1);
    double fx = cx - x0;
    double fy = cy - y0;
    double w00 = (1.0 - fx) * (1.0 - fy);
    double w10 = fx * (1.0 - fy);
    double w01 = (1.0 - fx) * fy;
    double w11 = fx * fy;
    for (int c = 0; c < img.channels; ++c) {
        out[c] = w00 * img.at(c, y0, x0) + w10 * img.at(c, y0, x1) + w01 * img.at(c, y1, x0) +
                 w11 * img.at(c, y1, x1);
    }
}

inline std::vector<double> bilinear_sample(const FeatureImage& img, const Vec2& p) {
    std::vector<double> out(img.channels);
    bilinear_sample(img, p.x, p.y, out.data());
    return out;
}

// ---- PPM (P6, 8-bit RGB) ----

inline void write_ppm(const FeatureImage& img, const std::string& path) {
    if (img.channels != 3) throw Error("write_ppm: need 3 channels for " + path);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open for write: " + path);
    os << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> row(std::size_t(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
                row[std::size_t(x) * 3 + c] = (unsigned char)(std::lround(v * 255.0));
            }
        }
        os.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
    if (!os) throw Error("write failed: " + path);
}

inline FeatureImage read_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open: " + path);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    is >> magic >> w >> h >> maxval;
    if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255)
        throw Error("unsupported PPM header in " + path);
    is.get(); // single whitespace after header
    FeatureImage img(3, w, h);
    std::vector<unsigned char> row(std::size_t(w) * 3);
    for (int y = 0; y < h; ++y) {
        is.read(reinterpret_cast<char*>(row.data()), row.size());
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) img.at(c, y, x) = row[std::size_t(x) * 3 + c] / 255.0;
    }
    if (!is) throw Error("truncated PPM payload in " + path);
    return img;
}

// ---- PFM (Pf gray / PF color, little-endian, rows bottom-up per spec) ----

inline void write_pfm(const FeatureImage& img, const std::string& path) {
    if (img.channels != 1 && img.channels != 3)
        throw Error("write_pfm: need 1 or 3 channels for " + path);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open for write: " + path);
    os << (img.channels == 3 ? "PF" : "Pf") << "\n"
       << img.width << " " << img.height << "\n-1.0\n";
    std::vector<float> row(std::size_t(img.width) * img.channels);
    for (int y = img.height - 1; y >= 0; --y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                row[std::size_t(x) * img.channels + c] = float(img.at(c, y, x));
        os.write(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(float));
    }
    if (!os) throw Error("write failed: " + path);
}

inline FeatureImage read_pfm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open: " + path);
    std::string magic;
    int w = 0, h = 0;
    double scale = 0.0;
    is >> magic >> w >> h >> scale;
    if ((magic != "PF" && magic != "Pf") || w <= 0 || h <= 0)
        throw Error("unsupported PFM header in " + path);
    if (scale >= 0.0) throw Error("big-endian PFM not supported: " + path);
    is.get();
    int channels = magic == "PF" ? 3 : 1;
    FeatureImage img(channels, w, h);
    std::vector<float> row(std::size_t(w) * channels);
    for (int y = h - 1; y >= 0; --y) {
        is.read(reinterpret_cast<char*>(row.data()), row.size() * sizeof(float));
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c) img.at(c, y, x) = row[std::size_t(x) * channels + c];
    }
    if (!is) throw Error("truncated PFM payload in " + path);
    return img;
}

} // namespace pifield
