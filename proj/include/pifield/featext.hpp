#pragma once

#include <vector>

#include "pifield/image.hpp"
#include "pifield/rng.hpp"

namespace pifield {

// Multi-scale box pyramid; level 0 is the input, each level halves the
// previous via 2x2 box averages (trailing odd row/col averaged over the
// pixels that exist).
struct ImagePyramid {
    std::vector<FeatureImage> levels;
};

inline FeatureImage box_downsample(const FeatureImage& src) {
    int ow = (src.width + 1) / 2;
    int oh = (src.height + 1) / 2;
    FeatureImage out(src.channels, ow, oh);
    for (int c = 0; c < src.channels; ++c) {
        for (int y = 0; y < oh; ++y) {
            int y0 = 2 * y, y1 = std::min(2 * y + 1, src.height - 1);
            for (int x = 0; x < ow; ++x) {
                int x0 = 2 * x, x1 = std::min(2 * x + 1, src.width - 1);
                int ny = (y1 > y0) ? 2 : 1, nx = (x1 > x0) ? 2 : 1;
                double sum = src.at(c, y0, x0);
                if (nx == 2) sum += src.at(c, y0, x1);
                if (ny == 2) sum += src.at(c, y1, x0);
                if (nx == 2 && ny == 2) sum += src.at(c, y1, x1);
                out.at(c, y, x) = sum / (nx * ny);
            }
        }
    }
    return out;
}

inline ImagePyramid build_pyramid(const FeatureImage& rgb, int n_levels) {
    if (n_levels < 1) throw Error("build_pyramid: need at least one level");
    ImagePyramid pyr;
    pyr.levels.push_back(rgb);
    for (int l = 1; l < n_levels; ++l) pyr.levels.push_back(box_downsample(pyr.levels.back()));
    return pyr;
}

// Pixel-aligned feature extractor: concatenates bilinear samples of every
// pyramid level at the query pixel (level l sampled at the pixel-center
// mapped coordinate (x + 0.5) / 2^l - 0.5), optionally followed by a learned
// linear projection. The projection is the jointly-trained part that stands
// in for a convolutional encoder's channel mixing.
class PyramidExtractor {
public:
    PyramidExtractor() = default;
    PyramidExtractor(int levels, int image_channels, int projection_dim)
        : levels_(levels), image_channels_(image_channels), projection_dim_(projection_dim) {
        if (levels_ < 1) throw Error("extractor: levels must be >= 1");
        if (projection_dim_ > 0) {
            weights_.assign(std::size_t(projection_dim_) * raw_dim(), 0.0);
            bias_.assign(projection_dim_, 0.0);
        }
    }

    int levels() const { return levels_; }
    int raw_dim() const { return image_channels_ * levels_; }
    int feature_dim() const { return projection_dim_ > 0 ? projection_dim_ : raw_dim(); }
    bool has_projection() const { return projection_dim_ > 0; }

    std::vector<double>& weights() { return weights_; }
    const std::vector<double>& weights() const { return weights_; }
    std::vector<double>& bias() { return bias_; }
    const std::vector<double>& bias() const { return bias_; }
    std::size_t parameter_count() const { return weights_.size() + bias_.size(); }

    // Glorot-uniform init of the projection.
    void init_projection(std::uint64_t seed) {
        if (!has_projection()) return;
        Rng rng(derive_seed(seed, "extractor-projection"));
        double bound = std::sqrt(6.0 / double(raw_dim() + projection_dim_));
        for (auto& w : weights_) w = rng.uniform(-bound, bound);
        for (auto& b : bias_) b = 0.0;
    }

    ImagePyramid make_pyramid(const FeatureImage& rgb) const {
        if (rgb.channels != image_channels_) throw Error("extractor: channel count mismatch");
        return build_pyramid(rgb, levels_);
    }

    // Per-level bilinear samples concatenated; length raw_dim().
    void raw_feature(const ImagePyramid& pyr, const Vec2& pixel, double* out) const {
        double x = pixel.x, y = pixel.y;
        for (int l = 0; l < levels_; ++l) {
            bilinear_sample(pyr.levels[l], x, y, out + std::size_t(l) * image_channels_);
            // Map to the next level's pixel-center frame.
            x = (x + 0.5) * 0.5 - 0.5;
            y = (y + 0.5) * 0.5 - 0.5;
        }
    }

    // Projected feature (or raw when no projection). out: feature_dim().
    void extract(const ImagePyramid& pyr, const Vec2& pixel, double* raw_scratch,
                 double* out) const {
        raw_feature(pyr, pixel, raw_scratch);
        if (!has_projection()) {
            std::copy(raw_scratch, raw_scratch + raw_dim(), out);
            return;
        }
        int rd = raw_dim();
        for (int k = 0; k < projection_dim_; ++k) {
            const double* row = weights_.data() + std::size_t(k) * rd;
            double acc = bias_[k];
            for (int i = 0; i < rd; ++i) acc += row[i] * raw_scratch[i];
            out[k] = acc;
        }
    }

    std::vector<double> extract(const ImagePyramid& pyr, const Vec2& pixel) const {
        std::vector<double> raw(raw_dim()), out(feature_dim());
        extract(pyr, pixel, raw.data(), out.data());
        return out;
    }

    // Accumulates d(loss)/d(projection) given the upstream feature gradient
    // and the raw vector from the matching extract() call. No-op without a
    // projection (the raw pathway has no parameters).
    void accumulate_gradient(const double* raw, const double* d_feature, double* d_weights,
                             double* d_bias) const {
        if (!has_projection()) return;
        int rd = raw_dim();
        for (int k = 0; k < projection_dim_; ++k) {
            double g = d_feature[k];
            double* row = d_weights + std::size_t(k) * rd;
            for (int i = 0; i < rd; ++i) row[i] += g * raw[i];
            d_bias[k] += g;
        }
    }

private:
    int levels_ = 4;
    int image_channels_ = 3;
    int projection_dim_ = 0;
    std::vector<double> weights_; // [projection_dim x raw_dim], row-major
    std::vector<double> bias_;    // [projection_dim]
};

} // namespace pifield
