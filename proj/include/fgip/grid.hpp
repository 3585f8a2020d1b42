#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fgip/common.hpp"

namespace fgip {

// Planar scalar field, row-major. Used for per-pixel variances, scale fields
// and edge maps; no size restrictions beyond being non-empty.
struct Field2D {
    int height = 0;
    int width = 0;
    std::vector<double> samples;

    Field2D() = default;
    Field2D(int h, int w, double fill = 0.0) : height(h), width(w) {
        if (h <= 0 || w <= 0) throw ContractError("Field2D: dimensions must be positive");
        samples.assign(static_cast<std::size_t>(h) * w, fill);
    }

    double& at(int i, int j) { return samples[static_cast<std::size_t>(i) * width + j]; }
    double at(int i, int j) const { return samples[static_cast<std::size_t>(i) * width + j]; }

    std::size_t size() const { return samples.size(); }

    Field2D transposed() const {
        Field2D t(width, height);
        for (int i = 0; i < height; ++i)
            for (int j = 0; j < width; ++j) t.at(j, i) = at(i, j);
        return t;
    }
};

// Interleaved image samples in [0, 1], row-major, 1 or 3 channels.
// Grids smaller than 3x3 cannot carry the second-order chain models, so they
// are rejected at construction.
struct ImageGrid {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> samples;

    ImageGrid() = default;
    ImageGrid(int h, int w, int c, double fill = 0.0) : height(h), width(w), channels(c) {
        if (h < 3 || w < 3)
            throw ContractError("ImageGrid: height and width must be at least 3, got " +
                                std::to_string(h) + "x" + std::to_string(w));
        if (c != 1 && c != 3)
            throw ContractError("ImageGrid: channel count must be 1 or 3, got " + std::to_string(c));
        samples.assign(static_cast<std::size_t>(h) * w * c, fill);
    }

    double& at(int i, int j, int c = 0) {
        return samples[(static_cast<std::size_t>(i) * width + j) * channels + c];
    }
    double at(int i, int j, int c = 0) const {
        return samples[(static_cast<std::size_t>(i) * width + j) * channels + c];
    }

    std::size_t size() const { return samples.size(); }
    std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }

    bool same_shape(const ImageGrid& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }

    bool all_finite() const {
        for (double v : samples)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool in_unit_range() const {
        for (double v : samples)
            if (!(v >= 0.0 && v <= 1.0)) return false;
        return true;
    }

    ImageGrid transposed() const {
        ImageGrid t(width, height, channels);
        for (int i = 0; i < height; ++i)
            for (int j = 0; j < width; ++j)
                for (int c = 0; c < channels; ++c) t.at(j, i, c) = at(i, j, c);
        return t;
    }

    ImageGrid clipped01() const {
        ImageGrid out = *this;
        for (double& v : out.samples) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        return out;
    }
};

// Missing-pixel mask for inpainting; nonzero entries mark missing samples.
struct Mask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> missing;

    Mask() = default;
    Mask(int h, int w) : height(h), width(w), missing(static_cast<std::size_t>(h) * w, 0) {}

    std::uint8_t& at(int i, int j) { return missing[static_cast<std::size_t>(i) * width + j]; }
    std::uint8_t at(int i, int j) const { return missing[static_cast<std::size_t>(i) * width + j]; }

    std::size_t missing_count() const {
        std::size_t n = 0;
        for (auto m : missing) n += m ? 1 : 0;
        return n;
    }
};

}  // namespace fgip
