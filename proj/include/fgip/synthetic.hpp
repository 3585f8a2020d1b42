#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "fgip/grid.hpp"

namespace fgip {

// Seeded synthetic scenes used by the tests and the calibration tool. All of
// them stay inside a mid-tone band so added noise does not clip.

// A few random straight cuts partition the plane; every cell gets its own
// affine intensity profile. Gentle in-cell gradients, clear steps across cuts.
inline ImageGrid make_piecewise_linear(int height, int width, int channels, std::uint64_t seed) {
    ImageGrid img(height, width, channels);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    constexpr int kCuts = 4;
    double nx[kCuts], ny[kCuts], off[kCuts];
    for (int k = 0; k < kCuts; ++k) {
        const double angle = unit(rng) * 2.0 * M_PI;
        nx[k] = std::cos(angle);
        ny[k] = std::sin(angle);
        off[k] = (unit(rng) * 1.2 - 0.6);  // cut offset, scene coordinates in [-0.5, 0.5]
    }
    // Affine profile per (cell, channel): base level plus a small tilt.
    constexpr int kCells = 1 << kCuts;
    std::vector<double> base(kCells * channels), gx(kCells * channels), gy(kCells * channels);
    for (int k = 0; k < kCells * channels; ++k) {
        base[k] = 0.35 + 0.3 * unit(rng);
        gx[k] = 0.24 * (unit(rng) - 0.5);
        gy[k] = 0.24 * (unit(rng) - 0.5);
    }

    for (int i = 0; i < height; ++i) {
        for (int j = 0; j < width; ++j) {
            const double x = (j + 0.5) / width - 0.5;
            const double y = (i + 0.5) / height - 0.5;
            int cell = 0;
            for (int k = 0; k < kCuts; ++k)
                if (nx[k] * x + ny[k] * y > off[k]) cell |= 1 << k;
            for (int c = 0; c < channels; ++c) {
                const int at = cell * channels + c;
                double v = base[at] + gx[at] * x + gy[at] * y;
                img.at(i, j, c) = v < 0.3 ? 0.3 : (v > 0.7 ? 0.7 : v);
            }
        }
    }
    return img;
}

// Piecewise-linear base with an oriented sinusoidal texture on top.
inline ImageGrid make_textured(int height, int width, int channels, std::uint64_t seed,
                               double texture_amp, double cycles) {
    ImageGrid img = make_piecewise_linear(height, width, channels, seed);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double angle = unit(rng) * M_PI;
    const double cx = std::cos(angle), sx = std::sin(angle);
    const double phase = unit(rng) * 2.0 * M_PI;
    for (int i = 0; i < height; ++i)
        for (int j = 0; j < width; ++j) {
            const double x = (j + 0.5) / width, y = (i + 0.5) / height;
            const double t = texture_amp * std::sin(2.0 * M_PI * cycles * (cx * x + sx * y) + phase);
            for (int c = 0; c < channels; ++c) {
                double v = img.at(i, j, c) + t;
                img.at(i, j, c) = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
            }
        }
    return img;
}

// Horizontal ramp from lo to hi, constant along columns.
inline ImageGrid make_ramp(int height, int width, int channels, double lo = 0.3, double hi = 0.7) {
    ImageGrid img(height, width, channels);
    for (int i = 0; i < height; ++i)
        for (int j = 0; j < width; ++j) {
            const double v = lo + (hi - lo) * j / (width - 1);
            for (int c = 0; c < channels; ++c) img.at(i, j, c) = v;
        }
    return img;
}

// Vertical step edge at mid-width.
inline ImageGrid make_step(int height, int width, int channels, double lo = 0.3, double hi = 0.7) {
    ImageGrid img(height, width, channels);
    for (int i = 0; i < height; ++i)
        for (int j = 0; j < width; ++j) {
            const double v = j < width / 2 ? lo : hi;
            for (int c = 0; c < channels; ++c) img.at(i, j, c) = v;
        }
    return img;
}

// Thin random scratches (1-2 pixels wide, axis-aligned or diagonal), marking
// at most the requested fraction of pixels as missing.
inline Mask make_scratch_mask(int height, int width, std::uint64_t seed, int scratches = 12,
                              double max_fraction = 0.1) {
    Mask mask(height, width);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick_i(0, height - 1), pick_j(0, width - 1);
    std::uniform_int_distribution<int> pick_dir(0, 3), pick_wide(0, 1);
    const std::size_t budget = static_cast<std::size_t>(max_fraction * height * width);
    std::size_t marked = 0;
    for (int s = 0; s < scratches && marked < budget; ++s) {
        int i = pick_i(rng), j = pick_j(rng);
        const int dir = pick_dir(rng);                     // E, S, SE, NE
        const int di[4] = {0, 1, 1, -1}, dj[4] = {1, 0, 1, 1};
        const bool wide = pick_wide(rng) == 1;
        const int len = (height + width) / 3;
        for (int t = 0; t < len; ++t) {
            if (i < 0 || i >= height || j < 0 || j >= width) break;
            if (!mask.at(i, j)) ++marked;
            mask.at(i, j) = 1;
            if (wide && i + 1 < height) {
                if (!mask.at(i + 1, j)) ++marked;
                mask.at(i + 1, j) = 1;
            }
            i += di[dir];
            j += dj[dir];
        }
    }
    return mask;
}

}  // namespace fgip
