#pragma once

#include <cmath>
#include <utility>

#include "fgip/grid.hpp"
#include "fgip/params.hpp"

namespace fgip {

enum class Orientation { row, col };

// Addressing for the 1-D chains a grid field decomposes into: one chain per
// row (or per column), nodes ordered by increasing column (or row) index.
struct ChainLayout {
    int count = 0;   // number of chains
    int length = 0;  // nodes per chain
    Orientation orient = Orientation::row;

    std::pair<int, int> node(int chain, int k) const {
        return orient == Orientation::row ? std::pair{chain, k} : std::pair{k, chain};
    }
};

inline ChainLayout chain_view(int height, int width, Orientation orient) {
    if (height <= 0 || width <= 0) throw ContractError("chain_view: dimensions must be positive");
    if (orient == Orientation::row) return {height, width, orient};
    return {width, height, orient};
}

// The unknowns of the smoothing model: levels y plus one slope field per
// orientation. All three grids share one shape.
struct LatentField {
    ImageGrid y;
    ImageGrid d_row;
    ImageGrid d_col;

    LatentField() = default;

    explicit LatentField(const ImageGrid& y0)
        : y(y0),
          d_row(y0.height, y0.width, y0.channels, 0.0),
          d_col(y0.height, y0.width, y0.channels, 0.0) {}

    LatentField(ImageGrid y_, ImageGrid d_row_, ImageGrid d_col_)
        : y(std::move(y_)), d_row(std::move(d_row_)), d_col(std::move(d_col_)) {
        if (!y.same_shape(d_row) || !y.same_shape(d_col))
            throw ContractError("LatentField: level and slope grids must share one shape");
    }

    int height() const { return y.height; }
    int width() const { return y.width; }
    int channels() const { return y.channels; }
};

// Locally adapted scales of the priors, one value per chain node and
// orientation. Entries at chain position 0 are carried but never read: a
// chain of length N has N-1 level steps and scale increments.
struct ChainScales {
    Field2D sigma_u2_row, sigma_u2_col;  // level-step scales sigma_U^2
    Field2D r_row, r_col;                // slope-noise scale factors
    Field2D sigma_d2_row, sigma_d2_col;  // scale-increment scales sigma_Delta^2

    static ChainScales initial(int height, int width, const HyperParams& params, double init_r) {
        const double su2 = params.init_sigma_u * params.init_sigma_u;
        const double sd2 = params.init_sigma_delta * params.init_sigma_delta;
        ChainScales s;
        s.sigma_u2_row = Field2D(height, width, su2);
        s.sigma_u2_col = Field2D(height, width, su2);
        s.r_row = Field2D(height, width, init_r);
        s.r_col = Field2D(height, width, init_r);
        s.sigma_d2_row = Field2D(height, width, sd2);
        s.sigma_d2_col = Field2D(height, width, sd2);
        return s;
    }
};

// Observed image plus its per-pixel noise variance (shared across channels).
// Uniform variance is the common case; inpainting and Poissonian noise supply
// genuinely per-pixel values.
struct ObservationField {
    ImageGrid values;
    Field2D variance;

    ObservationField() = default;

    ObservationField(ImageGrid values_, Field2D variance_)
        : values(std::move(values_)), variance(std::move(variance_)) {
        if (variance.height != values.height || variance.width != values.width)
            throw ContractError("ObservationField: variance shape must match the image");
        if (!values.all_finite() || !values.in_unit_range())
            throw ContractError("ObservationField: samples must be finite and in [0, 1]");
        for (double v : variance.samples)
            if (!(v >= 1e-12) || !std::isfinite(v))
                throw ContractError("ObservationField: variances must be finite and >= 1e-12");
    }

    ObservationField(ImageGrid values_, double uniform_variance)
        : ObservationField(std::move(values_),
                           Field2D(values_.height, values_.width, uniform_variance)) {}

    int height() const { return values.height; }
    int width() const { return values.width; }
    int channels() const { return values.channels; }
};

// Level steps u and slope increments s of every chain of one orientation,
//   u_n = y_n - y_{n-1} - d_{n-1},   s_n = d_n - d_{n-1},
// stored at the position of the later node; position 0 is zero.
struct ChainInputs {
    ImageGrid u;
    ImageGrid s;
};

inline ChainInputs extract_inputs(const LatentField& latent, Orientation orient) {
    const int h = latent.height(), w = latent.width(), c = latent.channels();
    ChainInputs out{ImageGrid(h, w, c, 0.0), ImageGrid(h, w, c, 0.0)};
    const ImageGrid& y = latent.y;
    const ImageGrid& d = orient == Orientation::row ? latent.d_row : latent.d_col;
    const ChainLayout chains = chain_view(h, w, orient);
    for (int chain = 0; chain < chains.count; ++chain) {
        for (int k = 1; k < chains.length; ++k) {
            const auto [i, j] = chains.node(chain, k);
            const auto [ip, jp] = chains.node(chain, k - 1);
            for (int ch = 0; ch < c; ++ch) {
                out.u.at(i, j, ch) = y.at(i, j, ch) - y.at(ip, jp, ch) - d.at(ip, jp, ch);
                out.s.at(i, j, ch) = d.at(i, j, ch) - d.at(ip, jp, ch);
            }
        }
    }
    return out;
}

// Euclidean norm across channels of one pixel.
inline double channel_norm2(const ImageGrid& g, int i, int j) {
    double acc = 0.0;
    for (int c = 0; c < g.channels; ++c) {
        const double v = g.at(i, j, c);
        acc += v * v;
    }
    return acc;
}

inline double channel_norm(const ImageGrid& g, int i, int j) {
    return std::sqrt(channel_norm2(g, i, j));
}

}  // namespace fgip
