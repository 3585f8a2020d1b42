#pragma once

#include <cmath>
#include <limits>

#include "fgip/grid.hpp"
#include "fgip/parallel.hpp"

namespace fgip {

// Peak signal-to-noise ratio in dB for unit-range images; identical inputs
// give +infinity. The mean squared error is accumulated with the fixed-order
// grid reduction, so the value is reproducible bit for bit.
inline double psnr(const ImageGrid& a, const ImageGrid& b) {
    if (!a.same_shape(b)) throw ContractError("psnr: image shapes must match");
    GridReducer reducer(a.height, a.width);
    const double sq = reducer.sum([&](int i, int j) {
        double acc = 0.0;
        for (int c = 0; c < a.channels; ++c) {
            const double d = a.at(i, j, c) - b.at(i, j, c);
            acc += d * d;
        }
        return acc;
    });
    const double mse = sq / static_cast<double>(a.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

}  // namespace fgip
