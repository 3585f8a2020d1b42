#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "fgip/grid.hpp"

namespace fgip {

// Adds i.i.d. Gaussian noise of scale sigma and clips back to [0, 1].
// Samples are drawn in memory order, so a given seed is reproducible.
inline ImageGrid add_noise_gaussian(const ImageGrid& clean, double sigma, std::uint64_t seed) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma))
        throw ContractError("add_noise_gaussian: sigma must be non-negative and finite");
    ImageGrid out = clean;
    if (sigma == 0.0) return out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    for (double& v : out.samples) {
        v += noise(rng);
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    }
    return out;
}

// Scaled-Poisson plus Gaussian corruption: each sample becomes
//   Poisson(alpha * x) / alpha + N(0, sigma^2),
// clipped to [0, 1]. Larger alpha means more photons, i.e. less shot noise.
inline ImageGrid add_noise_poisson_gaussian(const ImageGrid& clean, double alpha, double sigma,
                                            std::uint64_t seed) {
    if (!(alpha > 0.0) || !std::isfinite(alpha))
        throw ContractError("add_noise_poisson_gaussian: alpha must be positive and finite");
    if (!(sigma >= 0.0) || !std::isfinite(sigma))
        throw ContractError("add_noise_poisson_gaussian: sigma must be non-negative and finite");
    ImageGrid out = clean;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double& v : out.samples) {
        double counts = 0.0;
        if (v > 0.0) {
            std::poisson_distribution<long> shot(alpha * v);
            counts = static_cast<double>(shot(rng));
        }
        v = counts / alpha + (sigma > 0.0 ? sigma * gauss(rng) : 0.0);
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    }
    return out;
}

}  // namespace fgip
