#pragma once

#include <optional>
#include <utility>

#include "fgip/augmented.hpp"
#include "fgip/basic.hpp"
#include "fgip/metrics.hpp"
#include "fgip/model.hpp"
#include "fgip/noise.hpp"
#include "fgip/phi.hpp"

namespace fgip {

// Output of a denoising run plus the counters the CLI reports.
struct TaskRunInfo {
    ImageGrid output;
    int cycles = 0;                  // outer cycles across both passes
    long long cg_iterations = 0;     // CG iterations across both passes
};

namespace detail {

inline TaskRunInfo run_denoise(const ImageGrid& obs_image, const HyperParams& params,
                               bool use_augmented, const Field2D* per_pixel_variance) {
    params.validate();
    const double sz2 = params.sigma_z * params.sigma_z;
    ObservationField obs(obs_image,
                         per_pixel_variance ? *per_pixel_variance
                                            : Field2D(obs_image.height, obs_image.width, sz2));
    BasicEstimator basic(obs, params);
    basic.run();

    TaskRunInfo info;
    info.cycles = basic.cycles();
    info.cg_iterations = basic.cg_iterations_total();
    if (use_augmented) {
        const double szp = params.effective_sigma_z_prime();
        ObservationField obs_prime(obs_image, per_pixel_variance
                                                  ? *per_pixel_variance
                                                  : Field2D(obs_image.height, obs_image.width,
                                                            szp * szp));
        AugmentedRefiner refiner(obs_prime, basic.latent().y, params);
        refiner.run();
        info.cycles += refiner.cycles();
        info.cg_iterations += refiner.cg_iterations_total();
        info.output = refiner.output().clipped01();
    } else {
        info.output = basic.latent().y.clipped01();
    }
    return info;
}

}  // namespace detail

inline TaskRunInfo denoise_with_info(const ImageGrid& obs_image, const HyperParams& params,
                                     bool use_augmented = false,
                                     const std::optional<Field2D>& per_pixel_variance = {}) {
    return detail::run_denoise(obs_image, params, use_augmented,
                               per_pixel_variance ? &*per_pixel_variance : nullptr);
}

inline ImageGrid denoise(const ImageGrid& obs_image, const HyperParams& params,
                         bool use_augmented = false,
                         const std::optional<Field2D>& per_pixel_variance = {}) {
    return denoise_with_info(obs_image, params, use_augmented, per_pixel_variance).output;
}

// Per-pixel noise variance of scaled-Poisson plus Gaussian observations,
// using the observed intensity (channel mean, clamped to [0,1]) as the
// Poisson intensity proxy:  var_n = clamp(mean_c obs_n, 0, 1)/alpha + sigma_z^2.
inline Field2D poisson_gaussian_variance(const ImageGrid& obs_image, double alpha,
                                         double sigma_z) {
    if (!(alpha > 0.0) || !std::isfinite(alpha))
        throw ContractError("poisson_gaussian_variance: alpha must be positive and finite");
    Field2D var(obs_image.height, obs_image.width);
    for (int i = 0; i < obs_image.height; ++i)
        for (int j = 0; j < obs_image.width; ++j) {
            double mean = 0.0;
            for (int c = 0; c < obs_image.channels; ++c) mean += obs_image.at(i, j, c);
            mean /= obs_image.channels;
            mean = mean < 0.0 ? 0.0 : (mean > 1.0 ? 1.0 : mean);
            var.at(i, j) = mean / alpha + sigma_z * sigma_z;
        }
    return var;
}

inline TaskRunInfo denoise_poisson_gaussian_with_info(const ImageGrid& obs_image, double alpha,
                                                      const HyperParams& params,
                                                      bool use_augmented = false) {
    const Field2D var = poisson_gaussian_variance(obs_image, alpha, params.sigma_z);
    return detail::run_denoise(obs_image, params, use_augmented, &var);
}

inline ImageGrid denoise_poisson_gaussian(const ImageGrid& obs_image, double alpha,
                                          const HyperParams& params,
                                          bool use_augmented = false) {
    return denoise_poisson_gaussian_with_info(obs_image, alpha, params, use_augmented).output;
}

// Contrast enhancement: estimate the piecewise-smooth decomposition, remap
// every level step through phi (acting on the channel norm, keeping the
// direction), then re-solve the least-squares problem with the steps pinned
// to the remapped values and all scale fields frozen.
inline ImageGrid contrast_enhance(const ImageGrid& image, const HyperParams& params,
                                  const PhiSpec& phi) {
    params.validate();
    const double sz2 = params.sigma_z * params.sigma_z;
    ObservationField obs(image, sz2);
    BasicResult basic = estimate_basic(obs, params);

    auto remap = [&](const ImageGrid& u) {
        ImageGrid t(u.height, u.width, u.channels, 0.0);
        for (int i = 0; i < u.height; ++i)
            for (int j = 0; j < u.width; ++j) {
                const double n = channel_norm(u, i, j);
                if (n == 0.0) continue;
                const double scale = phi(n) / n;
                for (int c = 0; c < u.channels; ++c) t.at(i, j, c) = scale * u.at(i, j, c);
            }
        return t;
    };
    const ImageGrid target_row = remap(basic.u_row);
    const ImageGrid target_col = remap(basic.u_col);

    QuadraticProblem problem =
        build_level_pinned_operator(obs, basic.scales, basic.latent, target_row, target_col);
    CgResult cg = cg_solve(problem, params.cg_tol, params.cg_max_iters);
    LatentField latent =
        detail::unstack_latent(cg.solution, image.height, image.width, image.channels);
    return latent.y.clipped01();
}

// Inpainting: missing samples keep a token data weight (variance 100), so the
// smoothing model interpolates them from the surround.
inline TaskRunInfo inpaint_with_info(const ImageGrid& image, const Mask& mask,
                                     const HyperParams& params) {
    params.validate();
    if (mask.height != image.height || mask.width != image.width)
        throw ContractError("inpaint: mask shape must match the image");
    const std::size_t missing = mask.missing_count();
    if (missing * 2 > image.pixel_count())
        throw ContractError("inpaint: more than half of the image is masked");
    const double sz2 = params.sigma_z * params.sigma_z;
    Field2D var(image.height, image.width, sz2);
    for (int i = 0; i < image.height; ++i)
        for (int j = 0; j < image.width; ++j)
            if (mask.at(i, j)) var.at(i, j) = 100.0;
    return detail::run_denoise(image, params, /*use_augmented=*/false, &var);
}

inline ImageGrid inpaint(const ImageGrid& image, const Mask& mask, const HyperParams& params) {
    return inpaint_with_info(image, mask, params).output;
}

}  // namespace fgip
