#pragma once

#include <cmath>
#include <optional>

#include "fgip/common.hpp"
#include "fgip/nup.hpp"

namespace fgip {

// One bag of knobs for both estimation passes. Only sigma_z is mandatory; the
// remaining defaults are the values the estimators were tuned with. beta and
// beta_delta come from the grid search in tools/fgip_calibrate.cpp.
struct HyperParams {
    double sigma_z = 0.0;  // observation noise scale, must be set > 0

    double p = 0.3;            // sparsity exponent of the level/scale priors
    double beta = 7.0;        // weight of the level-step prior
    double beta_delta = 1.0;  // weight of the scale-increment prior
    int iterations = 5;        // outer cycles per pass

    double init_sigma_u = 0.1;       // initial level-step scale
    double init_r_basic = 500.0;     // initial slope-noise scale factor (first pass)
    double init_r_augmented = 60.0;  // initial scale factor (refinement pass)
    double init_sigma_delta = 10.0;  // initial scale-increment scale

    // Noise scale used by the refinement pass when blending the observation
    // back in; defaults to sigma_z.
    std::optional<double> sigma_z_prime;

    MessageVariant message_variant = MessageVariant::lukaj;
    double beta_n = 1.0;  // exponential prior weight, mlsp variant only

    // Inner-solver stopping: relative residual target and a per-solve
    // iteration budget. The budget is what bounds the wall time of large
    // runs; accuracy studies on small inputs should raise it instead of
    // relying on the default.
    double cg_tol = 1e-8;
    int cg_max_iters = 200;
    double eps_floor = 1e-12;

    // Relative-change threshold for stopping outer cycles early; 0 disables.
    double convergence_tol = 0.0;

    double effective_sigma_z_prime() const { return sigma_z_prime.value_or(sigma_z); }

    void validate() const {
        auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
        if (!positive(sigma_z)) throw ContractError("HyperParams: sigma_z must be positive");
        if (!(p > 0.0 && p <= 2.0)) throw ContractError("HyperParams: p must lie in (0, 2]");
        if (!positive(beta)) throw ContractError("HyperParams: beta must be positive");
        if (!positive(beta_delta)) throw ContractError("HyperParams: beta_delta must be positive");
        if (iterations < 1) throw ContractError("HyperParams: iterations must be at least 1");
        if (!positive(init_sigma_u)) throw ContractError("HyperParams: init_sigma_u must be positive");
        if (!positive(init_r_basic)) throw ContractError("HyperParams: init_r_basic must be positive");
        if (!positive(init_r_augmented))
            throw ContractError("HyperParams: init_r_augmented must be positive");
        if (!positive(init_sigma_delta))
            throw ContractError("HyperParams: init_sigma_delta must be positive");
        if (sigma_z_prime && !positive(*sigma_z_prime))
            throw ContractError("HyperParams: sigma_z_prime must be positive");
        if (!positive(beta_n)) throw ContractError("HyperParams: beta_n must be positive");
        if (!positive(cg_tol)) throw ContractError("HyperParams: cg_tol must be positive");
        if (cg_max_iters < 1) throw ContractError("HyperParams: cg_max_iters must be at least 1");
        if (!positive(eps_floor)) throw ContractError("HyperParams: eps_floor must be positive");
        if (!(convergence_tol >= 0.0) || !std::isfinite(convergence_tol))
            throw ContractError("HyperParams: convergence_tol must be non-negative");
    }
};

}  // namespace fgip
