#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "fgip/chain_smoother.hpp"
#include "fgip/model.hpp"
#include "fgip/operators.hpp"

namespace fgip {

// Precision-weighted blend of a smoothed image with the raw observation,
//   y' = (r^2 y_hat + obs / var) / (r^2 + 1 / var),
// where large scale factors r trust the smoothed background and small ones
// let the observed detail back through.
inline ImageGrid blend_with_observation(const ImageGrid& y_hat, const ObservationField& obs,
                                        const Field2D& r) {
    if (!y_hat.same_shape(obs.values))
        throw ContractError("blend_with_observation: image shape mismatch");
    if (r.height != y_hat.height || r.width != y_hat.width)
        throw ContractError("blend_with_observation: scale field shape mismatch");
    ImageGrid out(y_hat.height, y_hat.width, y_hat.channels);
    parallel_for(0, y_hat.height, [&](int i) {
        for (int j = 0; j < y_hat.width; ++j) {
            const double rr = std::min(std::abs(r.at(i, j)), kScaleCap);
            const double wb = rr * rr;                                          // background
            const double wo = detail::weight_from_scale2(obs.variance.at(i, j));  // observation
            const double inv = 1.0 / (wb + wo);
            for (int c = 0; c < y_hat.channels; ++c)
                out.at(i, j, c) = (wb * y_hat.at(i, j, c) + wo * obs.values.at(i, j, c)) * inv;
        }
    });
    return out;
}

struct AugmentedResult {
    ImageGrid output;  // blended levels of the final cycle
    Field2D r_field;
    Field2D sigma_d2_row, sigma_d2_col;
    int cycles = 0;
    long long cg_iterations = 0;
    bool converged = false;
};

// Second pass: re-admits observed detail that the first pass flattened. The
// scale factors now live on a planar first-order model coupled along both
// orientations. Each cycle runs
//   (1) the precision-weighted blend above,
//   (2) per-pixel Gaussian messages for r from the deviation y' - y_hat,
//       linearized at the previous factors,
//   (3) CG on the planar scale-field objective,
//   (4) increment-scale refresh along rows and columns.
class AugmentedRefiner {
public:
    AugmentedRefiner(ObservationField obs, ImageGrid y_hat, HyperParams params)
        : obs_(std::move(obs)), y_hat_(std::move(y_hat)), params_(std::move(params)) {
        params_.validate();
        if (!y_hat_.same_shape(obs_.values))
            throw ContractError("AugmentedRefiner: smoothed image shape mismatch");
        if (!y_hat_.all_finite())
            throw ContractError("AugmentedRefiner: smoothed image must be finite");
        const int h = obs_.height(), w = obs_.width();
        r_ = Field2D(h, w, params_.init_r_augmented);
        const double sd2 = params_.init_sigma_delta * params_.init_sigma_delta;
        sigma_d2_row_ = Field2D(h, w, sd2);
        sigma_d2_col_ = Field2D(h, w, sd2);
        blended_ = y_hat_;
    }

    void step() {
        const int h = obs_.height(), w = obs_.width();

        ImageGrid next = blend_with_observation(y_hat_, obs_, r_);
        last_change_ = relative_change(blended_, next);
        blended_ = std::move(next);

        Field2D unary_w(h, w), unary_xi(h, w);
        parallel_for(0, h, [&](int i) {
            for (int j = 0; j < w; ++j) {
                double s2 = 0.0;
                for (int c = 0; c < blended_.channels; ++c) {
                    const double s = blended_.at(i, j, c) - y_hat_.at(i, j, c);
                    s2 += s * s;
                }
                const GaussianMessage msg =
                    r_backward_message(s2, r_.at(i, j), params_.message_variant, params_.beta_n,
                                       blended_.channels, params_.eps_floor);
                unary_w.at(i, j) = msg.weight;
                unary_xi.at(i, j) = msg.weighted_mean;
            }
        });

        QuadraticProblem problem =
            build_r_field_operator(unary_w, unary_xi, sigma_d2_row_, sigma_d2_col_, r_);
        CgResult cg = cg_solve(problem, params_.cg_tol, params_.cg_max_iters);
        cg_iterations_ += cg.iterations;
        for (std::size_t k = 0; k < r_.samples.size(); ++k)
            r_.samples[k] = std::clamp(cg.solution[k], params_.eps_floor, kScaleCap);

        parallel_for(0, h, [&](int i) {
            for (int j = 1; j < w; ++j)
                sigma_d2_row_.at(i, j) = update_sigma_delta(
                    std::abs(r_.at(i, j) - r_.at(i, j - 1)), params_.beta_delta, params_.p);
        });
        parallel_for(0, w, [&](int j) {
            for (int i = 1; i < h; ++i)
                sigma_d2_col_.at(i, j) = update_sigma_delta(
                    std::abs(r_.at(i, j) - r_.at(i - 1, j)), params_.beta_delta, params_.p);
        });
        ++cycles_;
    }

    int run() {
        for (int i = 0; i < params_.iterations; ++i) {
            step();
            if (params_.convergence_tol > 0.0 && last_change_ <= params_.convergence_tol) {
                converged_ = true;
                break;
            }
        }
        return cycles_;
    }

    const ImageGrid& output() const { return blended_; }
    const Field2D& r_field() const { return r_; }
    int cycles() const { return cycles_; }
    long long cg_iterations_total() const { return cg_iterations_; }
    double last_relative_change() const { return last_change_; }
    bool converged() const { return converged_; }

    AugmentedResult result() const {
        return {blended_,        r_,      sigma_d2_row_, sigma_d2_col_,
                cycles_, cg_iterations_, converged_};
    }

private:
    double relative_change(const ImageGrid& before, const ImageGrid& after) {
        GridReducer reducer(before.height, before.width);
        const double diff2 = reducer.sum([&](int i, int j) {
            double acc = 0.0;
            for (int c = 0; c < before.channels; ++c) {
                const double d = after.at(i, j, c) - before.at(i, j, c);
                acc += d * d;
            }
            return acc;
        });
        const double base2 = reducer.sum([&](int i, int j) {
            double acc = 0.0;
            for (int c = 0; c < before.channels; ++c) acc += before.at(i, j, c) * before.at(i, j, c);
            return acc;
        });
        return std::sqrt(diff2) / std::max(std::sqrt(base2), 1e-30);
    }

    ObservationField obs_;
    ImageGrid y_hat_;
    HyperParams params_;
    Field2D r_;
    Field2D sigma_d2_row_, sigma_d2_col_;
    ImageGrid blended_;
    int cycles_ = 0;
    long long cg_iterations_ = 0;
    double last_change_ = std::numeric_limits<double>::infinity();
    bool converged_ = false;
};

inline AugmentedResult refine_augmented(const ObservationField& obs, const ImageGrid& y_hat,
                                        const HyperParams& params) {
    AugmentedRefiner refiner(obs, y_hat, params);
    refiner.run();
    return refiner.result();
}

}  // namespace fgip
