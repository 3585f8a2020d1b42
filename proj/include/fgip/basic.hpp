#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "fgip/chain_smoother.hpp"
#include "fgip/model.hpp"
#include "fgip/operators.hpp"

namespace fgip {

// Per-pixel magnitudes of the recovered level steps: one map per orientation
// plus their Euclidean combination. Values are raw step norms, not rescaled.
struct EdgeMaps {
    Field2D row;
    Field2D col;
    Field2D combined;
};

inline EdgeMaps edge_maps(const ImageGrid& u_row, const ImageGrid& u_col) {
    if (!u_row.same_shape(u_col)) throw ContractError("edge_maps: step grids must share one shape");
    const int h = u_row.height, w = u_row.width;
    EdgeMaps maps{Field2D(h, w), Field2D(h, w), Field2D(h, w)};
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            const double a = channel_norm(u_row, i, j);
            const double b = channel_norm(u_col, i, j);
            maps.row.at(i, j) = a;
            maps.col.at(i, j) = b;
            maps.combined.at(i, j) = std::sqrt(a * a + b * b);
        }
    return maps;
}

// Rescales a non-negative map so its maximum is 1 (all-zero stays all-zero);
// handy before writing edge maps as images.
inline Field2D normalized_to_unit_max(const Field2D& f) {
    double mx = 0.0;
    for (double v : f.samples) mx = std::max(mx, v);
    Field2D out = f;
    if (mx > 0.0)
        for (double& v : out.samples) v /= mx;
    return out;
}

struct BasicResult {
    LatentField latent;
    ChainScales scales;
    ImageGrid u_row, u_col;  // level steps of the final latent state
    int cycles = 0;
    long long cg_iterations = 0;
    bool converged = false;
};

// First pass: joint MAP estimate of levels and slopes with locally refitted
// scales. Each cycle runs
//   (1) CG on the quadratic objective at the current scales,
//   (2) level-step scale refresh from the new steps,
//   (3) per-chain smoothing of the slope-noise scale factors, linearized at
//       the factors of the previous cycle,
//   (4) scale-increment refresh from the smoothed factors.
// Exposed as a class so callers can run cycles one at a time.
class BasicEstimator {
public:
    BasicEstimator(ObservationField obs, HyperParams params)
        : obs_(std::move(obs)), params_(std::move(params)) {
        params_.validate();
        latent_ = LatentField(obs_.values);  // levels start at the observation, slopes at zero
        scales_ = ChainScales::initial(obs_.height(), obs_.width(), params_, params_.init_r_basic);
    }

    void step() {
        const int h = obs_.height(), w = obs_.width();

        QuadraticProblem problem = build_latent_operator(obs_, scales_, latent_);
        CgResult cg = cg_solve(problem, params_.cg_tol, params_.cg_max_iters);
        cg_iterations_ += cg.iterations;
        LatentField next = detail::unstack_latent(cg.solution, h, w, obs_.channels());
        last_change_ = relative_level_change(latent_.y, next.y);
        latent_ = std::move(next);

        ChainInputs row_in = extract_inputs(latent_, Orientation::row);
        ChainInputs col_in = extract_inputs(latent_, Orientation::col);
        refresh_level_scales(row_in.u, scales_.sigma_u2_row, Orientation::row);
        refresh_level_scales(col_in.u, scales_.sigma_u2_col, Orientation::col);
        smooth_scale_factors(row_in.s, scales_.r_row, scales_.sigma_d2_row, Orientation::row);
        smooth_scale_factors(col_in.s, scales_.r_col, scales_.sigma_d2_col, Orientation::col);
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

    const LatentField& latent() const { return latent_; }
    const ChainScales& scales() const { return scales_; }
    const ObservationField& observation() const { return obs_; }
    int cycles() const { return cycles_; }
    long long cg_iterations_total() const { return cg_iterations_; }
    double last_relative_change() const { return last_change_; }
    bool converged() const { return converged_; }

    BasicResult result() const {
        BasicResult out;
        out.latent = latent_;
        out.scales = scales_;
        out.u_row = extract_inputs(latent_, Orientation::row).u;
        out.u_col = extract_inputs(latent_, Orientation::col).u;
        out.cycles = cycles_;
        out.cg_iterations = cg_iterations_;
        out.converged = converged_;
        return out;
    }

private:
    double relative_level_change(const ImageGrid& before, const ImageGrid& after) {
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

    void refresh_level_scales(const ImageGrid& u, Field2D& sigma_u2, Orientation orient) {
        const ChainLayout chains = chain_view(u.height, u.width, orient);
        parallel_for(0, chains.count, [&](int chain) {
            for (int k = 1; k < chains.length; ++k) {
                const auto [i, j] = chains.node(chain, k);
                sigma_u2.at(i, j) = update_sigma_u(channel_norm(u, i, j), params_.beta, params_.p);
            }
        });
    }

    // Steps (3) and (4) for one orientation: Gaussian messages from the slope
    // increments (linearized at the previous factors), one smoothing sweep per
    // chain, then the increment-scale refresh along the smoothed chain.
    void smooth_scale_factors(const ImageGrid& s, Field2D& r, Field2D& sigma_d2,
                              Orientation orient) {
        const ChainLayout chains = chain_view(s.height, s.width, orient);
        const int steps = chains.length - 1;  // nodes 1..length-1 carry increments
        parallel_for(0, chains.count, [&](int chain) {
            std::vector<GaussianMessage> incoming(steps);
            std::vector<double> sd2(steps);
            for (int k = 1; k < chains.length; ++k) {
                const auto [i, j] = chains.node(chain, k);
                incoming[k - 1] =
                    r_backward_message(channel_norm2(s, i, j), r.at(i, j), params_.message_variant,
                                       params_.beta_n, s.channels, params_.eps_floor);
                sd2[k - 1] = sigma_d2.at(i, j);  // entry for k = 1 is ignored by the smoother
            }
            std::vector<double> smoothed = smooth_chain(incoming, sd2);
            for (int k = 1; k < chains.length; ++k) {
                const auto [i, j] = chains.node(chain, k);
                r.at(i, j) = std::clamp(smoothed[k - 1], params_.eps_floor, kScaleCap);
            }
            const auto [i0, j0] = chains.node(chain, 0);
            r.at(i0, j0) = r.at(chains.node(chain, 1).first, chains.node(chain, 1).second);
            std::vector<double> sd2_new =
                refresh_sigma_delta(std::span<const double>(smoothed), params_.beta_delta, params_.p);
            for (int k = 2; k < chains.length; ++k) {
                const auto [i, j] = chains.node(chain, k);
                sigma_d2.at(i, j) = sd2_new[k - 2];
            }
        });
    }

    ObservationField obs_;
    HyperParams params_;
    LatentField latent_;
    ChainScales scales_;
    int cycles_ = 0;
    long long cg_iterations_ = 0;
    double last_change_ = std::numeric_limits<double>::infinity();
    bool converged_ = false;
};

inline BasicResult estimate_basic(const ObservationField& obs, const HyperParams& params) {
    BasicEstimator estimator(obs, params);
    estimator.run();
    return estimator.result();
}

}  // namespace fgip
