#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "fgip/nup.hpp"

namespace fgip {

// Posterior means of a scalar Gauss-Markov chain
//
//   r_k = r_{k-1} + Delta_k,  Delta_k ~ N(0, sigma_d2[k]),  k = 1..K-1,
//
// with an independent Gaussian observation of each node given in information
// form by incoming[k]; sigma_d2[0] pads the alignment and is never read.
// Exact inference: one sweep accumulates predictions from the left, one from
// the right, and each node fuses  unary + (left + right). Keeping the two
// predictions as a commutative pair makes chain reversal an exact (bit-level)
// mirror of the output. Flat incoming messages (weight 0) are fine as long as
// at least one node is anchored; sigma_d2 = 0 encodes a hard equality.
inline std::vector<double> smooth_chain(std::span<const GaussianMessage> incoming,
                                        std::span<const double> sigma_d2) {
    const std::size_t n = incoming.size();
    if (n == 0) throw ContractError("smooth_chain: empty chain");
    if (sigma_d2.size() != n)
        throw ContractError("smooth_chain: need one sigma_d2 entry per node (entry 0 unused)");
    for (std::size_t k = 0; k < n; ++k) {
        if (!(incoming[k].weight >= 0.0) || !std::isfinite(incoming[k].weight) ||
            !std::isfinite(incoming[k].weighted_mean))
            throw ContractError("smooth_chain: incoming messages must be finite with weight >= 0");
        if (k > 0 && (!(sigma_d2[k] >= 0.0) || !std::isfinite(sigma_d2[k])))
            throw ContractError("smooth_chain: sigma_d2 must be finite and non-negative");
    }

    // Step a filtered message (weight w, weighted mean xi) through one
    // increment of variance s2; a flat message stays flat.
    auto predict = [](double w, double xi, double s2, double& pw, double& pxi) {
        if (w > 0.0) {
            const double v = 1.0 / w + s2;
            pw = 1.0 / v;
            pxi = pw * (xi / w);
        } else {
            pw = 0.0;
            pxi = 0.0;
        }
    };

    // Left predictions: everything at nodes < k, seen through the increments.
    std::vector<double> lw(n), lxi(n);
    lw[0] = 0.0;
    lxi[0] = 0.0;
    for (std::size_t k = 1; k < n; ++k)
        predict(lw[k - 1] + incoming[k - 1].weight, lxi[k - 1] + incoming[k - 1].weighted_mean,
                sigma_d2[k], lw[k], lxi[k]);

    // Right predictions and fusion, in one backward sweep.
    std::vector<double> out(n);
    double rw = 0.0, rxi = 0.0;
    for (std::size_t k = n; k-- > 0;) {
        const double w = incoming[k].weight + (lw[k] + rw);
        if (!(w > 0.0))
            throw NumericError("smooth_chain: chain is unanchored (no informative message)");
        out[k] = (incoming[k].weighted_mean + (lxi[k] + rxi)) / w;
        if (k == 0) break;
        predict(incoming[k].weight + rw, incoming[k].weighted_mean + rxi, sigma_d2[k], rw, rxi);
    }
    return out;
}

// Refits the increment scales to a smoothed chain: element k-1 of the result
// is the scale for the step from node k-1 to node k.
inline std::vector<double> refresh_sigma_delta(std::span<const double> r, double beta_delta,
                                               double p) {
    if (r.empty()) throw ContractError("refresh_sigma_delta: empty chain");
    std::vector<double> out;
    out.reserve(r.size() - 1);
    for (std::size_t k = 1; k < r.size(); ++k)
        out.push_back(update_sigma_delta(std::abs(r[k] - r[k - 1]), beta_delta, p));
    return out;
}

}  // namespace fgip
