#pragma once

#include <cmath>
#include <string>

#include "fgip/common.hpp"

namespace fgip {

// Scalar Gaussian message in information form: weight W = 1/V and weighted
// mean xi = m/V. W = 0 is the flat (non-informative) message.
struct GaussianMessage {
    double weight = 0.0;
    double weighted_mean = 0.0;

    static GaussianMessage from_mean_variance(double mean, double variance) {
        if (!(variance > 0.0)) throw ContractError("GaussianMessage: variance must be positive");
        return {1.0 / variance, mean / variance};
    }

    double mean() const { return weighted_mean / weight; }
    double variance() const { return 1.0 / weight; }
};

namespace detail {
inline void check_sparsity_params(double coeff, double p, const char* name) {
    if (!(coeff > 0.0) || !std::isfinite(coeff))
        throw ContractError(std::string(name) + ": coefficient must be positive and finite");
    if (!(p > 0.0 && p <= 2.0)) throw ContractError(std::string(name) + ": p must lie in (0, 2]");
}
}  // namespace detail

// Maximizing the scale of a zero-mean Gaussian against the sparsity penalty
// beta*|u|^p gives the closed-form scale  sigma^2 = |u|^(2-p) / (beta p).
// Exactly zero input yields exactly zero scale (handled as a capped weight by
// the quadratic solvers).
inline double update_sigma_u(double u_norm, double beta, double p) {
    detail::check_sparsity_params(beta, p, "update_sigma_u");
    if (!(u_norm >= 0.0)) throw ContractError("update_sigma_u: norm must be non-negative");
    if (u_norm == 0.0) return 0.0;
    return std::pow(u_norm, 2.0 - p) / (beta * p);
}

// Same rule for increments of the slope-noise scale field.
inline double update_sigma_delta(double delta_norm, double beta_delta, double p) {
    detail::check_sparsity_params(beta_delta, p, "update_sigma_delta");
    if (!(delta_norm >= 0.0)) throw ContractError("update_sigma_delta: norm must be non-negative");
    if (delta_norm == 0.0) return 0.0;
    return std::pow(delta_norm, 2.0 - p) / (beta_delta * p);
}

enum class MessageVariant { lukaj, mlsp };

inline MessageVariant parse_message_variant(const std::string& s) {
    if (s == "lukaj") return MessageVariant::lukaj;
    if (s == "mlsp") return MessageVariant::mlsp;
    throw ContractError("unknown message variant '" + s + "' (expected lukaj or mlsp)");
}

// Backward Gaussian message for the scale factor r seen through the node
// |r|^m * exp(-r^2 |s|^2 / 2), linearized at the previous estimate r_hat.
//
//   lukaj:  m = |r_hat|^-1 |s|^-2,            V = |s|^-2
//   mlsp :  m = beta_n * V,                   V = (|s|^2 - r_hat^-2 + beta_n/|r_hat|)^-1
//
// mlsp with beta_n = |r_hat|^-1 coincides with lukaj. The channel count enters
// the node only through its exponent m and cancels from both variants; the
// parameter is kept for interface fidelity.
inline GaussianMessage r_backward_message(double s_norm2, double r_hat, MessageVariant variant,
                                          double beta_n, int m_channels, double eps_floor = 1e-12) {
    if (!(s_norm2 >= 0.0) || !std::isfinite(s_norm2))
        throw ContractError("r_backward_message: |s|^2 must be finite and non-negative");
    if (!(std::abs(r_hat) > 0.0) || !std::isfinite(r_hat))
        throw ContractError("r_backward_message: r_hat must be finite and nonzero");
    if (m_channels != 1 && m_channels != 3)
        throw ContractError("r_backward_message: channel count must be 1 or 3");
    if (!(eps_floor > 0.0)) throw ContractError("r_backward_message: eps_floor must be positive");

    const double abs_r = std::abs(r_hat);
    if (variant == MessageVariant::lukaj) {
        const double w = s_norm2 > eps_floor ? s_norm2 : eps_floor;  // weight = |s|^2, floored
        return {w, 1.0 / abs_r};                                     // xi = W * m = 1/|r_hat|
    }
    if (!(beta_n > 0.0)) throw ContractError("r_backward_message: beta_n must be positive");
    // |s|^2 and 1/r_hat^2 can cancel almost completely, so a plain evaluation
    // of |s|^2 - r_hat^-2 + beta_n/|r_hat| loses up to half an ulp of the
    // large terms. Carry the exact low-order parts of the square and the two
    // divisions (fma residuals) and fold them back in at the end.
    const double r2 = r_hat * r_hat;
    const double r2_lo = std::fma(r_hat, r_hat, -r2);  // r_hat^2 = r2 + r2_lo
    const double inv = 1.0 / r2;
    const double inv_lo = -inv * (std::fma(inv, r2, -1.0) + inv * r2_lo);
    const double b = beta_n / abs_r;
    const double b_lo = -std::fma(b, abs_r, -beta_n) / abs_r;

    auto two_sum = [](double a, double c, double& err) {
        const double s = a + c;
        const double z = s - a;
        err = (a - (s - z)) + (c - z);
        return s;
    };
    double e1, e2;
    const double d1 = two_sum(s_norm2, -inv, e1);
    const double d2 = two_sum(d1, b, e2);
    const double inv_v = d2 + (((e1 + e2) - inv_lo) + b_lo);
    if (!(inv_v > 0.0))
        throw NumericError("r_backward_message: mlsp variance is not positive (|s|^2 = " +
                           std::to_string(s_norm2) + ", r_hat = " + std::to_string(r_hat) + ")");
    return {inv_v, beta_n};  // xi = W * (beta_n * V) = beta_n
}

}  // namespace fgip
