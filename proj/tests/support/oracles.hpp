#pragma once

// Dense reference solvers assembled independently from first principles.
// These define the ground truth the matrix-free code is tested against.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "fgip/grid.hpp"
#include "fgip/model.hpp"
#include "fgip/nup.hpp"

namespace oracles {

inline double capped_weight(double scale2) {
    if (!(scale2 > 0.0)) return 1e12;
    return std::min(1.0 / scale2, 1e12);
}

inline double capped_r_weight(double r) {
    const double re = std::min(std::abs(r), 1e6);
    return re * re;
}

// Posterior mean of a scalar chain with unary factors (W, xi) and pairwise
// factors N(r_k - r_{k-1}; 0, sd2[k]); requires sd2 > 0 for k >= 1.
inline std::vector<double> dense_chain_posterior(const std::vector<fgip::GaussianMessage>& msgs,
                                                 const std::vector<double>& sd2) {
    const int n = static_cast<int>(msgs.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < n; ++k) {
        A(k, k) += msgs[k].weight;
        b(k) += msgs[k].weighted_mean;
    }
    for (int k = 1; k < n; ++k) {
        const double w = 1.0 / sd2[k];
        A(k, k) += w;
        A(k - 1, k - 1) += w;
        A(k, k - 1) -= w;
        A(k - 1, k) -= w;
    }
    Eigen::VectorXd x = A.ldlt().solve(b);
    return {x.data(), x.data() + n};
}

// Index helpers matching the documented stacked-latent layout.
struct LatentIndex {
    int h, w, c;
    int field() const { return h * w * c; }
    int y(int i, int j, int ch) const { return (i * w + j) * c + ch; }
    int dr(int i, int j, int ch) const { return field() + (i * w + j) * c + ch; }
    int dc(int i, int j, int ch) const { return 2 * field() + (i * w + j) * c + ch; }
};

struct DenseLatent {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
};

// Hessian and rhs of
//   J = sum_n,ch wz_n/2 (y - obs)^2
//     + sum_row-chains sum_{k>=1} [wu/2 u^2 + ws/2 s^2]   (u, s per channel)
//     + same along columns,
// with u = y_k - y_{k-1} - d_{k-1}, s = d_k - d_{k-1}.
inline DenseLatent assemble_dense_latent(const fgip::ObservationField& obs,
                                         const fgip::ChainScales& scales) {
    const int h = obs.height(), w = obs.width(), c = obs.channels();
    const LatentIndex ix{h, w, c};
    const int dim = 3 * ix.field();
    DenseLatent out{Eigen::MatrixXd::Zero(dim, dim), Eigen::VectorXd::Zero(dim)};

    auto add_rank1 = [&](const std::vector<std::pair<int, double>>& g, double weight) {
        for (const auto& [a, ga] : g)
            for (const auto& [bidx, gb] : g) out.A(a, bidx) += weight * ga * gb;
    };

    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            const double wz = capped_weight(obs.variance.at(i, j));
            for (int ch = 0; ch < c; ++ch) {
                out.A(ix.y(i, j, ch), ix.y(i, j, ch)) += wz;
                out.b(ix.y(i, j, ch)) += wz * obs.values.at(i, j, ch);
            }
        }
    for (int i = 0; i < h; ++i)
        for (int j = 1; j < w; ++j) {
            const double wu = capped_weight(scales.sigma_u2_row.at(i, j));
            const double ws = capped_r_weight(scales.r_row.at(i, j));
            for (int ch = 0; ch < c; ++ch) {
                add_rank1({{ix.y(i, j, ch), 1.0}, {ix.y(i, j - 1, ch), -1.0},
                           {ix.dr(i, j - 1, ch), -1.0}},
                          wu);
                add_rank1({{ix.dr(i, j, ch), 1.0}, {ix.dr(i, j - 1, ch), -1.0}}, ws);
            }
        }
    for (int j = 0; j < w; ++j)
        for (int i = 1; i < h; ++i) {
            const double wu = capped_weight(scales.sigma_u2_col.at(i, j));
            const double ws = capped_r_weight(scales.r_col.at(i, j));
            for (int ch = 0; ch < c; ++ch) {
                add_rank1({{ix.y(i, j, ch), 1.0}, {ix.y(i - 1, j, ch), -1.0},
                           {ix.dc(i - 1, j, ch), -1.0}},
                          wu);
                add_rank1({{ix.dc(i, j, ch), 1.0}, {ix.dc(i - 1, j, ch), -1.0}}, ws);
            }
        }
    return out;
}

inline std::vector<double> dense_latent_solve(const fgip::ObservationField& obs,
                                              const fgip::ChainScales& scales) {
    DenseLatent d = assemble_dense_latent(obs, scales);
    Eigen::VectorXd x = d.A.ldlt().solve(d.b);
    return {x.data(), x.data() + x.size()};
}

// The same objective evaluated directly (for descent and gradient checks).
inline double latent_objective(const fgip::ObservationField& obs, const fgip::ChainScales& scales,
                               const std::vector<double>& x) {
    const int h = obs.height(), w = obs.width(), c = obs.channels();
    const LatentIndex ix{h, w, c};
    double j2 = 0.0;
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            const double wz = capped_weight(obs.variance.at(i, j));
            for (int ch = 0; ch < c; ++ch) {
                const double d = x[ix.y(i, j, ch)] - obs.values.at(i, j, ch);
                j2 += wz * d * d;
            }
        }
    for (int i = 0; i < h; ++i)
        for (int j = 1; j < w; ++j) {
            const double wu = capped_weight(scales.sigma_u2_row.at(i, j));
            const double ws = capped_r_weight(scales.r_row.at(i, j));
            for (int ch = 0; ch < c; ++ch) {
                const double u =
                    x[ix.y(i, j, ch)] - x[ix.y(i, j - 1, ch)] - x[ix.dr(i, j - 1, ch)];
                const double s = x[ix.dr(i, j, ch)] - x[ix.dr(i, j - 1, ch)];
                j2 += wu * u * u + ws * s * s;
            }
        }
    for (int j = 0; j < w; ++j)
        for (int i = 1; i < h; ++i) {
            const double wu = capped_weight(scales.sigma_u2_col.at(i, j));
            const double ws = capped_r_weight(scales.r_col.at(i, j));
            for (int ch = 0; ch < c; ++ch) {
                const double u =
                    x[ix.y(i, j, ch)] - x[ix.y(i - 1, j, ch)] - x[ix.dc(i - 1, j, ch)];
                const double s = x[ix.dc(i, j, ch)] - x[ix.dc(i - 1, j, ch)];
                j2 += wu * u * u + ws * s * s;
            }
        }
    return 0.5 * j2;
}

// Dense solve of the planar scale-field problem with the capped increment
// weights the operator documents.
inline std::vector<double> dense_r_field_solve(const fgip::Field2D& unary_w,
                                               const fgip::Field2D& unary_xi,
                                               const fgip::Field2D& sd2_row,
                                               const fgip::Field2D& sd2_col) {
    const int h = unary_w.height, w = unary_w.width;
    const int dim = h * w;
    auto at = [&](int i, int j) { return i * w + j; };
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            A(at(i, j), at(i, j)) += unary_w.at(i, j);
            b(at(i, j)) += unary_xi.at(i, j);
        }
    for (int i = 0; i < h; ++i)
        for (int j = 1; j < w; ++j) {
            const double wd = capped_weight(sd2_row.at(i, j));
            A(at(i, j), at(i, j)) += wd;
            A(at(i, j - 1), at(i, j - 1)) += wd;
            A(at(i, j), at(i, j - 1)) -= wd;
            A(at(i, j - 1), at(i, j)) -= wd;
        }
    for (int j = 0; j < w; ++j)
        for (int i = 1; i < h; ++i) {
            const double wd = capped_weight(sd2_col.at(i, j));
            A(at(i, j), at(i, j)) += wd;
            A(at(i - 1, j), at(i - 1, j)) += wd;
            A(at(i, j), at(i - 1, j)) -= wd;
            A(at(i - 1, j), at(i, j)) -= wd;
        }
    Eigen::VectorXd x = A.ldlt().solve(b);
    return {x.data(), x.data() + dim};
}

// High-precision scalar references for the closed-form scale updates and the
// backward messages, evaluated in long double.
inline long double sigma_update_ref(long double norm, long double coeff, long double p) {
    if (norm == 0.0L) return 0.0L;
    return std::pow(norm, 2.0L - p) / (coeff * p);
}

struct MessageRef {
    long double weight;
    long double weighted_mean;
};

inline MessageRef lukaj_ref(long double s2, long double r_hat, long double eps_floor = 1e-12L) {
    const long double w = s2 > eps_floor ? s2 : eps_floor;
    return {w, 1.0L / std::abs(r_hat)};
}

inline MessageRef mlsp_ref(long double s2, long double r_hat, long double beta_n) {
    const long double inv_v = s2 - 1.0L / (r_hat * r_hat) + beta_n / std::abs(r_hat);
    return {inv_v, beta_n};
}

}  // namespace oracles
