#pragma once

#include <algorithm>
#include <memory>
#include <vector>

#include "fgip/cg.hpp"
#include "fgip/model.hpp"
#include "fgip/parallel.hpp"

namespace fgip {

namespace detail {

// Precision of a scale: 1/scale^2 value, capped so that a vanished scale still
// yields a finite, symmetric positive definite quadratic form.
inline double weight_from_scale2(double scale2) {
    if (!(scale2 > 0.0)) return kWeightCap;
    const double w = 1.0 / scale2;
    return w < kWeightCap ? w : kWeightCap;
}

// Flat layout of the stacked latent vector [levels | row slopes | col slopes],
// each block row-major with interleaved channels.
struct LatentLayout {
    int h = 0, w = 0, c = 0;
    std::size_t field = 0;  // samples per block

    LatentLayout() = default;
    LatentLayout(int h_, int w_, int c_)
        : h(h_), w(w_), c(c_), field(static_cast<std::size_t>(h_) * w_ * c_) {}

    std::size_t dim() const { return 3 * field; }
};

// Accumulates the gradient of the chain terms
//   sum_{k>=1} wu_k/2 * (v_k - v_{k-1} - d_{k-1})^2 + ws_k/2 * (d_k - d_{k-1})^2
// for one chain into vbuf/dbuf. Node k of channel ch lives at
// base + k*step + ch in the value arrays and at wbase + k*wstep in the weight
// fields. Iteration order is fixed (k ascending, channels inner), so a column
// pass of a transposed problem replays a row pass bit for bit.
inline void chain_quadratic_accumulate(const double* v, const double* d, double* vbuf,
                                       double* dbuf, const double* wu, const double* ws,
                                       std::size_t base, std::size_t step, std::size_t wbase,
                                       std::size_t wstep, int len, int channels) {
    for (int k = 1; k < len; ++k) {
        const double wu_k = wu[wbase + static_cast<std::size_t>(k) * wstep];
        const double ws_k = ws[wbase + static_cast<std::size_t>(k) * wstep];
        const std::size_t at = base + static_cast<std::size_t>(k) * step;
        const std::size_t prev = at - step;
        for (int ch = 0; ch < channels; ++ch) {
            const double gu = wu_k * (v[at + ch] - v[prev + ch] - d[prev + ch]);
            vbuf[at + ch] += gu;
            vbuf[prev + ch] -= gu;
            dbuf[prev + ch] -= gu;
            const double gs = ws_k * (d[at + ch] - d[prev + ch]);
            dbuf[at + ch] += gs;
            dbuf[prev + ch] -= gs;
        }
    }
}

// Same traversal, but accumulating the right-hand-side term w_k * t_k of a
// step pinned to a target value t_k.
inline void chain_target_accumulate(const double* t, double* vbuf, double* dbuf,
                                    const double* wu, std::size_t base, std::size_t step,
                                    std::size_t wbase, std::size_t wstep, int len,
                                    int channels) {
    for (int k = 1; k < len; ++k) {
        const double wu_k = wu[wbase + static_cast<std::size_t>(k) * wstep];
        const std::size_t at = base + static_cast<std::size_t>(k) * step;
        const std::size_t prev = at - step;
        for (int ch = 0; ch < channels; ++ch) {
            const double g = wu_k * t[at + ch];
            vbuf[at + ch] += g;
            vbuf[prev + ch] -= g;
            dbuf[prev + ch] -= g;
        }
    }
}

// Matrix-free Hessian of the smoothing objective
//
//   J = sum_n |obs_n - y_n|^2 / (2 sigma_n^2)
//     + sum_{orient} sum_{chains} sum_{k>=1} [ wu_k/2 |u_k|^2 + ws_k/2 |s_k|^2 ]
//
// with wu = 1/sigma_U^2 and ws = r^2 (both capped). The level output combines
// the row and column contributions through two separate buffers as
// data + (row + col); together with the fixed chain traversal this makes the
// whole operator exactly equivariant under transposition.
struct LatentOperator {
    LatentLayout lay;
    Field2D wz;                  // per-pixel data weights
    Field2D wu_row, wu_col;      // level-step weights, positions >= 1
    Field2D ws_row, ws_col;      // slope-increment weights, positions >= 1
    std::vector<double> rowbuf, colbuf;
    GridReducer reducer;

    LatentOperator(int h, int w, int c)
        : lay(h, w, c), rowbuf(lay.field), colbuf(lay.field), reducer(h, w) {}

    void apply(const std::vector<double>& x, std::vector<double>& out) {
        const int h = lay.h, w = lay.w, c = lay.c;
        const std::size_t f = lay.field;
        out.assign(lay.dim(), 0.0);
        const double* y = x.data();
        const double* dr = x.data() + f;
        const double* dc = x.data() + 2 * f;
        double* out_dr = out.data() + f;
        double* out_dc = out.data() + 2 * f;

        std::fill(rowbuf.begin(), rowbuf.end(), 0.0);
        std::fill(colbuf.begin(), colbuf.end(), 0.0);
        parallel_for(0, h, [&](int i) {
            chain_quadratic_accumulate(y, dr, rowbuf.data(), out_dr, wu_row.samples.data(),
                                       ws_row.samples.data(),
                                       static_cast<std::size_t>(i) * w * c, c,
                                       static_cast<std::size_t>(i) * w, 1, w, c);
        });
        parallel_for(0, w, [&](int j) {
            chain_quadratic_accumulate(y, dc, colbuf.data(), out_dc, wu_col.samples.data(),
                                       ws_col.samples.data(), static_cast<std::size_t>(j) * c,
                                       static_cast<std::size_t>(w) * c, static_cast<std::size_t>(j),
                                       static_cast<std::size_t>(w), h, c);
        });
        parallel_for(0, h, [&](int i) {
            for (int j = 0; j < w; ++j) {
                const double wzij = wz.at(i, j);
                const std::size_t at = (static_cast<std::size_t>(i) * w + j) * c;
                for (int ch = 0; ch < c; ++ch)
                    out[at + ch] = wzij * y[at + ch] + (rowbuf[at + ch] + colbuf[at + ch]);
            }
        });
    }

    std::vector<double> diagonal() const {
        const int h = lay.h, w = lay.w, c = lay.c;
        const std::size_t f = lay.field;
        std::vector<double> diag(lay.dim(), 0.0);
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                // Row and column contributions are paired before the final
                // add; swapping the pair (a transposed problem) cannot change
                // the rounding.
                const double dy_row = (j >= 1 ? wu_row.at(i, j) : 0.0) +
                                      (j + 1 < w ? wu_row.at(i, j + 1) : 0.0);
                const double dy_col = (i >= 1 ? wu_col.at(i, j) : 0.0) +
                                      (i + 1 < h ? wu_col.at(i + 1, j) : 0.0);
                const double dy = wz.at(i, j) + (dy_row + dy_col);

                double ddr = j >= 1 ? ws_row.at(i, j) : 0.0;
                if (j + 1 < w) ddr += wu_row.at(i, j + 1) + ws_row.at(i, j + 1);
                double ddc = i >= 1 ? ws_col.at(i, j) : 0.0;
                if (i + 1 < h) ddc += wu_col.at(i + 1, j) + ws_col.at(i + 1, j);

                const std::size_t at = (static_cast<std::size_t>(i) * w + j) * c;
                for (int ch = 0; ch < c; ++ch) {
                    diag[at + ch] = dy;
                    diag[f + at + ch] = ddr;
                    diag[2 * f + at + ch] = ddc;
                }
            }
        }
        return diag;
    }

    // Transpose-symmetric inner product: per-pixel partials combine the level
    // product with the commutative pair of slope products, then reduce.
    double dot(const std::vector<double>& a, const std::vector<double>& b) {
        const int w = lay.w, c = lay.c;
        const std::size_t f = lay.field;
        return reducer.sum([&](int i, int j) {
            const std::size_t at = (static_cast<std::size_t>(i) * w + j) * c;
            double sy = 0.0, sr = 0.0, sc = 0.0;
            for (int ch = 0; ch < c; ++ch) {
                sy += a[at + ch] * b[at + ch];
                sr += a[f + at + ch] * b[f + at + ch];
                sc += a[2 * f + at + ch] * b[2 * f + at + ch];
            }
            return sy + (sr + sc);
        });
    }
};

// LDL^T factorization of a symmetric positive definite matrix with bandwidth
// two, the shape of one chain block below. Factor and solve are sequential,
// so a block solve is a deterministic function of its inputs alone.
struct BandedSpd {
    int m = 0;
    std::vector<double> d;     // pivots
    std::vector<double> e, f;  // first and second subdiagonal of unit L

    void factor(std::vector<double>&& a0, std::vector<double>&& a1, std::vector<double>&& a2) {
        m = static_cast<int>(a0.size());
        d = std::move(a0);
        e = std::move(a1);
        f = std::move(a2);
        for (int t = 0; t < m; ++t) {
            if (t >= 2) f[t] /= d[t - 2];
            if (t >= 1) {
                if (t >= 2) e[t] -= f[t] * e[t - 1] * d[t - 2];
                e[t] /= d[t - 1];
                d[t] -= e[t] * e[t] * d[t - 1];
            }
            if (t >= 2) d[t] -= f[t] * f[t] * d[t - 2];
            // A variable without any term (a degenerate chain) surfaces as a
            // zero pivot; treat it as an identity row so solves stay defined.
            if (!(d[t] > 0.0)) d[t] = 1.0;
        }
    }

    void solve(double* z) const {
        for (int t = 1; t < m; ++t) {
            z[t] -= e[t] * z[t - 1];
            if (t >= 2) z[t] -= f[t] * z[t - 2];
        }
        for (int t = 0; t < m; ++t) z[t] /= d[t];
        for (int t = m - 2; t >= 0; --t) {
            z[t] -= e[t + 1] * z[t + 1];
            if (t + 2 < m) z[t] -= f[t + 2] * z[t + 2];
        }
    }
};

// One row (or column) of the latent problem as a standalone SPD block: the
// exact principal submatrix of the full operator on the chain's levels and
// slopes, interleaved so every coupling sits within bandwidth two. `ydiag`
// must hold the complete level diagonal (data weight plus BOTH orientations'
// step weights) — dropping the perpendicular chains' share would let block
// solves overshoot by the weight-cap ratio exactly where they are stiffest.
// Reading everything through (base, stride) makes the assembly of a column
// identical, bit for bit, to the assembly of the transposed problem's row.
inline BandedSpd make_latent_chain_block(const double* ydiag, const double* wu, const double* ws,
                                         std::size_t base, std::size_t stride, int len) {
    std::vector<double> a0(2 * static_cast<std::size_t>(len), 0.0);
    std::vector<double> a1(a0.size(), 0.0), a2(a0.size(), 0.0);
    for (int k = 0; k < len; ++k) {
        const std::size_t at = base + static_cast<std::size_t>(k) * stride;
        const double wu_here = k >= 1 ? wu[at] : 0.0;
        const double ws_here = k >= 1 ? ws[at] : 0.0;
        const double wu_next = k + 1 < len ? wu[at + stride] : 0.0;
        const double ws_next = k + 1 < len ? ws[at + stride] : 0.0;
        a0[2 * k] = ydiag[at];
        a0[2 * k + 1] = (ws_here + ws_next) + wu_next;
        a1[2 * k + 1] = wu_next;  // the next level step ties the slope to its level
        if (k >= 1) {
            a1[2 * k] = -wu_here;
            a2[2 * k] = -wu_here;
            a2[2 * k + 1] = -ws_here;
        }
    }
    BandedSpd block;
    block.factor(std::move(a0), std::move(a1), std::move(a2));
    return block;
}

// Additive block preconditioner for the latent operator. The capped step
// weights make the chains far too stiff for the Jacobi diagonal, but they
// never couple across chains, so solving every row block and every column
// block exactly absorbs them. Level halves combine as row + col: IEEE
// addition commutes, so transposition cannot change the rounding, and each
// block writes a disjoint slice, so the worker count cannot reorder it.
struct LatentPreconditioner {
    LatentLayout lay;
    std::vector<BandedSpd> row_blocks, col_blocks;
    std::vector<double> ybuf_row, ybuf_col;
    std::vector<double> row_scratch, col_scratch;  // one interleaved chain per row/col

    LatentPreconditioner(int h, int w, int c)
        : lay(h, w, c), ybuf_row(lay.field), ybuf_col(lay.field),
          row_scratch(2 * static_cast<std::size_t>(h) * w),
          col_scratch(2 * static_cast<std::size_t>(h) * w) {}

    void build(const Field2D& wz, const Field2D& wu_row, const Field2D& wu_col,
               const Field2D& ws_row, const Field2D& ws_col) {
        const int h = lay.h, w = lay.w;
        Field2D ydiag(h, w, 0.0);  // same pairing as LatentOperator::diagonal
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                const double dy_row = (j >= 1 ? wu_row.at(i, j) : 0.0) +
                                      (j + 1 < w ? wu_row.at(i, j + 1) : 0.0);
                const double dy_col = (i >= 1 ? wu_col.at(i, j) : 0.0) +
                                      (i + 1 < h ? wu_col.at(i + 1, j) : 0.0);
                ydiag.at(i, j) = wz.at(i, j) + (dy_row + dy_col);
            }
        row_blocks.assign(h, BandedSpd{});
        col_blocks.assign(w, BandedSpd{});
        parallel_for(0, h, [&](int i) {
            row_blocks[i] = make_latent_chain_block(ydiag.samples.data(), wu_row.samples.data(),
                                                    ws_row.samples.data(),
                                                    static_cast<std::size_t>(i) * w, 1, w);
        });
        parallel_for(0, w, [&](int j) {
            col_blocks[j] = make_latent_chain_block(ydiag.samples.data(), wu_col.samples.data(),
                                                    ws_col.samples.data(), static_cast<std::size_t>(j),
                                                    static_cast<std::size_t>(w), h);
        });
    }

    void apply(const std::vector<double>& r, std::vector<double>& z) {
        const int h = lay.h, w = lay.w, c = lay.c;
        const std::size_t f = lay.field;
        z.assign(lay.dim(), 0.0);
        parallel_for(0, h, [&](int i) {
            double* t = row_scratch.data() + 2 * static_cast<std::size_t>(i) * w;
            for (int ch = 0; ch < c; ++ch) {
                for (int k = 0; k < w; ++k) {
                    const std::size_t at = (static_cast<std::size_t>(i) * w + k) * c + ch;
                    t[2 * k] = r[at];
                    t[2 * k + 1] = r[f + at];
                }
                row_blocks[i].solve(t);
                for (int k = 0; k < w; ++k) {
                    const std::size_t at = (static_cast<std::size_t>(i) * w + k) * c + ch;
                    ybuf_row[at] = t[2 * k];
                    z[f + at] = t[2 * k + 1];
                }
            }
        });
        parallel_for(0, w, [&](int j) {
            double* t = col_scratch.data() + 2 * static_cast<std::size_t>(j) * h;
            for (int ch = 0; ch < c; ++ch) {
                for (int k = 0; k < h; ++k) {
                    const std::size_t at = (static_cast<std::size_t>(k) * w + j) * c + ch;
                    t[2 * k] = r[at];
                    t[2 * k + 1] = r[2 * f + at];
                }
                col_blocks[j].solve(t);
                for (int k = 0; k < h; ++k) {
                    const std::size_t at = (static_cast<std::size_t>(k) * w + j) * c + ch;
                    ybuf_col[at] = t[2 * k];
                    z[2 * f + at] = t[2 * k + 1];
                }
            }
        });
        parallel_for(0, h, [&](int i) {
            const std::size_t base = static_cast<std::size_t>(i) * w * c;
            const std::size_t end = base + static_cast<std::size_t>(w) * c;
            for (std::size_t at = base; at < end; ++at) z[at] = ybuf_row[at] + ybuf_col[at];
        });
    }
};

inline void fill_step_weights(const ChainScales& scales, Field2D& wu_row, Field2D& wu_col,
                              Field2D& ws_row, Field2D& ws_col) {
    const int h = scales.sigma_u2_row.height, w = scales.sigma_u2_row.width;
    wu_row = Field2D(h, w, 0.0);
    wu_col = Field2D(h, w, 0.0);
    ws_row = Field2D(h, w, 0.0);
    ws_col = Field2D(h, w, 0.0);
    auto r_weight = [](double r) {
        const double re = std::abs(r) < kScaleCap ? std::abs(r) : kScaleCap;
        return re * re;
    };
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            if (j >= 1) {
                wu_row.at(i, j) = weight_from_scale2(scales.sigma_u2_row.at(i, j));
                ws_row.at(i, j) = r_weight(scales.r_row.at(i, j));
            }
            if (i >= 1) {
                wu_col.at(i, j) = weight_from_scale2(scales.sigma_u2_col.at(i, j));
                ws_col.at(i, j) = r_weight(scales.r_col.at(i, j));
            }
        }
    }
}

inline std::vector<double> stack_latent(const LatentField& latent) {
    const std::size_t f = latent.y.size();
    std::vector<double> x(3 * f);
    std::copy(latent.y.samples.begin(), latent.y.samples.end(), x.begin());
    std::copy(latent.d_row.samples.begin(), latent.d_row.samples.end(), x.begin() + f);
    std::copy(latent.d_col.samples.begin(), latent.d_col.samples.end(), x.begin() + 2 * f);
    return x;
}

inline LatentField unstack_latent(const std::vector<double>& x, int h, int w, int c) {
    LatentField out(ImageGrid(h, w, c));
    const std::size_t f = out.y.size();
    if (x.size() != 3 * f) throw ContractError("unstack_latent: size mismatch");
    std::copy(x.begin(), x.begin() + f, out.y.samples.begin());
    std::copy(x.begin() + f, x.begin() + 2 * f, out.d_row.samples.begin());
    std::copy(x.begin() + 2 * f, x.end(), out.d_col.samples.begin());
    return out;
}

inline QuadraticProblem make_latent_problem(const ObservationField& obs,
                                            const ChainScales& scales, const LatentField& init,
                                            const ImageGrid* target_row,
                                            const ImageGrid* target_col) {
    const int h = obs.height(), w = obs.width(), c = obs.channels();
    if (init.height() != h || init.width() != w || init.channels() != c)
        throw ContractError("latent operator: initial guess shape mismatch");
    if (scales.sigma_u2_row.height != h || scales.sigma_u2_row.width != w)
        throw ContractError("latent operator: scale field shape mismatch");

    auto op = std::make_shared<LatentOperator>(h, w, c);
    op->wz = Field2D(h, w, 0.0);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) op->wz.at(i, j) = weight_from_scale2(obs.variance.at(i, j));
    fill_step_weights(scales, op->wu_row, op->wu_col, op->ws_row, op->ws_col);
    if (target_row) {  // pinned level steps: unit-cap weights on every step
        std::fill(op->wu_row.samples.begin(), op->wu_row.samples.end(), 0.0);
        std::fill(op->wu_col.samples.begin(), op->wu_col.samples.end(), 0.0);
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                if (j >= 1) op->wu_row.at(i, j) = kWeightCap;
                if (i >= 1) op->wu_col.at(i, j) = kWeightCap;
            }
    }

    QuadraticProblem problem;
    problem.dimension = op->lay.dim();
    problem.rhs.assign(problem.dimension, 0.0);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            const double wzij = op->wz.at(i, j);
            const std::size_t at = (static_cast<std::size_t>(i) * w + j) * c;
            for (int ch = 0; ch < c; ++ch) problem.rhs[at + ch] = wzij * obs.values.at(i, j, ch);
        }
    if (target_row && target_col) {
        if (!target_row->same_shape(obs.values) || !target_col->same_shape(obs.values))
            throw ContractError("latent operator: target shape mismatch");
        std::vector<double> rbuf(op->lay.field, 0.0), cbuf(op->lay.field, 0.0);
        double* rhs_dr = problem.rhs.data() + op->lay.field;
        double* rhs_dc = problem.rhs.data() + 2 * op->lay.field;
        parallel_for(0, h, [&](int i) {
            chain_target_accumulate(target_row->samples.data(), rbuf.data(), rhs_dr,
                                    op->wu_row.samples.data(),
                                    static_cast<std::size_t>(i) * w * c, c,
                                    static_cast<std::size_t>(i) * w, 1, w, c);
        });
        parallel_for(0, w, [&](int j) {
            chain_target_accumulate(target_col->samples.data(), cbuf.data(), rhs_dc,
                                    op->wu_col.samples.data(), static_cast<std::size_t>(j) * c,
                                    static_cast<std::size_t>(w) * c, static_cast<std::size_t>(j),
                                    static_cast<std::size_t>(w), h, c);
        });
        for (std::size_t k = 0; k < op->lay.field; ++k) problem.rhs[k] += rbuf[k] + cbuf[k];
    }

    problem.x0 = stack_latent(init);
    problem.jacobi = op->diagonal();
    problem.apply = [op](const std::vector<double>& x, std::vector<double>& out) {
        op->apply(x, out);
    };
    problem.dot = [op](const std::vector<double>& a, const std::vector<double>& b) {
        return op->dot(a, b);
    };
    auto pre = std::make_shared<LatentPreconditioner>(h, w, c);
    pre->build(op->wz, op->wu_row, op->wu_col, op->ws_row, op->ws_col);
    problem.precondition = [pre](const std::vector<double>& r, std::vector<double>& z) {
        pre->apply(r, z);
    };
    return problem;
}

}  // namespace detail

// Quadratic problem of one latent update: data fit plus level-step and
// slope-increment penalties at the current scales, warm-started at `init`.
inline QuadraticProblem build_latent_operator(const ObservationField& obs,
                                              const ChainScales& scales,
                                              const LatentField& init) {
    return detail::make_latent_problem(obs, scales, init, nullptr, nullptr);
}

// Variant with every level step pinned to a target value (weight kWeightCap):
// used to re-solve for levels whose steps have been remapped.
inline QuadraticProblem build_level_pinned_operator(const ObservationField& obs,
                                                    const ChainScales& scales,
                                                    const LatentField& init,
                                                    const ImageGrid& target_row,
                                                    const ImageGrid& target_col) {
    return detail::make_latent_problem(obs, scales, init, &target_row, &target_col);
}

namespace detail {

// Matrix-free Hessian of the planar scale-field objective
//
//   J(r) = sum_n Wbar_n/2 (r_n - mbar_n)^2
//        + sum_{row pairs} wd/2 (r_{i,j} - r_{i,j-1})^2
//        + sum_{col pairs} wd/2 (r_{i,j} - r_{i-1,j})^2
//
// with wd = 1/sigma_Delta^2 capped. Same buffer discipline as the latent
// operator, giving exact transpose equivariance.
struct ScaleFieldOperator {
    int h = 0, w = 0;
    Field2D unary_w;             // Wbar
    Field2D wd_row, wd_col;      // increment weights, positions >= 1
    std::vector<double> rowbuf, colbuf;
    GridReducer reducer;

    ScaleFieldOperator(int h_, int w_)
        : h(h_), w(w_), rowbuf(static_cast<std::size_t>(h_) * w_),
          colbuf(static_cast<std::size_t>(h_) * w_), reducer(h_, w_) {}

    void apply(const std::vector<double>& x, std::vector<double>& out) {
        out.assign(static_cast<std::size_t>(h) * w, 0.0);
        std::fill(rowbuf.begin(), rowbuf.end(), 0.0);
        std::fill(colbuf.begin(), colbuf.end(), 0.0);
        parallel_for(0, h, [&](int i) {
            const std::size_t base = static_cast<std::size_t>(i) * w;
            for (int j = 1; j < w; ++j) {
                const double g = wd_row.at(i, j) * (x[base + j] - x[base + j - 1]);
                rowbuf[base + j] += g;
                rowbuf[base + j - 1] -= g;
            }
        });
        parallel_for(0, w, [&](int j) {
            for (int i = 1; i < h; ++i) {
                const std::size_t at = static_cast<std::size_t>(i) * w + j;
                const double g = wd_col.at(i, j) * (x[at] - x[at - w]);
                colbuf[at] += g;
                colbuf[at - w] -= g;
            }
        });
        parallel_for(0, h, [&](int i) {
            const std::size_t base = static_cast<std::size_t>(i) * w;
            for (int j = 0; j < w; ++j)
                out[base + j] = unary_w.at(i, j) * x[base + j] + (rowbuf[base + j] + colbuf[base + j]);
        });
    }

    std::vector<double> diagonal() const {
        std::vector<double> diag(static_cast<std::size_t>(h) * w);
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                // Same pairing as the latent diagonal: transpose-safe rounding.
                const double d_row = (j >= 1 ? wd_row.at(i, j) : 0.0) +
                                     (j + 1 < w ? wd_row.at(i, j + 1) : 0.0);
                const double d_col = (i >= 1 ? wd_col.at(i, j) : 0.0) +
                                     (i + 1 < h ? wd_col.at(i + 1, j) : 0.0);
                diag[static_cast<std::size_t>(i) * w + j] = unary_w.at(i, j) + (d_row + d_col);
            }
        return diag;
    }

    double dot(const std::vector<double>& a, const std::vector<double>& b) {
        return reducer.sum([&](int i, int j) {
            const std::size_t at = static_cast<std::size_t>(i) * w + j;
            return a[at] * b[at];
        });
    }
};

// Planar analogue of make_latent_chain_block: one chain of the scale-field
// problem, tridiagonal, stored in the same bandwidth-two form with an empty
// second diagonal. `diag` again holds the full operator diagonal.
inline BandedSpd make_planar_chain_block(const double* diag, const double* wd,
                                         std::size_t base, std::size_t stride, int len) {
    std::vector<double> a0(static_cast<std::size_t>(len), 0.0);
    std::vector<double> a1(a0.size(), 0.0), a2(a0.size(), 0.0);
    for (int k = 0; k < len; ++k) {
        const std::size_t at = base + static_cast<std::size_t>(k) * stride;
        const double wd_here = k >= 1 ? wd[at] : 0.0;
        a0[k] = diag[at];
        if (k >= 1) a1[k] = -wd_here;
    }
    BandedSpd block;
    block.factor(std::move(a0), std::move(a1), std::move(a2));
    return block;
}

// Row/column block preconditioner for the scale-field operator, mirroring
// LatentPreconditioner: exact chain solves absorb capped increment weights,
// and the commutative row + col sum keeps transposes bit-exact.
struct ScaleFieldPreconditioner {
    int h = 0, w = 0;
    std::vector<BandedSpd> row_blocks, col_blocks;
    std::vector<double> rowbuf, colbuf, col_scratch;

    ScaleFieldPreconditioner(int h_, int w_)
        : h(h_), w(w_), rowbuf(static_cast<std::size_t>(h_) * w_),
          colbuf(static_cast<std::size_t>(h_) * w_),
          col_scratch(static_cast<std::size_t>(h_) * w_) {}

    void build(const Field2D& unary_w, const Field2D& wd_row, const Field2D& wd_col) {
        Field2D diag(h, w, 0.0);  // same pairing as ScaleFieldOperator::diagonal
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                const double d_row = (j >= 1 ? wd_row.at(i, j) : 0.0) +
                                     (j + 1 < w ? wd_row.at(i, j + 1) : 0.0);
                const double d_col = (i >= 1 ? wd_col.at(i, j) : 0.0) +
                                     (i + 1 < h ? wd_col.at(i + 1, j) : 0.0);
                diag.at(i, j) = unary_w.at(i, j) + (d_row + d_col);
            }
        row_blocks.assign(h, BandedSpd{});
        col_blocks.assign(w, BandedSpd{});
        parallel_for(0, h, [&](int i) {
            row_blocks[i] = make_planar_chain_block(diag.samples.data(), wd_row.samples.data(),
                                                    static_cast<std::size_t>(i) * w, 1, w);
        });
        parallel_for(0, w, [&](int j) {
            col_blocks[j] = make_planar_chain_block(diag.samples.data(), wd_col.samples.data(),
                                                    static_cast<std::size_t>(j),
                                                    static_cast<std::size_t>(w), h);
        });
    }

    void apply(const std::vector<double>& r, std::vector<double>& z) {
        z.resize(static_cast<std::size_t>(h) * w);
        parallel_for(0, h, [&](int i) {
            const std::size_t base = static_cast<std::size_t>(i) * w;
            std::copy(r.begin() + base, r.begin() + base + w, rowbuf.begin() + base);
            row_blocks[i].solve(rowbuf.data() + base);
        });
        parallel_for(0, w, [&](int j) {
            double* t = col_scratch.data() + static_cast<std::size_t>(j) * h;
            for (int k = 0; k < h; ++k) t[k] = r[static_cast<std::size_t>(k) * w + j];
            col_blocks[j].solve(t);
            for (int k = 0; k < h; ++k) colbuf[static_cast<std::size_t>(k) * w + j] = t[k];
        });
        parallel_for(0, h, [&](int i) {
            const std::size_t base = static_cast<std::size_t>(i) * w;
            for (int j = 0; j < w; ++j) z[base + j] = rowbuf[base + j] + colbuf[base + j];
        });
    }
};

}  // namespace detail

// Quadratic problem of the planar scale-field update: per-pixel Gaussian
// messages (weight, weighted mean) fused with increment smoothness along both
// orientations.
inline QuadraticProblem build_r_field_operator(const Field2D& unary_weight,
                                               const Field2D& unary_weighted_mean,
                                               const Field2D& sigma_d2_row,
                                               const Field2D& sigma_d2_col,
                                               const Field2D& r_init) {
    const int h = unary_weight.height, w = unary_weight.width;
    auto same = [&](const Field2D& f) { return f.height == h && f.width == w; };
    if (!same(unary_weighted_mean) || !same(sigma_d2_row) || !same(sigma_d2_col) || !same(r_init))
        throw ContractError("scale-field operator: field shape mismatch");
    bool anchored = false;
    for (double v : unary_weight.samples)
        if (v > 0.0) anchored = true;
    if (!anchored)
        throw NumericError("scale-field operator: unanchored field (all message weights are 0)");

    auto op = std::make_shared<detail::ScaleFieldOperator>(h, w);
    op->unary_w = unary_weight;
    op->wd_row = Field2D(h, w, 0.0);
    op->wd_col = Field2D(h, w, 0.0);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            if (j >= 1) op->wd_row.at(i, j) = detail::weight_from_scale2(sigma_d2_row.at(i, j));
            if (i >= 1) op->wd_col.at(i, j) = detail::weight_from_scale2(sigma_d2_col.at(i, j));
        }

    QuadraticProblem problem;
    problem.dimension = static_cast<std::size_t>(h) * w;
    problem.rhs = unary_weighted_mean.samples;
    problem.x0 = r_init.samples;
    problem.jacobi = op->diagonal();
    problem.apply = [op](const std::vector<double>& x, std::vector<double>& out) {
        op->apply(x, out);
    };
    problem.dot = [op](const std::vector<double>& a, const std::vector<double>& b) {
        return op->dot(a, b);
    };
    auto pre = std::make_shared<detail::ScaleFieldPreconditioner>(h, w);
    pre->build(op->unary_w, op->wd_row, op->wd_col);
    problem.precondition = [pre](const std::vector<double>& r, std::vector<double>& z) {
        pre->apply(r, z);
    };
    return problem;
}

}  // namespace fgip
