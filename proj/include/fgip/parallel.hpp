#pragma once

#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fgip {

namespace detail {
inline int& worker_setting() {
    static int n = 0;  // 0 = runtime default
    return n;
}
}  // namespace detail

// Number of worker threads used by parallel loops; 0 restores the runtime
// default. All results are bit-identical regardless of this setting.
inline void set_workers(int n) { detail::worker_setting() = n > 0 ? n : 0; }

inline int workers() {
#ifdef _OPENMP
    int n = detail::worker_setting();
    return n > 0 ? n : omp_get_max_threads();
#else
    return 1;
#endif
}

// Static-schedule loop over [begin, end). Bodies must write disjoint locations;
// no reductions happen here, which is what keeps results independent of the
// worker count.
template <typename F>
inline void parallel_for(int begin, int end, F&& body) {
#ifdef _OPENMP
    const int nw = workers();
    if (nw > 1 && end - begin > 1) {
#pragma omp parallel for schedule(static) num_threads(nw)
        for (int i = begin; i < end; ++i) body(i);
        return;
    }
#endif
    for (int i = begin; i < end; ++i) body(i);
}

// Sums an h x w buffer of partials by repeatedly collapsing 2x2 blocks:
//   (a + (b + c)) + d
// with b, c the off-diagonal pair. Swapping b and c leaves every rounded
// intermediate unchanged, so the reduction commutes with transposition of the
// buffer -- the property the estimators rely on for exact symmetry between
// row-wise and column-wise passes. Runs serially; the buffer is consumed.
inline double reduce_grid_inplace(std::vector<double>& buf, int h, int w) {
    while (h > 1 || w > 1) {
        const int nh = (h + 1) / 2;
        const int nw = (w + 1) / 2;
        for (int a = 0; a < nh; ++a) {
            for (int b = 0; b < nw; ++b) {
                const int i = 2 * a, j = 2 * b;
                const bool down = i + 1 < h, right = j + 1 < w;
                const std::size_t p = static_cast<std::size_t>(i) * w + j;
                double v = buf[p];
                if (down && right)
                    v = (v + (buf[p + 1] + buf[p + w])) + buf[p + w + 1];
                else if (right)
                    v += buf[p + 1];
                else if (down)
                    v += buf[p + w];
                buf[static_cast<std::size_t>(a) * nw + b] = v;
            }
        }
        h = nh;
        w = nw;
    }
    return buf[0];
}

// Deterministic sum of per-pixel partials over an h x w grid. The fill step is
// parallel (disjoint writes), the collapse is serial and order-fixed.
class GridReducer {
public:
    GridReducer(int h, int w) : h_(h), w_(w), scratch_(static_cast<std::size_t>(h) * w) {}

    template <typename PerPixel>
    double sum(PerPixel&& partial) {
        const int w = w_;
        parallel_for(0, h_, [&](int i) {
            double* row = scratch_.data() + static_cast<std::size_t>(i) * w;
            for (int j = 0; j < w; ++j) row[j] = partial(i, j);
        });
        return reduce_grid_inplace(scratch_, h_, w_);
    }

private:
    int h_, w_;
    std::vector<double> scratch_;
};

}  // namespace fgip
