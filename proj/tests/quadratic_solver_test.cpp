#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "fgip/operators.hpp"
#include "support/oracles.hpp"
#include "support/testutil.hpp"

using namespace fgip;

namespace {

// Stacks the transposed latent: levels transpose, slope blocks swap roles.
std::vector<double> transpose_stacked(const std::vector<double>& x, int h, int w, int c) {
    const LatentField f = detail::unstack_latent(x, h, w, c);
    return detail::stack_latent(
        LatentField(f.y.transposed(), f.d_col.transposed(), f.d_row.transposed()));
}

ChainScales transpose_scales(const ChainScales& s) {
    ChainScales t;
    t.sigma_u2_row = s.sigma_u2_col.transposed();
    t.sigma_u2_col = s.sigma_u2_row.transposed();
    t.r_row = s.r_col.transposed();
    t.r_col = s.r_row.transposed();
    t.sigma_d2_row = s.sigma_d2_col.transposed();
    t.sigma_d2_col = s.sigma_d2_row.transposed();
    return t;
}

}  // namespace

TEST_CASE("identity system converges in one iteration") {
    std::mt19937_64 rng(71);
    QuadraticProblem p;
    p.dimension = 16;
    p.apply = [](const std::vector<double>& x, std::vector<double>& out) { out = x; };
    p.rhs.resize(16);
    for (double& v : p.rhs) v = testutil::uniform(rng, -2.0, 2.0);
    const CgResult r = cg_solve(p, 1e-10, 50);
    CHECK(r.iterations == 1);
    CHECK(testutil::max_abs_diff(r.solution, p.rhs) <= 1e-14);
}

TEST_CASE("two-eigenvalue diagonal system") {
    QuadraticProblem p;
    p.dimension = 2;
    p.apply = [](const std::vector<double>& x, std::vector<double>& out) {
        out = {x[0], 2.0 * x[1]};
    };
    p.rhs = {1.0, 2.0};
    const CgResult r = cg_solve(p, 1e-12, 50);
    CHECK(r.iterations <= 2);
    CHECK(r.solution[0] == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(r.solution[1] == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("random SPD systems match a dense factorization") {
    std::mt19937_64 rng(73);
    for (int t = 0; t < 10; ++t) {
        const int n = 20;
        Eigen::MatrixXd B(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) B(i, j) = testutil::uniform(rng, -1.0, 1.0);
        const Eigen::MatrixXd A =
            B.transpose() * B + Eigen::MatrixXd::Identity(n, n) * 0.1;
        Eigen::VectorXd b(n);
        for (int i = 0; i < n; ++i) b(i) = testutil::uniform(rng, -1.0, 1.0);

        QuadraticProblem p;
        p.dimension = n;
        p.apply = [&](const std::vector<double>& x, std::vector<double>& out) {
            Eigen::Map<const Eigen::VectorXd> xv(x.data(), n);
            Eigen::VectorXd y = A * xv;
            out.assign(y.data(), y.data() + n);
        };
        p.rhs.assign(b.data(), b.data() + n);
        const CgResult r = cg_solve(p, 1e-12, 500);

        const Eigen::VectorXd want = A.ldlt().solve(b);
        double m = 0.0;
        for (int i = 0; i < n; ++i) m = std::max(m, std::abs(r.solution[i] - want(i)));
        CHECK(m <= 1e-8);
        CHECK(r.residual <= 1e-12);
    }
}

TEST_CASE("iteration cap is reported, not fatal") {
    std::mt19937_64 rng(79);
    const int n = 64;
    // 1D Laplacian plus a small diagonal: slow enough that 3 steps cannot finish.
    QuadraticProblem p;
    p.dimension = n;
    p.apply = [n](const std::vector<double>& x, std::vector<double>& out) {
        out.assign(n, 0.0);
        for (int i = 0; i < n; ++i) {
            out[i] += 0.01 * x[i];
            if (i > 0) {
                const double g = x[i] - x[i - 1];
                out[i] += g;
                out[i - 1] -= g;
            }
        }
    };
    p.rhs.resize(n);
    for (double& v : p.rhs) v = testutil::uniform(rng, -1.0, 1.0);
    const CgResult r = cg_solve(p, 1e-14, 3);
    CHECK(r.iterations == 3);
    CHECK(r.residual > 1e-14);
}

TEST_CASE("starting at the solution performs zero iterations") {
    QuadraticProblem p;
    p.dimension = 3;
    p.apply = [](const std::vector<double>& x, std::vector<double>& out) {
        out = {2.0 * x[0], 4.0 * x[1], 8.0 * x[2]};
    };
    p.rhs = {2.0, 4.0, 8.0};
    p.x0 = {1.0, 1.0, 1.0};
    const CgResult r = cg_solve(p, 1e-10, 50);
    CHECK(r.iterations == 0);
    CHECK(r.solution == p.x0);
}

TEST_CASE("indefinite operator raises a numeric error") {
    QuadraticProblem p;
    p.dimension = 2;
    p.apply = [](const std::vector<double>& x, std::vector<double>& out) {
        out = {x[0], -x[1]};
    };
    p.rhs = {1.0, 1.0};
    REQUIRE_THROWS_AS(cg_solve(p, 1e-10, 50), NumericError);
}

TEST_CASE("latent operator is symmetric and linear") {
    std::mt19937_64 rng(83);
    const int h = 5, w = 6, c = 3;
    const ObservationField obs(testutil::random_grid(rng, h, w, c), 0.01);
    const ChainScales scales = testutil::random_scales(rng, h, w);
    QuadraticProblem p = build_latent_operator(obs, scales, LatentField(obs.values));

    const std::size_t n = p.dimension;
    auto rand_vec = [&] {
        std::vector<double> v(n);
        for (double& x : v) x = testutil::uniform(rng, -1.0, 1.0);
        return v;
    };
    const std::vector<double> a = rand_vec(), b = rand_vec();
    std::vector<double> Aa(n), Ab(n);
    p.apply(a, Aa);
    p.apply(b, Ab);

    const double s1 = p.dot(a, Ab), s2 = p.dot(b, Aa);
    CHECK(std::abs(s1 - s2) <= 1e-10 * std::max(std::abs(s1), 1.0));

    std::vector<double> mix(n), Amix(n);
    for (std::size_t i = 0; i < n; ++i) mix[i] = 0.3 * a[i] - 1.7 * b[i];
    p.apply(mix, Amix);
    for (std::size_t i = 0; i < n; ++i)
        CHECK(Amix[i] == Catch::Approx(0.3 * Aa[i] - 1.7 * Ab[i]).margin(1e-9));
}

TEST_CASE("decoupled limit returns the observation") {
    std::mt19937_64 rng(89);
    const int h = 5, w = 5;
    const ObservationField obs(testutil::random_grid(rng, h, w, 1), 0.01);
    ChainScales s;
    s.sigma_u2_row = Field2D(h, w, 1e12);  // level steps cost nothing
    s.sigma_u2_col = Field2D(h, w, 1e12);
    s.r_row = Field2D(h, w, 1e-6);         // slope increments cost nothing
    s.r_col = Field2D(h, w, 1e-6);
    s.sigma_d2_row = Field2D(h, w, 1.0);
    s.sigma_d2_col = Field2D(h, w, 1.0);

    const CgResult r = cg_solve(build_latent_operator(obs, s, LatentField(obs.values)),
                                1e-10, 500);
    const LatentField sol = detail::unstack_latent(r.solution, h, w, 1);
    CHECK(testutil::max_abs_diff(sol.y, obs.values) <= 1e-8);
}

TEST_CASE("an exactly consistent ramp start is a fixed point") {
    std::mt19937_64 rng(97);
    const int h = 5, w = 5;
    ImageGrid img(h, w, 1);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) img.at(i, j) = 0.125 * j;  // dyadic: steps are exact
    const ObservationField obs(img, 0.01);
    const ChainScales scales = testutil::random_scales(rng, h, w);

    LatentField init(img, ImageGrid(h, w, 1, 0.125), ImageGrid(h, w, 1, 0.0));
    const CgResult r = cg_solve(build_latent_operator(obs, scales, init), 1e-8, 500);
    CHECK(r.iterations == 0);
    CHECK(r.solution == detail::stack_latent(init));
}

TEST_CASE("latent solves match the dense oracle") {
    std::mt19937_64 rng(101);
    for (int t = 0; t < 6; ++t) {
        const int h = t % 2 == 0 ? 5 : 4;
        const int w = t % 2 == 0 ? 5 : 6;
        const int c = t % 3 == 0 ? 3 : 1;
        const ObservationField obs(testutil::random_grid(rng, h, w, c),
                                   testutil::random_field_log(rng, h, w, 1e-4, 1.0));
        const ChainScales scales = testutil::random_scales(rng, h, w);

        const CgResult r =
            cg_solve(build_latent_operator(obs, scales, LatentField(obs.values)), 1e-12, 2000);
        const std::vector<double> want = oracles::dense_latent_solve(obs, scales);

        double rel = 0.0, norm = 0.0;
        for (double v : want) norm = std::max(norm, std::abs(v));
        for (std::size_t i = 0; i < want.size(); ++i)
            rel = std::max(rel, std::abs(r.solution[i] - want[i]));
        CHECK(rel / std::max(norm, 1e-30) <= 1e-6);
    }
}

TEST_CASE("solver result never increases the objective") {
    std::mt19937_64 rng(103);
    for (int t = 0; t < 5; ++t) {
        const ObservationField obs(testutil::random_grid(rng, 5, 5, 1), 0.01);
        const ChainScales scales = testutil::random_scales(rng, 5, 5);
        const LatentField init(testutil::random_grid(rng, 5, 5, 1),
                               testutil::random_grid(rng, 5, 5, 1, -0.5, 0.5),
                               testutil::random_grid(rng, 5, 5, 1, -0.5, 0.5));
        QuadraticProblem p = build_latent_operator(obs, scales, init);
        const CgResult r = cg_solve(p, 1e-10, 500);
        const double before = oracles::latent_objective(obs, scales, p.x0);
        const double after = oracles::latent_objective(obs, scales, r.solution);
        CHECK(after <= before + 1e-12 * std::max(before, 1.0));
    }
}

TEST_CASE("operator gradient matches finite differences of the objective") {
    std::mt19937_64 rng(107);
    const int h = 4, w = 4, c = 1;
    const ObservationField obs(testutil::random_grid(rng, h, w, c), 0.01);
    const ChainScales scales = testutil::random_scales(rng, h, w);
    QuadraticProblem p = build_latent_operator(obs, scales, LatentField(obs.values));

    std::vector<double> x(p.dimension);
    for (double& v : x) v = testutil::uniform(rng, -1.0, 1.0);
    std::vector<double> Ax(p.dimension);
    p.apply(x, Ax);

    const double h_fd = 1e-6;
    for (std::size_t k = 0; k < p.dimension; k += 7) {
        std::vector<double> xp = x, xm = x;
        xp[k] += h_fd;
        xm[k] -= h_fd;
        const double fd = (oracles::latent_objective(obs, scales, xp) -
                           oracles::latent_objective(obs, scales, xm)) /
                          (2.0 * h_fd);
        const double grad = Ax[k] - p.rhs[k];
        CHECK(fd == Catch::Approx(grad).epsilon(1e-5).margin(1e-5));
    }
}

TEST_CASE("latent solve is exactly equivariant under transposition") {
    std::mt19937_64 rng(109);
    const int h = 4, w = 6, c = 3;
    const ImageGrid img = testutil::random_grid(rng, h, w, c);
    const Field2D var = testutil::random_field_log(rng, h, w, 1e-4, 1.0);
    const ChainScales scales = testutil::random_scales(rng, h, w);

    const ObservationField obs(img, var);
    const ObservationField obs_t(img.transposed(), var.transposed());
    const ChainScales scales_t = transpose_scales(scales);

    QuadraticProblem p = build_latent_operator(obs, scales, LatentField(obs.values));
    QuadraticProblem pt = build_latent_operator(obs_t, scales_t, LatentField(obs_t.values));

    SECTION("single application transposes bit for bit") {
        std::vector<double> x(p.dimension);
        for (double& v : x) v = testutil::uniform(rng, -1.0, 1.0);
        std::vector<double> Ax(p.dimension), Axt(p.dimension);
        p.apply(x, Ax);
        pt.apply(transpose_stacked(x, h, w, c), Axt);
        CHECK(Axt == transpose_stacked(Ax, h, w, c));
    }
    SECTION("full solves transpose bit for bit") {
        const CgResult a = cg_solve(p, 1e-9, 500);
        const CgResult b = cg_solve(pt, 1e-9, 500);
        CHECK(a.iterations == b.iterations);
        CHECK(b.solution == transpose_stacked(a.solution, h, w, c));
    }
}

TEST_CASE("scale-field solve: unary-dominated and smoothing-dominated limits") {
    std::mt19937_64 rng(113);
    const int h = 4, w = 5;
    const Field2D W = testutil::random_field_log(rng, h, w, 0.5, 5.0);
    Field2D xi(h, w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) xi.at(i, j) = W.at(i, j) * testutil::uniform(rng, 0.5, 3.0);

    SECTION("huge increment variance reproduces the per-pixel means") {
        const Field2D loose(h, w, 1e12);
        const CgResult r = cg_solve(
            build_r_field_operator(W, xi, loose, loose, Field2D(h, w, 1.0)), 1e-12, 500);
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j)
                CHECK(r.solution[i * w + j] ==
                      Catch::Approx(xi.at(i, j) / W.at(i, j)).epsilon(1e-6));
    }
    SECTION("identical messages give a constant field") {
        const Field2D Wc(h, w, 2.0), xic(h, w, 3.0);
        const Field2D sd2 = testutil::random_field_log(rng, h, w, 1e-2, 1e2);
        const CgResult r = cg_solve(
            build_r_field_operator(Wc, xic, sd2, sd2, Field2D(h, w, 0.3)), 1e-12, 500);
        for (double v : r.solution) CHECK(v == Catch::Approx(1.5).epsilon(1e-9));
    }
}

TEST_CASE("scale-field solves match a dense factorization") {
    std::mt19937_64 rng(127);
    for (int t = 0; t < 8; ++t) {
        const int h = 4, w = 4;
        const Field2D W = testutil::random_field_log(rng, h, w, 1e-3, 1e3);
        Field2D xi(h, w);
        for (double& v : xi.samples) v = testutil::uniform(rng, -3.0, 3.0);
        const Field2D sd2_row = testutil::random_field_log(rng, h, w, 1e-3, 1e3);
        const Field2D sd2_col = testutil::random_field_log(rng, h, w, 1e-3, 1e3);

        const CgResult r = cg_solve(
            build_r_field_operator(W, xi, sd2_row, sd2_col, Field2D(h, w, 0.0)), 1e-13, 2000);
        const std::vector<double> want = oracles::dense_r_field_solve(W, xi, sd2_row, sd2_col);

        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < want.size(); ++i) {
            num = std::max(num, std::abs(r.solution[i] - want[i]));
            den = std::max(den, std::abs(want[i]));
        }
        CHECK(num / std::max(den, 1e-30) <= 1e-8);
    }
}

TEST_CASE("scale-field operator rejects an unanchored problem") {
    const Field2D zero(4, 4, 0.0), one(4, 4, 1.0);
    REQUIRE_THROWS_AS(build_r_field_operator(zero, zero, one, one, one), NumericError);
}

TEST_CASE("scale-field application is exactly equivariant under transposition") {
    std::mt19937_64 rng(131);
    const int h = 5, w = 7;
    const Field2D W = testutil::random_field_log(rng, h, w, 0.1, 10.0);
    Field2D xi(h, w);
    for (double& v : xi.samples) v = testutil::uniform(rng, -2.0, 2.0);
    const Field2D sd2_row = testutil::random_field_log(rng, h, w, 1e-2, 1e2);
    const Field2D sd2_col = testutil::random_field_log(rng, h, w, 1e-2, 1e2);
    const Field2D x0 = testutil::random_field(rng, h, w, -1.0, 1.0);

    QuadraticProblem p = build_r_field_operator(W, xi, sd2_row, sd2_col, x0);
    QuadraticProblem pt = build_r_field_operator(W.transposed(), xi.transposed(),
                                                 sd2_col.transposed(), sd2_row.transposed(),
                                                 x0.transposed());
    const CgResult a = cg_solve(p, 1e-10, 500);
    const CgResult b = cg_solve(pt, 1e-10, 500);
    Field2D sol(h, w);
    sol.samples = a.solution;
    CHECK(b.solution == sol.transposed().samples);
}
