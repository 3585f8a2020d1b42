#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <vector>

#include "fgip/chain_smoother.hpp"
#include "support/oracles.hpp"
#include "support/testutil.hpp"

using namespace fgip;

namespace {

std::vector<GaussianMessage> random_messages(std::mt19937_64& rng, int n) {
    std::vector<GaussianMessage> msgs(n);
    for (auto& m : msgs) {
        const double mean = testutil::log_uniform(rng, 0.01, 100.0);
        const double var = testutil::log_uniform(rng, 1e-4, 1e4);
        m = GaussianMessage::from_mean_variance(mean, var);
    }
    return msgs;
}

std::vector<double> random_sd2(std::mt19937_64& rng, int n) {
    std::vector<double> sd2(n);
    for (double& v : sd2) v = testutil::log_uniform(rng, 1e-3, 1e3);
    return sd2;
}

double rel_diff(const std::vector<double>& got, const std::vector<double>& want) {
    double m = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i)
        m = std::max(m, std::abs(got[i] - want[i]) /
                            std::max(std::abs(want[i]), 1e-30));
    return m;
}

}  // namespace

TEST_CASE("single incoming message is returned as its own mean") {
    const GaussianMessage m = GaussianMessage::from_mean_variance(3.5, 0.25);
    const std::vector<double> sd2 = {0.0};  // leading entry is never read
    const std::vector<double> r = smooth_chain(std::vector{m}, sd2);
    REQUIRE(r.size() == 1);
    CHECK(r[0] == Catch::Approx(3.5).epsilon(1e-15));
}

TEST_CASE("identical incoming messages yield a constant posterior") {
    std::mt19937_64 rng(41);
    for (int t = 0; t < 20; ++t) {
        const int n = 2 + static_cast<int>(testutil::uniform(rng, 0.0, 14.0));
        const GaussianMessage m = GaussianMessage::from_mean_variance(
            testutil::uniform(rng, -5.0, 5.0), testutil::log_uniform(rng, 1e-3, 1e3));
        const std::vector<GaussianMessage> msgs(n, m);
        const std::vector<double> r = smooth_chain(msgs, random_sd2(rng, n));
        for (double v : r) CHECK(v == Catch::Approx(m.mean()).epsilon(1e-13));
    }
}

TEST_CASE("five-node chain matches the dense posterior") {
    std::mt19937_64 rng(43);
    const auto msgs = random_messages(rng, 5);
    const auto sd2 = random_sd2(rng, 5);
    const std::vector<double> got = smooth_chain(msgs, sd2);
    const std::vector<double> want = oracles::dense_chain_posterior(msgs, sd2);
    CHECK(rel_diff(got, want) <= 1e-11);
}

TEST_CASE("random chains match the dense posterior to 1e-9") {
    std::mt19937_64 rng(47);
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
        const int n = 1 + static_cast<int>(testutil::uniform(rng, 0.0, 63.0));
        const auto msgs = random_messages(rng, n);
        const auto sd2 = random_sd2(rng, n);
        worst = std::max(worst,
                         rel_diff(smooth_chain(msgs, sd2),
                                  oracles::dense_chain_posterior(msgs, sd2)));
    }
    CHECK(worst <= 1e-9);
}

TEST_CASE("reversing the chain reverses the output bit for bit") {
    std::mt19937_64 rng(53);
    for (int t = 0; t < 50; ++t) {
        const int n = 2 + static_cast<int>(testutil::uniform(rng, 0.0, 30.0));
        const auto msgs = random_messages(rng, n);
        const auto sd2 = random_sd2(rng, n);

        std::vector<GaussianMessage> rmsgs(msgs.rbegin(), msgs.rend());
        // Coupling k links nodes k-1,k; after reversal that same factor links
        // the mirrored pair, so the weight list reverses over entries 1..n-1.
        std::vector<double> rsd2(n);
        rsd2[0] = sd2[0];
        for (int k = 1; k < n; ++k) rsd2[k] = sd2[n - k];

        std::vector<double> fwd = smooth_chain(msgs, sd2);
        const std::vector<double> bwd = smooth_chain(rmsgs, rsd2);
        std::reverse(fwd.begin(), fwd.end());
        REQUIRE(fwd.size() == bwd.size());
        for (std::size_t k = 0; k < fwd.size(); ++k) CHECK(fwd[k] == bwd[k]);
    }
}

TEST_CASE("vanishing increment variance approaches the precision-weighted mean") {
    std::mt19937_64 rng(59);
    const int n = 12;
    const auto msgs = random_messages(rng, n);
    const std::vector<double> sd2(n, 1e-12);
    const std::vector<double> r = smooth_chain(msgs, sd2);

    double wsum = 0.0, xsum = 0.0;
    for (const auto& m : msgs) {
        wsum += m.weight;
        xsum += m.weighted_mean;
    }
    const double pooled = xsum / wsum;
    for (double v : r)
        CHECK(std::abs(v - pooled) / std::abs(pooled) <= 1e-4);

    SECTION("exactly zero variance is admitted") {
        const std::vector<double> hard = smooth_chain(msgs, std::vector<double>(n, 0.0));
        for (double v : hard)
            CHECK(v == Catch::Approx(pooled).epsilon(1e-12));
    }
}

TEST_CASE("chain with no observed node anywhere is rejected") {
    std::vector<GaussianMessage> msgs(4, GaussianMessage{0.0, 0.0});
    const std::vector<double> sd2(4, 1.0);
    REQUIRE_THROWS_AS(smooth_chain(msgs, sd2), NumericError);
}

TEST_CASE("leading increment-variance slot is alignment only") {
    std::mt19937_64 rng(61);
    const auto msgs = random_messages(rng, 8);
    auto sd2 = random_sd2(rng, 8);
    const std::vector<double> a = smooth_chain(msgs, sd2);
    sd2[0] = -123.0;  // any garbage must be ignored
    const std::vector<double> b = smooth_chain(msgs, sd2);
    CHECK(a == b);
}

TEST_CASE("input validation on sizes and finiteness") {
    const auto m = GaussianMessage::from_mean_variance(1.0, 1.0);
    REQUIRE_THROWS_AS(smooth_chain(std::vector<GaussianMessage>{},
                                   std::vector<double>{}),
                      ContractError);
    REQUIRE_THROWS_AS(smooth_chain(std::vector{m, m}, std::vector{0.0, 1.0, 2.0}),
                      ContractError);
    REQUIRE_THROWS_AS(smooth_chain(std::vector{m, m}, std::vector{0.0, -1.0}),
                      ContractError);
}

TEST_CASE("increment-scale refresh from a smoothed field") {
    SECTION("constant field has zero increments") {
        const std::vector<double> r(6, 2.5);
        for (double v : refresh_sigma_delta(r, 3.0, 0.5)) CHECK(v == 0.0);
    }
    SECTION("hand values") {
        // |r_1 - r_0| = 0, |r_2 - r_1| = 2 with beta_delta = 1, p = 1:
        // sigma^2 = 2^(2-1) / (1*1) = 2.
        const std::vector<double> r = {1.0, 1.0, 3.0};
        const std::vector<double> s = refresh_sigma_delta(r, 1.0, 1.0);
        REQUIRE(s.size() == 2);
        CHECK(s[0] == 0.0);
        CHECK(s[1] == Catch::Approx(2.0).epsilon(1e-15));
    }
    SECTION("matches the elementwise closed form") {
        std::mt19937_64 rng(67);
        std::vector<double> r(10);
        for (double& v : r) v = testutil::uniform(rng, 0.1, 50.0);
        const std::vector<double> s = refresh_sigma_delta(r, 4.0, 0.3);
        for (std::size_t k = 1; k < r.size(); ++k)
            CHECK(s[k - 1] == update_sigma_delta(std::abs(r[k] - r[k - 1]), 4.0, 0.3));
    }
}
