#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "treeaoi/errors.hpp"
#include "treeaoi/markov.hpp"
#include "treeaoi/simulator.hpp"

using namespace treeaoi;

namespace {

ProtocolConfig config(int users, double rho, std::optional<int> lmax)
{
    return ProtocolConfig{users, rho, lmax};
}

bool is_probability_vector(const auto& v, double tol = 1e-9)
{
    double total = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v[i] < 0.0)
            return false;
        total += v[i];
    }
    return std::abs(total - 1.0) <= tol;
}

}  // namespace

TEST_CASE("config validation")
{
    CHECK_THROWS_AS(config(0, 0.1, 4).validate(), ConfigError);
    CHECK_THROWS_AS(config(5, -0.1, 4).validate(), ConfigError);
    CHECK_THROWS_AS(config(5, 1.5, 4).validate(), ConfigError);
    CHECK_THROWS_AS(config(5, 0.1, 1).validate(), ConfigError);
    CHECK_NOTHROW(config(5, 0.1, 2).validate());
    CHECK_NOTHROW(config(5, 0.0, std::nullopt).validate());
    CHECK_THROWS_AS(ChainModel(config(5, 0.1, 1)), ConfigError);
}

TEST_CASE("generation probability over a CRI")
{
    CHECK(generation_prob(0.008, 10) == doctest::Approx(1.0 - std::pow(0.992, 10)));
    CHECK(generation_prob(0.008, 10) == doctest::Approx(0.0773).epsilon(1e-3));
    CHECK(generation_prob(0.0, 50) == 0.0);
    CHECK(generation_prob(1.0, 1) == 1.0);
}

TEST_CASE("contender laws are binomial")
{
    const auto cfg = config(10, 0.2, 6);
    const auto all = contender_dist(cfg, 3, true);
    const auto others = contender_dist(cfg, 3, false);
    REQUIRE(all.size() == 11);
    REQUIRE(others.size() == 10);
    const double g = 1.0 - std::pow(0.8, 3);
    CHECK(all[0] == doctest::Approx(std::pow(1.0 - g, 10)));
    CHECK(others[2] == doctest::Approx(36.0 * g * g * std::pow(1.0 - g, 7)));
    double total = 0.0;
    for (double p : all)
        total += p;
    CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("truncated CRI law")
{
    const auto p = truncated_cri_pmf(2, 4);
    CHECK(p(3) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p(4) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p(1) == 0.0);
    CHECK(p.support_max() == 4);
    CHECK(truncated_cri_pmf(0, 2)(1) == 1.0);
    CHECK(truncated_cri_pmf(1, 7)(1) == 1.0);
    // two slots: a collision always forces the early stop
    CHECK(truncated_cri_pmf(5, 2)(2) == doctest::Approx(1.0));
}

TEST_CASE("idle channel sits in the single-slot state")
{
    for (std::optional<int> lmax : {std::optional<int>(2), std::optional<int>(9), std::optional<int>()}) {
        const ChainModel model(config(20, 0.0, lmax));
        const auto& pi = model.stationary().probs;
        CHECK(pi[0] == doctest::Approx(1.0));
        CHECK(pi.sum() == doctest::Approx(1.0));
        CHECK(model.kernel().probs(0, 0) == doctest::Approx(1.0));
    }
}

TEST_CASE("kernel rows and stationary law are probability vectors")
{
    for (double rhou : {0.05, 0.347, 0.8, 1.0}) {
        for (std::optional<int> lmax : {std::optional<int>(2), std::optional<int>(10), std::optional<int>()}) {
            const ChainModel model(config(100, rhou / 100.0, lmax));
            const auto& P = model.kernel().probs;
            for (Eigen::Index r = 0; r < P.rows(); ++r)
                CHECK(is_probability_vector(P.row(r)));
            const auto& pi = model.stationary();
            CHECK(is_probability_vector(pi.probs));
            CHECK(pi.residual <= 1e-10);
            CHECK((pi.probs.transpose() * P - pi.probs.transpose()).lpNorm<1>() <= 1e-10);
        }
    }
}

TEST_CASE("direct and power-iteration stationary laws agree")
{
    for (int lmax : {2, 5, 17, 40}) {
        const ChainModel model(config(100, 0.006, lmax));
        const auto direct = stationary_dist(model.kernel());
        const auto power = stationary_dist_power(model.kernel());
        CHECK((direct.probs - power.probs).lpNorm<1>() < 1e-9);
    }
}

TEST_CASE("reachable CRI lengths have positive stationary mass")
{
    // Collisions always resolve in an odd number of slots, so even lengths
    // below the truncation point are unreachable; everything else is.
    const ChainModel model(config(100, 0.005, 12));
    const auto& pi = model.stationary().probs;
    for (int len = 1; len <= 12; ++len) {
        if (len == 2 || (len % 2 == 0 && len < 12))
            CHECK(pi[len - 1] < 1e-15);
        else
            CHECK(pi[len - 1] > 0.0);
    }
}

TEST_CASE("plain cap certifies the truncation error")
{
    for (int users : {1, 2, 10, 100}) {
        const int cap = plain_cri_cap(users);
        CHECK(cap >= 128);
        CHECK(unresolved_prob(users - 1, cap) < 1e-9);
        for (int u = 0; u <= users; ++u)
            CHECK(truncated_cri_pmf(u, cap)(cap) < 1e-9);
        CHECK(effective_max_cri(config(users, 0.01, std::nullopt)) == cap);
    }
    CHECK(effective_max_cri(config(7, 0.01, 9)) == 9);
}

TEST_CASE("kernel and stationary law match the simulator")
{
    const auto cfg = config(100, 0.008, 10);
    const ChainModel model(cfg);
    constexpr int kSeeds = 16;
    std::vector<SimMetrics> runs;
    SimMetrics pooled;
    for (int s = 0; s < kSeeds; ++s) {
        SimOptions opts;
        opts.horizon_slots = 650'000;
        opts.seed = 1000 + s;
        runs.push_back(run_simulation(cfg, opts));
        if (s == 0)
            pooled = runs.back();
        else
            pooled.merge(runs.back());
    }
    REQUIRE(pooled.invariant_violations == 0);
    REQUIRE(pooled.cri_count() >= 1'000'000);

    const auto& pi = model.stationary().probs;
    for (int len = 1; len <= 10; ++len) {
        std::vector<double> freq;
        for (const auto& r : runs) {
            const double hit = len <= static_cast<int>(r.cri_hist.size()) ? static_cast<double>(r.cri_hist[len - 1]) : 0.0;
            freq.push_back(hit / static_cast<double>(r.cri_count()));
        }
        const double p = pi[len - 1] < 1e-14 ? 0.0 : pi[len - 1];
        CAPTURE(len);
        CHECK(oracle::within_batch_se(freq, p));
    }

    // Roughly 40 nonzero cells are tested at once; 4 SE per cell keeps the
    // family-wise false alarm rate at the level of a single 3 SE test.
    const auto& P = model.kernel().probs;
    for (int from = 1; from <= 10; ++from) {
        const auto n = pooled.cri_pairs.row_total(from);
        if (n < 1000)
            continue;
        for (int to = 1; to <= 10; ++to) {
            const double p = P(from - 1, to - 1) < 1e-14 ? 0.0 : P(from - 1, to - 1);
            CAPTURE(from);
            CAPTURE(to);
            CHECK(oracle::within_se(pooled.cri_pairs(from, to), n, p, 4.0));
        }
    }
}
