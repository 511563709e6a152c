#include "doctest.h"

#include <numbers>

#include "oracles.hpp"
#include "treeaoi/pgf.hpp"

using namespace treeaoi;

namespace {

const Complex kSamples[] = {std::polar(1.0, 0.3), std::polar(1.0, -1.7), std::polar(1.0, 2.9), Complex{-1.0, 0.0}};

}  // namespace

TEST_CASE("CRI PGF base cases and the two-user closed form")
{
    for (const auto z : kSamples) {
        CHECK(std::abs(eval_cri_pgf(0, z) - z) < 1e-15);
        CHECK(std::abs(eval_cri_pgf(1, z) - z) < 1e-15);
        // resolving two users by hand: L_2(z) = z^3 / (2 - z^2)
        CHECK(std::abs(eval_cri_pgf(2, z) - z * z * z / (2.0 - z * z)) < 1e-14);
    }
    CHECK(std::abs(eval_cri_pgf(2, 1.0) - 1.0) < 1e-15);
    CHECK(oracle::mean_from_pgf([](Complex z) { return eval_cri_pgf(2, z); }) == doctest::Approx(5.0).epsilon(1e-8));
}

TEST_CASE("decode PGF base case and two-contender mean")
{
    for (const auto z : kSamples)
        CHECK(std::abs(eval_decode_pgf(1, z) - z) < 1e-15);
    CHECK(std::abs(eval_decode_pgf(2, 1.0) - 1.0) < 1e-15);
    CHECK(oracle::mean_from_pgf([](Complex z) { return eval_decode_pgf(2, z); }) ==
          doctest::Approx(4.0).epsilon(1e-8));
}

TEST_CASE("PGFs are normalized and bounded on the unit circle")
{
    const PgfSampler sampler(100, 256);
    for (int k = 0; k < sampler.points(); k += 7) {
        for (int u = 0; u <= 100; ++u)
            CHECK(std::abs(sampler.cri(u, k)) <= 1.0 + 1e-9);
        for (int t = 1; t <= 100; ++t)
            CHECK(std::abs(sampler.decode(t, k)) <= 1.0 + 1e-9);
    }
    for (int u = 0; u <= 100; ++u)
        CHECK(std::abs(sampler.cri(u, 0) - 1.0) < 1e-9);
    for (int t = 1; t <= 100; ++t)
        CHECK(std::abs(sampler.decode(t, 0) - 1.0) < 1e-9);
}

TEST_CASE("sampler tables agree with direct evaluation, including conjugate half")
{
    const PgfSampler sampler(12, 64);
    for (int k : {1, 5, 32, 40, 63}) {
        const Complex z = sampler.point(k);
        CHECK(std::abs(sampler.cri(12, k) - eval_cri_pgf(12, z)) < 1e-13);
        CHECK(std::abs(sampler.decode(7, k) - eval_decode_pgf(7, z)) < 1e-13);
    }
}

TEST_CASE("evaluation off the unit circle is a caller bug")
{
    CHECK_THROWS_AS(eval_cri_pgf(3, Complex{0.5, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(eval_decode_pgf(3, Complex{1.0, 1e-3}), std::invalid_argument);
    CHECK_NOTHROW(eval_cri_pgf(3, std::polar(1.0 + 5e-13, 0.2)));
}

TEST_CASE("cri_length_pmf small cases")
{
    for (int u : {0, 1}) {
        const auto p = cri_length_pmf(u, 8);
        CHECK(p(1) == doctest::Approx(1.0));
        CHECK(p.mean() == doctest::Approx(1.0));
    }
    const auto two = cri_length_pmf(2, 200);
    CHECK(two(1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(two(3) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(two(4) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(two(5) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(std::abs(two.mean() - 5.0) < 1e-6);
}

TEST_CASE("decode_slot_pmf small cases")
{
    const auto alone = decode_slot_pmf(0, 16);
    CHECK(alone(1) == doctest::Approx(1.0));
    const auto one = decode_slot_pmf(1, 200);
    CHECK(one(2) == doctest::Approx(0.25).epsilon(1e-12));
    // rival first (1/4), or both in the first half and then alone first (1/16)
    CHECK(one(3) == doctest::Approx(0.3125).epsilon(1e-12));
    CHECK(std::abs(one.mean() - 4.0) < 1e-6);
    for (int m : {0, 1, 5, 40, 99})
        CHECK(std::abs(decode_slot_pmf(m, 64).total() - 1.0) < 1e-9);
}

TEST_CASE("IDFT laws match the time-domain recursion")
{
    constexpr int kMaxU = 16;
    constexpr int kLen = 160;
    const auto cri = oracle::cri_length_dp(kMaxU, kLen);
    const auto dec = oracle::decode_slot_dp(kMaxU - 1, kLen);
    const auto laws = TreeLaws::shared(kMaxU);
    for (int u = 0; u <= kMaxU; ++u) {
        const auto mass = laws->cri_mass(u);
        for (int l = 1; l <= std::min<int>(kLen, static_cast<int>(mass.size())); ++l)
            CHECK(std::abs(mass[l - 1] - cri[u][l]) < 1e-12);
    }
    for (int m = 0; m < kMaxU; ++m) {
        const auto mass = laws->decode_mass(m);
        for (int d = 1; d <= std::min<int>(kLen, static_cast<int>(mass.size())); ++d)
            CHECK(std::abs(mass[d - 1] - dec[m][d]) < 1e-12);
    }
}

TEST_CASE("tail folding puts exactly the plain tail in the cap bin")
{
    const auto oracle_law = oracle::cri_length_dp(6, 400)[6];
    for (int cap : {2, 7, 12, 31}) {
        const auto p = cri_length_pmf(6, cap);
        double tail = 0.0;
        for (int l = cap; l <= 400; ++l)
            tail += oracle_law[l];
        CHECK(p(cap) == doctest::Approx(tail).epsilon(1e-10));
        CHECK(p.support_max() == cap);
        CHECK(std::abs(p.total() - 1.0) < 1e-9);
    }
}

TEST_CASE("mean CRI length grows with the contender count")
{
    double previous = cri_length_pmf(1, 2048).mean();
    for (int u = 2; u <= 100; ++u) {
        const double mean = cri_length_pmf(u, 2048).mean();
        CHECK(mean > previous);
        previous = mean;
    }
}

TEST_CASE("unresolved probability")
{
    for (int lmax : {1, 2, 10, 500})
        CHECK(unresolved_prob(0, lmax) == 0.0);
    CHECK(unresolved_prob(1, 2) == doctest::Approx(0.75).epsilon(1e-12));
    for (int m : {1, 4, 20, 99}) {
        CHECK(unresolved_prob(m, 4096) < 1e-12);
        for (int lmax : {2, 5, 17, 64}) {
            const auto p = decode_slot_pmf(m, lmax + 1);
            CHECK(std::abs(p.cdf(lmax) + unresolved_prob(m, lmax) - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("window grows until the lower half carries the mass")
{
    const auto laws = TreeLaws::shared(100);
    CHECK(laws->window() >= 64);
    for (int u = 0; u <= 100; ++u) {
        const auto mass = laws->cri_mass(u);
        double lower = 0.0;
        for (std::size_t i = 0; 2 * i < mass.size(); ++i)
            lower += mass[i];
        CHECK(lower >= TreeLaws::kWindowMassTarget);
    }
}

TEST_CASE("idft of a known spectrum")
{
    // p(1) = 0.25, p(3) = 0.75 sampled at 8 points
    constexpr int n = 8;
    std::vector<Complex> spec(n / 2 + 1);
    for (int k = 0; k <= n / 2; ++k) {
        const Complex z = std::polar(1.0, -2.0 * std::numbers::pi * k / n);
        spec[k] = 0.25 * z + 0.75 * z * z * z;
    }
    const auto masses = idft_masses(spec, n);
    CHECK(masses[0] == doctest::Approx(0.25));
    CHECK(masses[2] == doctest::Approx(0.75));
    CHECK(std::abs(masses[1]) < 1e-15);
}

TEST_CASE("Pmf invariants")
{
    CHECK_THROWS(Pmf(0, {1.0}));
    CHECK_THROWS(Pmf(1, {0.5, 0.4}));
    CHECK_THROWS(Pmf(1, {1.1, -0.1}));
    const Pmf tiny_negative(2, {1.0 + 5e-11, -5e-11});
    CHECK(tiny_negative(3) == 0.0);
    const Pmf p(2, {0.5, 0.5});
    CHECK(p.mean() == doctest::Approx(2.5));
    CHECK(p.second_moment() == doctest::Approx(6.5));
    CHECK(p.cdf(2) == doctest::Approx(0.5));
    CHECK(p(7) == 0.0);
}
