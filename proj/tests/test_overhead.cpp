#include <catch_amalgamated.hpp>

#include <random>

#include "nrsim/overhead.hpp"

using namespace nrsim;

namespace {

const AntennaConfig kArray{4, 1, 1, true};
const Oversampling kOv{4, 1};

} // namespace

TEST_CASE("Type I wideband report sizes", "[overhead]")
{
    const auto r1 = type1_overhead_bits(kArray, kOv, 1, 1);
    CHECK(r1.bits("i11") == 4);
    CHECK(r1.bits("i12") == 0);
    CHECK(r1.bits("i13") == 0);
    CHECK(r1.bits("i2") == 2);
    CHECK(r1.total_bits == 6);

    const auto r2 = type1_overhead_bits(kArray, kOv, 2, 1);
    CHECK(r2.bits("i13") == 2);
    CHECK(r2.bits("i2") == 1);
    CHECK(r2.total_bits == 7);
}

TEST_CASE("Type II wideband report sizes", "[overhead]")
{
    const auto r1 = type2_overhead_bits(kArray, kOv, Type2Config{4, 8}, 1, 1);
    CHECK(r1.bits("i11") == 2);
    CHECK(r1.bits("i12") == 0);
    CHECK(r1.bits("i131") == 2);
    CHECK(r1.bits("i141") == 24);
    CHECK(r1.bits("i211") == 24);
    CHECK(r1.bits("i221") == 8);
    CHECK(r1.total_bits == 60);

    const AntennaConfig small{2, 1, 1, true};
    const auto r2 = type2_overhead_bits(small, kOv, Type2Config{2, 4}, 1, 1);
    CHECK(r2.bits("i12") == 0);
    CHECK(r2.bits("i131") == 1);
    CHECK(r2.bits("i141") == 12);
    CHECK(r2.bits("i211") == 8);
    CHECK(r2.bits("i221") == 4);
    CHECK(r2.total_bits == 27);
}

TEST_CASE("more Type II beams cost strictly more bits", "[overhead]")
{
    const auto b4 = type2_overhead_bits(kArray, kOv, Type2Config{4, 8}, 1, 1).total_bits;
    const auto b2 = type2_overhead_bits(kArray, kOv, Type2Config{2, 8}, 1, 1).total_bits;
    CHECK(b4 > b2);
    CHECK(type2_overhead_bits(kArray, kOv, Type2Config{2, 8}, 1, 1).bits("i12") == 3);
}

TEST_CASE("subband indices scale with the subband count", "[overhead]")
{
    const auto t1 = type1_overhead_bits(kArray, kOv, 1, 13);
    CHECK(t1.bits("i2") == 26);
    CHECK(t1.total_bits == 4 + 26);
    const auto t2 = type2_overhead_bits(kArray, kOv, Type2Config{4, 8}, 2, 13);
    CHECK(t2.total_bits == 2 + 0 + 2 * (2 + 24 + 13 * 24 + 13 * 8));
}

TEST_CASE("N2 = 1 spends no bits on the vertical index", "[overhead]")
{
    for (int n1 : {2, 4, 8, 16}) {
        const AntennaConfig a{n1, 1, 1, true};
        CHECK(type1_overhead_bits(a, oversampling_factors(a), 1, 1).bits("i12") == 0);
    }
}

TEST_CASE("expected overhead over a rank distribution", "[overhead]")
{
    CHECK(std::abs(expected_overhead(std::vector<double>{1.0}, std::vector<int>{6}) - 6.0) <= 1e-12);
    CHECK(std::abs(expected_overhead(std::vector<double>{0.5, 0.5}, std::vector<int>{6, 8}) - 7.0) <= 1e-12);
    CHECK(std::abs(expected_overhead(std::vector<double>{0.25, 0.75}, std::vector<int>{4, 8}) - 7.0) <= 1e-12);

    const std::vector<double> half{0.5, 0.5};
    const std::vector<int> q{6, 7};
    CHECK(std::abs(expected_overhead(half, q) - 6.5) <= 1e-12);
    const std::vector<double> one{1.0, 0.0};
    CHECK(std::abs(expected_overhead(one, q) - 6.0) <= 1e-12);
    const std::vector<double> t2{0.25, 0.75};
    const std::vector<int> q2{60, 27};
    CHECK(std::abs(expected_overhead(t2, q2) - (15.0 + 20.25)) <= 1e-12);

    CHECK_THROWS_AS(expected_overhead(std::vector<double>{0.5, 0.4}, q), std::invalid_argument);
    CHECK_THROWS_AS(expected_overhead(std::vector<double>{1.0}, q), std::invalid_argument);
    CHECK_THROWS_AS(expected_overhead(std::vector<double>{1.5, -0.5}, q), std::invalid_argument);
}

TEST_CASE("expected overhead lies between the per-rank extremes", "[overhead][property]")
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> bits(0, 500);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 1 + trial % 4;
        std::vector<double> p(static_cast<std::size_t>(n));
        std::vector<int> q(static_cast<std::size_t>(n));
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            p[static_cast<std::size_t>(i)] = u(rng);
            sum += p[static_cast<std::size_t>(i)];
            q[static_cast<std::size_t>(i)] = bits(rng);
        }
        for (double& x : p) {
            x /= sum;
        }
        const double e = expected_overhead(p, q);
        CHECK(e >= *std::min_element(q.begin(), q.end()) - 1e-9);
        CHECK(e <= *std::max_element(q.begin(), q.end()) + 1e-9);
    }
}

TEST_CASE("rounding each index up costs less than one bit per index", "[overhead][property]")
{
    for (int n1 : {2, 4, 6, 8, 12, 16}) {
        const AntennaConfig a{n1, 1, 1, true};
        const auto ov = oversampling_factors(a);
        const auto r = type1_overhead_bits(a, ov, 2, 1);
        const double exact = std::log2(n1 * ov.o1) + std::log2(n1 == 2 ? 2.0 : 4.0) + 1.0;
        CHECK(r.total_bits >= exact - 1e-12);
        CHECK(r.total_bits - exact < 3.0);
        CHECK(r.bits("i11") - std::log2(n1 * ov.o1) < 1.0);
    }
}

TEST_CASE("Type II always costs more than Type I", "[overhead][property]")
{
    for (int sb : {1, 13}) {
        const auto t1 = type1_per_rank_bits(kArray, kOv, 2, sb);
        const auto t2 = type2_per_rank_bits(kArray, kOv, Type2Config{4, 8}, 2, sb);
        for (std::size_t r = 0; r < 2; ++r) {
            CHECK(t2[r] > t1[r]);
        }
    }
}

TEST_CASE("overhead rejects invalid ranks", "[overhead]")
{
    CHECK_THROWS_AS(type1_overhead_bits(kArray, kOv, 0, 1), ConfigError);
    CHECK_THROWS_AS(type1_overhead_bits(kArray, kOv, 5, 1), ConfigError);
    CHECK_THROWS_AS(type2_overhead_bits(kArray, kOv, Type2Config{}, 3, 1), ConfigError);
    CHECK_THROWS_AS(type1_overhead_bits(kArray, kOv, 1, 0), std::invalid_argument);
}
