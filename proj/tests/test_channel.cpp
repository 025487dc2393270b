#include <catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "nrsim/channel.hpp"

using namespace nrsim;
using Catch::Approx;

namespace {

ChannelConfig small_config()
{
    ChannelConfig cfg;
    cfg.num_tx_ports = 2;
    cfg.num_rx_ports = 2;
    cfg.num_subbands = 4;
    return cfg;
}

} // namespace

TEST_CASE("CDL-A profile has 23 normalized clusters", "[channel]")
{
    const auto pdp = cdl_a_pdp();
    REQUIRE(pdp.size() == 23);
    double sum = 0.0;
    for (const auto& t : pdp) {
        sum += t.power_linear;
        CHECK(t.normalized_delay >= 0.0);
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
    CHECK(pdp.front().normalized_delay == 0.0);
    // strongest cluster is the 0 dB one at 0.3819
    const auto strongest = std::max_element(pdp.begin(), pdp.end(),
                                            [](const auto& a, const auto& b) { return a.power_linear < b.power_linear; });
    CHECK(strongest->normalized_delay == Approx(0.3819));
}

TEST_CASE("zero Doppler freezes the channel across slots", "[channel]")
{
    auto cfg = small_config();
    cfg.doppler_hz = 0.0;
    const auto ch = generate_channel(cfg, 20);
    for (int s = 1; s < ch.num_slots(); ++s) {
        for (int k = 0; k < ch.num_subbands(); ++k) {
            CHECK((ch.at(s, k) - ch.at(0, k)).norm() == 0.0);
        }
    }
}

TEST_CASE("a single tap at zero delay gives a flat channel", "[channel]")
{
    auto cfg = small_config();
    cfg.pdp = {{0.0, 1.0}};
    cfg.num_subbands = 13;
    const auto ch = generate_channel(cfg, 5);
    for (int s = 0; s < ch.num_slots(); ++s) {
        for (int k = 1; k < ch.num_subbands(); ++k) {
            CHECK((ch.at(s, k) - ch.at(s, 0)).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
}

TEST_CASE("the CDL-A channel is frequency selective", "[channel]")
{
    ChannelConfig cfg;
    const auto ch = generate_channel(cfg, 1);
    double spread = 0.0;
    for (int k = 1; k < ch.num_subbands(); ++k) {
        spread += (ch.at(0, k) - ch.at(0, 0)).norm();
    }
    CHECK(spread > 0.1);
}

TEST_CASE("generation is deterministic per seed", "[channel]")
{
    ChannelConfig cfg;
    cfg.seed = 99;
    const auto a = generate_channel(cfg, 30);
    const auto b = generate_channel(cfg, 30);
    for (int s = 0; s < a.num_slots(); ++s) {
        for (int k = 0; k < a.num_subbands(); ++k) {
            REQUIRE(a.at(s, k) == b.at(s, k));
        }
    }
    cfg.seed = 100;
    const auto c = generate_channel(cfg, 1);
    CHECK(c.at(0, 0) != a.at(0, 0));
}

TEST_CASE("ensemble tap power matches the profile within 3%", "[channel][statistics]")
{
    auto cfg = small_config();
    const auto pdp = cdl_a_pdp();
    std::vector<double> acc(pdp.size(), 0.0);
    const int drops = 10000;
    for (int d = 0; d < drops; ++d) {
        cfg.seed = 1000 + static_cast<std::uint64_t>(d);
        const auto taps = generate_taps(cfg, 1);
        for (std::size_t t = 0; t < pdp.size(); ++t) {
            acc[t] += taps[0][t].squaredNorm() / 4.0;
        }
    }
    for (std::size_t t = 0; t < pdp.size(); ++t) {
        INFO("tap " << t);
        CHECK(std::abs(acc[t] / drops / pdp[t].power_linear - 1.0) <= 0.03);
    }
}

TEST_CASE("frequency response conserves unit average power", "[channel][statistics]")
{
    ChannelConfig cfg;
    cfg.num_tx_ports = 2;
    cfg.num_rx_ports = 2;
    double acc = 0.0;
    const int drops = 10000;
    for (int d = 0; d < drops; ++d) {
        cfg.seed = 7 + static_cast<std::uint64_t>(d);
        const auto ch = generate_channel(cfg, 1);
        double p = 0.0;
        for (int k = 0; k < ch.num_subbands(); ++k) {
            p += ch.at(0, k).squaredNorm();
        }
        acc += p / (ch.num_subbands() * 4.0);
    }
    CHECK(std::abs(acc / drops - 1.0) <= 0.03);
}

TEST_CASE("lag-1 autocorrelation follows the Clarke coefficient", "[channel][statistics]")
{
    ChannelConfig cfg;
    cfg.num_tx_ports = 1;
    cfg.num_rx_ports = 1;
    cfg.num_subbands = 1;
    cfg.pdp = {{0.0, 1.0}};
    cfg.doppler_hz = 100.0;
    cfg.seed = 5;
    const int n = 100000;
    const auto taps = generate_taps(cfg, n);
    cdouble num = 0.0;
    double den = 0.0;
    for (int s = 0; s + 1 < n; ++s) {
        const cdouble a = taps[static_cast<std::size_t>(s)][0](0, 0);
        const cdouble b = taps[static_cast<std::size_t>(s + 1)][0](0, 0);
        num += b * std::conj(a);
        den += std::norm(a);
    }
    const double expected = std::cyl_bessel_j(0.0, 2.0 * kPi * 100.0 * 1e-3);
    CHECK(std::abs(num.real() / den - expected) <= 0.02);
    CHECK(cfg.slot_correlation() == Approx(expected));
}

TEST_CASE("channel generation rejects invalid input", "[channel]")
{
    ChannelConfig cfg;
    CHECK_THROWS_AS(generate_channel(cfg, 0), std::invalid_argument);
    cfg.pdp.clear();
    CHECK_THROWS_AS(generate_channel(cfg, 1), std::invalid_argument);
    ChannelConfig neg;
    neg.pdp = {{-1.0, 1.0}};
    CHECK_THROWS_AS(neg.validate(), std::invalid_argument);
}

TEST_CASE("power-delay profile loads from a two-column file", "[channel][io]")
{
    const auto path = std::filesystem::temp_directory_path() / "nrsim_pdp_test.txt";
    {
        std::ofstream out(path);
        out << "# delay_ns power_db\n";
        out << "50, 0\n";
        out << "150 -3.0103\n";
        out << "\n";
    }
    const auto pdp = load_pdp_file(path.string(), 100.0);
    REQUIRE(pdp.size() == 2);
    CHECK(pdp[0].normalized_delay == 0.0);
    CHECK(pdp[1].normalized_delay == Approx(1.0));
    CHECK(pdp[0].power_linear == Approx(2.0 / 3.0).epsilon(1e-4));
    CHECK(pdp[0].power_linear + pdp[1].power_linear == Approx(1.0));
    std::filesystem::remove(path);

    CHECK_THROWS_AS(load_pdp_file("/nonexistent/pdp.txt", 100.0), ConfigError);
}
