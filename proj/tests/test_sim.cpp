#include <catch_amalgamated.hpp>

#include <numeric>

#include "nrsim/sim.hpp"

using namespace nrsim;

namespace {

SweepConfig small_sweep(CodebookMode mode, int slots = 40)
{
    SweepConfig cfg;
    cfg.snr_points_db = {-30.0, 0.0, 10.0, 20.0, 30.0};
    cfg.num_slots = slots;
    cfg.codebook_mode = mode;
    cfg.scenario.channel.num_subbands = 4;
    cfg.seed = 3;
    return cfg;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

} // namespace

TEST_CASE("very low SNR yields nothing", "[sim]")
{
    for (auto mode : {CodebookMode::TypeI, CodebookMode::TypeII}) {
        auto cfg = small_sweep(mode);
        cfg.snr_points_db = {-30.0};
        const auto res = run_sweep(cfg);
        CHECK(res.points[0].mean_se == 0.0);
        CHECK(res.points[0].cqi_histogram[0] == 1.0);
        CHECK(res.points[0].slots_failed == 0.0);
    }
}

TEST_CASE("a frozen channel without delay never fails", "[sim]")
{
    for (auto mode : {CodebookMode::TypeI, CodebookMode::TypeII}) {
        auto cfg = small_sweep(mode, 20);
        cfg.feedback_delay_slots = 0;
        cfg.scenario.channel.doppler_hz = 0.0;
        const auto res = run_sweep(cfg);
        for (const auto& p : res.points) {
            CHECK(p.slots_failed == 0.0);
        }
    }
}

TEST_CASE("ideal SVD bounds the codebooks from above", "[sim][property]")
{
    std::vector<SweepConfig> cfgs;
    for (auto mode : {CodebookMode::SvdIdeal, CodebookMode::TypeI, CodebookMode::TypeII}) {
        cfgs.push_back(small_sweep(mode, 30));
    }
    const auto table = compare_modes(cfgs);
    for (const auto& row : table.rows) {
        CHECK(row.mean_se[0] >= row.mean_se[1]);
        CHECK(row.mean_se[0] >= row.mean_se[2]);
        CHECK(row.mean_se[1] >= 0.0);
        CHECK(row.mean_se[2] >= 0.0);
    }
    CHECK(table.results[0].per_rank_bits == std::vector<int>{0, 0, 0, 0});
}

TEST_CASE("histograms are distributions and ranks respect the codebook", "[sim][property]")
{
    for (auto mode : {CodebookMode::TypeI, CodebookMode::TypeII, CodebookMode::SvdIdeal}) {
        const auto res = run_sweep(small_sweep(mode, 25));
        const std::size_t ranks = mode == CodebookMode::TypeII ? 2 : 4;
        for (const auto& p : res.points) {
            CHECK(p.ri_histogram.size() == ranks);
            CHECK(p.cqi_histogram.size() == 16);
            CHECK(std::abs(sum(p.ri_histogram) - 1.0) <= 1e-12);
            CHECK(std::abs(sum(p.cqi_histogram) - 1.0) <= 1e-12);
            CHECK(p.slots_failed >= 0.0);
            CHECK(p.slots_failed <= 1.0);
            CHECK(p.mean_mbps == Catch::Approx(p.mean_se * res.bandwidth_hz / 1e6));
        }
    }
}

TEST_CASE("mean overhead is the expectation over the rank histogram", "[sim]")
{
    for (auto mode : {CodebookMode::TypeI, CodebookMode::TypeII}) {
        const auto res = run_sweep(small_sweep(mode, 25));
        for (const auto& p : res.points) {
            CHECK(p.mean_overhead_bits == expected_overhead(p.ri_histogram, res.per_rank_bits));
        }
    }
}

TEST_CASE("sweeps are deterministic and independent of worker count", "[sim]")
{
    auto cfg = small_sweep(CodebookMode::TypeI, 15);
    const auto a = run_sweep(cfg);
    cfg.threads = 3;
    const auto b = run_sweep(cfg);
    REQUIRE(a.points.size() == b.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        CHECK(a.points[i].mean_se == b.points[i].mean_se);
        CHECK(a.points[i].ri_histogram == b.points[i].ri_histogram);
        CHECK(a.points[i].cqi_histogram == b.points[i].cqi_histogram);
    }
}

TEST_CASE("comparing a mode with itself gives identical rows and ties", "[sim]")
{
    const auto cfg = small_sweep(CodebookMode::TypeII, 10);
    const auto table = compare_modes({cfg, cfg});
    for (const auto& row : table.rows) {
        CHECK(row.mean_se[0] == row.mean_se[1]);
        CHECK(row.winner == -1);
    }
    const auto regions = table.regions();
    REQUIRE(regions.size() == 1);
    CHECK(regions[0].snr_from_db == -30.0);
    CHECK(regions[0].snr_to_db == 30.0);
}

TEST_CASE("mismatched comparisons are rejected", "[sim]")
{
    auto a = small_sweep(CodebookMode::TypeI, 10);
    auto b = small_sweep(CodebookMode::TypeII, 10);
    b.seed = 4;
    CHECK_THROWS_AS(compare_modes({a, b}), std::invalid_argument);
}

TEST_CASE("sweep configuration errors name the field", "[sim]")
{
    auto cfg = small_sweep(CodebookMode::TypeI);
    cfg.num_slots = 0;
    CHECK_THROWS_WITH(cfg.validate(), Catch::Matchers::StartsWith("slots"));
    cfg = small_sweep(CodebookMode::TypeI);
    cfg.snr_points_db.clear();
    CHECK_THROWS_WITH(cfg.validate(), Catch::Matchers::StartsWith("snr"));
    cfg = small_sweep(CodebookMode::TypeI);
    cfg.scenario.num_rx = 0;
    CHECK_THROWS_WITH(cfg.validate(), Catch::Matchers::StartsWith("rx"));
    cfg = small_sweep(CodebookMode::TypeI);
    cfg.feedback_delay_slots = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK_THROWS_AS(parse_codebook_mode("type3"), ConfigError);
    CHECK(parse_codebook_mode("svd") == CodebookMode::SvdIdeal);
}

TEST_CASE("Type II high-SNR rank stays at most two while Type I goes higher", "[sim]")
{
    auto t1 = small_sweep(CodebookMode::TypeI, 30);
    t1.snr_points_db = {40.0};
    auto t2 = t1;
    t2.codebook_mode = CodebookMode::TypeII;
    const auto table = compare_modes({t1, t2});
    const auto& r1 = table.results[0].points[0].ri_histogram;
    CHECK(r1[2] + r1[3] >= 0.5);
    CHECK(table.results[1].points[0].ri_histogram.size() == 2);
}
