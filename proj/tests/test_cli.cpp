#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "cli.hpp"

namespace fs = std::filesystem;
using nrsim::cli::run;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result invoke(const std::vector<std::string>& args)
{
    std::ostringstream out;
    std::ostringstream err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("nrsim_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("overhead prints the Type I wideband total", "[cli]")
{
    const auto r = invoke({"overhead", "--codebook", "type1", "--rank", "1"});
    CHECK(r.code == 0);
    CHECK(std::regex_search(r.out, std::regex("total +6 bits")));
    CHECK(r.out.find("total,6") != std::string::npos);

    const auto t2 = invoke({"overhead", "--codebook", "type2", "--rank", "1"});
    CHECK(t2.code == 0);
    CHECK(t2.out.find("total,60") != std::string::npos);
}

TEST_CASE("zero slots is a configuration error naming the key", "[cli]")
{
    const auto r = invoke({"sweep", "--slots", "0", "--out", scratch("zero").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("slots") != std::string::npos);
}

TEST_CASE("usage errors exit with 2", "[cli]")
{
    CHECK(invoke({"frobnicate"}).code == 2);
    CHECK(invoke({"sweep", "--bogus"}).code == 2);
    CHECK(invoke({}).code == 2);
    CHECK(invoke({"codebook"}).code == 2);
    const auto bad = invoke({"sweep", "--codebook", "type9"});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("sweep.codebook") != std::string::npos);
    const auto snr = invoke({"sweep", "--snr", "10:0:20"});
    CHECK(snr.code == 2);
    CHECK(snr.err.find("sweep.snr") != std::string::npos);
    CHECK(invoke({"--help"}).code == 0);
}

TEST_CASE("unsupported antenna layouts are configuration errors", "[cli]")
{
    const auto r = invoke({"overhead", "--n1", "5"});
    CHECK(r.code == 2);
    CHECK(r.err.find("(5, 1)") != std::string::npos);
}

TEST_CASE("seeded sweeps produce byte-identical CSVs", "[cli]")
{
    const auto a = scratch("seed_a");
    const auto b = scratch("seed_b");
    const std::vector<std::string> common{"sweep", "--seed", "7", "--slots", "6", "--snr", "0:10:20", "--subbands", "3"};
    auto args_a = common;
    args_a.insert(args_a.end(), {"--out", a.string()});
    auto args_b = common;
    args_b.insert(args_b.end(), {"--out", b.string()});
    REQUIRE(invoke(args_a).code == 0);
    REQUIRE(invoke(args_b).code == 0);
    for (const char* f : {"sweep.csv", "ri_hist.csv", "cqi_hist.csv", "compare.csv"}) {
        INFO(f);
        REQUIRE(fs::exists(a / f));
        CHECK(slurp(a / f) == slurp(b / f));
    }
    const std::string sweep = slurp(a / "sweep.csv");
    CHECK(sweep.rfind("snr_db,mode,mean_se,mean_mbps,mean_overhead_bits,fail_frac\n", 0) == 0);
    // 3 SNR points x 3 modes plus the header
    CHECK(std::count(sweep.begin(), sweep.end(), '\n') == 10);
    CHECK(fs::exists(a / "manifest.ini"));
    CHECK_FALSE(fs::exists(a / "manifest.ini.tmp"));
}

TEST_CASE("a written manifest reproduces the run", "[cli]")
{
    const auto a = scratch("manifest_a");
    const auto b = scratch("manifest_b");
    REQUIRE(invoke({"sweep", "--seed", "3", "--slots", "5", "--snr", "5,15", "--codebook", "type1,type2",
                    "--subbands", "2", "--out", a.string()})
                .code
            == 0);
    const std::string manifest = slurp(a / "manifest.ini");
    CHECK(manifest.find("seed = 3") != std::string::npos);
    CHECK(manifest.find("codebook = type1,type2") != std::string::npos);
    REQUIRE(invoke({"sweep", "--config", (a / "manifest.ini").string(), "--out", b.string()}).code == 0);
    CHECK(slurp(a / "sweep.csv") == slurp(b / "sweep.csv"));
    CHECK(slurp(a / "compare.csv") == slurp(b / "compare.csv"));
}

TEST_CASE("flags override the config file which overrides defaults", "[cli]")
{
    const auto dir = scratch("precedence");
    const auto cfg = dir / "run.ini";
    {
        std::ofstream f(cfg);
        f << "[overhead]\nrank = 2\ncodebook = type1\n[scenario]\nn1 = 2\n";
    }
    const auto file_only = invoke({"overhead", "--config", cfg.string()});
    REQUIRE(file_only.code == 0);
    // n1 = 2: i11 3 bits, i13 2 bits, i2 1 bit
    CHECK(file_only.out.find("total,6") != std::string::npos);
    CHECK(file_only.out.find("rank=2") != std::string::npos);

    const auto flag = invoke({"overhead", "--config", cfg.string(), "--rank", "1"});
    REQUIRE(flag.code == 0);
    CHECK(flag.out.find("rank=1") != std::string::npos);
    CHECK(flag.out.find("total,5") != std::string::npos);

    {
        std::ofstream f(cfg);
        f << "[sweep]\nslotz = 4\n";
    }
    const auto unknown = invoke({"overhead", "--config", cfg.string()});
    CHECK(unknown.code == 2);
    CHECK(unknown.err.find("sweep.slotz") != std::string::npos);

    {
        std::ofstream f(cfg);
        f << "[channel]\ndoppler_hz = fast\n";
    }
    const auto bad = invoke({"overhead", "--config", cfg.string()});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("channel.doppler_hz") != std::string::npos);

    CHECK(invoke({"overhead", "--config", (dir / "missing.ini").string()}).code == 2);
}

TEST_CASE("NRSIM_THREADS must be a positive integer", "[cli]")
{
    ::setenv("NRSIM_THREADS", "zero", 1);
    const auto r = invoke({"sweep", "--slots", "2", "--snr", "0", "--out", scratch("threads").string()});
    ::unsetenv("NRSIM_THREADS");
    CHECK(r.code == 2);
    CHECK(r.err.find("NRSIM_THREADS") != std::string::npos);
}

TEST_CASE("codebook dump emits every Type I entry", "[cli]")
{
    const auto r = invoke({"codebook", "dump", "--codebook", "type1", "--rank", "2"});
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("type,rank,i11,i12,i13,i2,row,col,re,im\n", 0) == 0);
    // 128 entries x 8 ports x 2 layers
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 1 + 128 * 16);
    const auto t2 = invoke({"codebook", "dump", "--codebook", "type2"});
    REQUIRE(t2.code == 0);
    // 4 rotations x 1 combination x 4 beams x 4 elements
    CHECK(std::count(t2.out.begin(), t2.out.end(), '\n') == 1 + 64);
}

TEST_CASE("channel probe passes on the default model", "[cli]")
{
    const auto r = invoke({"channel", "probe", "--slots", "2000"});
    CHECK(r.code == 0);
    CHECK(r.out.find("channel probe passed") != std::string::npos);
}
