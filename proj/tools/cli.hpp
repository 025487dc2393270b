#pragma once

// Command-line front end. Settings resolve as flags > config file > defaults;
// the config file is INI (sections [scenario], [channel], [type2], [cqi],
// [sweep], [overhead]; a [manifest] section is ignored so a written
// manifest can be fed back with --config).

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <CLI11.hpp>

#include "nrsim/sim.hpp"

namespace nrsim::cli {

inline constexpr const char* kVersion = "0.1.0";

struct Settings {
    // [scenario]
    int n1 = 4;
    int n2 = 1;
    int rx = 4;
    // [channel]
    double doppler_hz = 5.0;
    double delay_spread_ns = 100.0;
    int num_subbands = 13;
    double subband_spacing_hz = 720e3;
    double slot_duration_s = 1e-3;
    std::string pdp_file;
    // [type2]
    int beams = 4;
    int n_psk = 8;
    // [cqi]
    double gap_db = 2.0;
    double target_bler = 0.1;
    std::string table_file;
    // [sweep]
    std::string snr = "-10:2:40";
    int slots = 1000;
    int feedback_delay = 1;
    std::string sweep_codebook = "all";
    std::uint64_t seed = 1;
    // [overhead]
    std::string report_codebook = "type1";
    int rank = 1;
    int subbands = 1;
};

/// Shortest round-trip decimal form; identical input gives identical text.
inline std::string fmt(double x)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

namespace detail {

[[noreturn]] inline void bad_value(const std::string& key, const std::string& detail)
{
    throw ConfigError(key + ": " + detail);
}

inline long long parse_integer(const std::string& key, const std::string& text)
{
    long long v = 0;
    const auto* end = text.data() + text.size();
    const auto res = std::from_chars(text.data(), end, v);
    if (res.ec != std::errc() || res.ptr != end) {
        bad_value(key, "expected an integer, got '" + text + "'");
    }
    return v;
}

inline double parse_real(const std::string& key, const std::string& text)
{
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto res = std::from_chars(text.data(), end, v);
    if (res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) {
        bad_value(key, "expected a number, got '" + text + "'");
    }
    return v;
}

} // namespace detail

/// One config key: "section.name", its parser and its printer.
struct Key {
    std::string section;
    std::string name;
    std::function<void(Settings&, const std::string&)> set;
    std::function<std::string(const Settings&)> get;

    std::string id() const { return section + "." + name; }
};

inline Key int_key(std::string section, std::string name, int Settings::*m, long long lo, long long hi)
{
    Key k{section, name, {}, {}};
    const std::string id = k.id();
    k.set = [=](Settings& s, const std::string& text) {
        const long long v = detail::parse_integer(id, text);
        if (v < lo || v > hi) {
            detail::bad_value(id, "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "], got "
                                      + std::to_string(v));
        }
        s.*m = static_cast<int>(v);
    };
    k.get = [=](const Settings& s) { return std::to_string(s.*m); };
    return k;
}

inline Key real_key(std::string section, std::string name, double Settings::*m,
                    std::function<bool(double)> ok, std::string rule)
{
    Key k{section, name, {}, {}};
    const std::string id = k.id();
    k.set = [=](Settings& s, const std::string& text) {
        const double v = detail::parse_real(id, text);
        if (!ok(v)) {
            detail::bad_value(id, "must be " + rule + ", got " + text);
        }
        s.*m = v;
    };
    k.get = [=](const Settings& s) { return fmt(s.*m); };
    return k;
}

inline Key text_key(std::string section, std::string name, std::string Settings::*m,
                    std::function<void(const std::string& id, const std::string&)> check = {})
{
    Key k{section, name, {}, {}};
    const std::string id = k.id();
    k.set = [=](Settings& s, const std::string& text) {
        if (check) {
            check(id, text);
        }
        s.*m = text;
    };
    k.get = [=](const Settings& s) { return s.*m; };
    return k;
}

/// "min:step:max", a comma-separated list, or a single value.
inline std::vector<double> parse_snr(const std::string& text, const std::string& key = "sweep.snr")
{
    std::vector<double> out;
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        for (std::string p; std::getline(ss, p, ':');) {
            parts.push_back(p);
        }
        if (parts.size() != 3) {
            detail::bad_value(key, "expected min:step:max, got '" + text + "'");
        }
        const double lo = detail::parse_real(key, parts[0]);
        const double step = detail::parse_real(key, parts[1]);
        const double hi = detail::parse_real(key, parts[2]);
        if (step <= 0.0 || hi < lo) {
            detail::bad_value(key, "need step > 0 and max >= min, got '" + text + "'");
        }
        const auto n = static_cast<long long>(std::floor((hi - lo) / step + 1e-9)) + 1;
        if (n > 100000) {
            detail::bad_value(key, "too many points in '" + text + "'");
        }
        for (long long i = 0; i < n; ++i) {
            out.push_back(lo + static_cast<double>(i) * step);
        }
        return out;
    }
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ',');) {
        out.push_back(detail::parse_real(key, p));
    }
    if (out.empty()) {
        detail::bad_value(key, "no SNR points given");
    }
    if (!std::is_sorted(out.begin(), out.end())) {
        detail::bad_value(key, "points must be ascending");
    }
    return out;
}

/// "all" or a comma-separated list of type1, type2, svd.
inline std::vector<CodebookMode> parse_modes(const std::string& text, const std::string& key = "sweep.codebook")
{
    if (text == "all") {
        return {CodebookMode::TypeI, CodebookMode::TypeII, CodebookMode::SvdIdeal};
    }
    std::vector<CodebookMode> out;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ',');) {
        try {
            out.push_back(parse_codebook_mode(p));
        } catch (const ConfigError&) {
            detail::bad_value(key, "expected type1, type2, svd or all, got '" + p + "'");
        }
    }
    if (out.empty()) {
        detail::bad_value(key, "no codebook given");
    }
    return out;
}

inline const std::vector<Key>& keys()
{
    using S = Settings;
    auto positive = [](double v) { return v > 0.0; };
    auto non_negative = [](double v) { return v >= 0.0; };
    static const std::vector<Key> kKeys = {
        int_key("scenario", "n1", &S::n1, 1, 64),
        int_key("scenario", "n2", &S::n2, 1, 64),
        int_key("scenario", "rx", &S::rx, 1, 64),
        real_key("channel", "doppler_hz", &S::doppler_hz, non_negative, ">= 0"),
        real_key("channel", "delay_spread_ns", &S::delay_spread_ns, positive, "> 0"),
        int_key("channel", "num_subbands", &S::num_subbands, 1, 1000),
        real_key("channel", "subband_spacing_hz", &S::subband_spacing_hz, positive, "> 0"),
        real_key("channel", "slot_duration_s", &S::slot_duration_s, positive, "> 0"),
        text_key("channel", "pdp_file", &S::pdp_file),
        int_key("type2", "beams", &S::beams, 2, 4),
        int_key("type2", "n_psk", &S::n_psk, 4, 8),
        real_key("cqi", "gap_db", &S::gap_db, [](double) { return true; }, "finite"),
        real_key("cqi", "target_bler", &S::target_bler, [](double v) { return v > 0.0 && v < 1.0; }, "in (0, 1)"),
        text_key("cqi", "table_file", &S::table_file),
        text_key("sweep", "snr", &S::snr, [](const std::string& id, const std::string& v) { parse_snr(v, id); }),
        int_key("sweep", "slots", &S::slots, 1, 100000000),
        int_key("sweep", "feedback_delay", &S::feedback_delay, 0, 1000),
        text_key("sweep", "codebook", &S::sweep_codebook,
                 [](const std::string& id, const std::string& v) { parse_modes(v, id); }),
        [] {
            Key k{"sweep", "seed", {}, {}};
            k.set = [](Settings& s, const std::string& text) {
                std::uint64_t v = 0;
                const auto* end = text.data() + text.size();
                const auto res = std::from_chars(text.data(), end, v);
                if (res.ec != std::errc() || res.ptr != end) {
                    detail::bad_value("sweep.seed", "expected a non-negative integer, got '" + text + "'");
                }
                s.seed = v;
            };
            k.get = [](const Settings& s) { return std::to_string(s.seed); };
            return k;
        }(),
        text_key("overhead", "codebook", &S::report_codebook,
                 [](const std::string& id, const std::string& v) {
                     if (v != "type1" && v != "type2") {
                         detail::bad_value(id, "expected type1 or type2, got '" + v + "'");
                     }
                 }),
        int_key("overhead", "rank", &S::rank, 1, 4),
        int_key("overhead", "subbands", &S::subbands, 1, 1000),
    };
    return kKeys;
}

inline const Key& find_key(const std::string& id)
{
    for (const auto& k : keys()) {
        if (k.id() == id) {
            return k;
        }
    }
    throw ConfigError(id + ": unknown config key");
}

/// Applies every key of an INI file on top of `s`.
inline void apply_config_file(Settings& s, const std::string& path)
{
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::ini_parser::read_ini(path, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("config: " + std::string(e.what()));
    }
    for (const auto& [section, body] : tree) {
        if (body.empty()) {
            throw ConfigError(section + ": config key outside a section");
        }
        if (section == "manifest") {
            continue;
        }
        for (const auto& [name, value] : body) {
            find_key(section + "." + name).set(s, value.data());
        }
    }
}

inline std::string settings_ini(const Settings& s)
{
    std::ostringstream out;
    std::string section;
    for (const auto& k : keys()) {
        if (k.section != section) {
            section = k.section;
            out << "\n[" << section << "]\n";
        }
        out << k.name << " = " << k.get(s) << "\n";
    }
    return out.str();
}

inline void write_atomic(const std::filesystem::path& path, const std::string& content)
{
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) {
            throw std::runtime_error("cannot write " + tmp.string());
        }
        f << content;
        if (!f.flush()) {
            throw std::runtime_error("write failed for " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

inline int worker_count()
{
    const char* env = std::getenv("NRSIM_THREADS");
    if (env == nullptr || *env == '\0') {
        return std::max(1u, std::thread::hardware_concurrency());
    }
    const long long v = detail::parse_integer("NRSIM_THREADS", env);
    if (v < 1 || v > 1024) {
        throw ConfigError("NRSIM_THREADS: must be in [1, 1024], got " + std::string(env));
    }
    return static_cast<int>(v);
}

inline AntennaConfig antenna_of(const Settings& s)
{
    AntennaConfig a;
    a.n1 = s.n1;
    a.n2 = s.n2;
    return a;
}

inline Type2Config type2_of(const Settings& s)
{
    if (s.n_psk != 4 && s.n_psk != 8) {
        throw ConfigError("type2.n_psk: must be 4 or 8, got " + std::to_string(s.n_psk));
    }
    return Type2Config{s.beams, s.n_psk};
}

inline Scenario scenario_of(const Settings& s)
{
    Scenario sc;
    sc.antenna = antenna_of(s);
    sc.num_rx = s.rx;
    sc.channel.doppler_hz = s.doppler_hz;
    sc.channel.delay_spread_ns = s.delay_spread_ns;
    sc.channel.num_subbands = s.num_subbands;
    sc.channel.subband_spacing_hz = s.subband_spacing_hz;
    sc.channel.slot_duration_s = s.slot_duration_s;
    if (!s.pdp_file.empty()) {
        sc.channel.pdp = load_pdp_file(s.pdp_file, s.delay_spread_ns);
    }
    sc.type2 = type2_of(s);
    sc.cqi = s.table_file.empty() ? CqiTable::standard(s.gap_db, s.target_bler)
                                  : CqiTable::from_csv(s.table_file, s.target_bler);
    return sc;
}

inline std::vector<SweepConfig> sweep_configs(const Settings& s, int threads)
{
    std::vector<SweepConfig> out;
    const Scenario sc = scenario_of(s);
    for (auto mode : parse_modes(s.sweep_codebook)) {
        SweepConfig c;
        c.snr_points_db = parse_snr(s.snr);
        c.num_slots = s.slots;
        c.feedback_delay_slots = s.feedback_delay;
        c.codebook_mode = mode;
        c.scenario = sc;
        c.seed = s.seed;
        c.threads = threads;
        c.validate();
        out.push_back(std::move(c));
    }
    return out;
}

inline std::string utc_timestamp()
{
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream ss;
    ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return ss.str();
}

inline std::string manifest_text(const Settings& s, const std::string& command, const std::vector<std::string>& outputs)
{
    std::ostringstream out;
    out << "[manifest]\n";
    out << "tool = nrsim\n";
    out << "version = " << kVersion << "\n";
    out << "command = " << command << "\n";
    out << "seed = " << s.seed << "\n";
    out << "timestamp = " << utc_timestamp() << "\n";
    std::string joined;
    for (const auto& o : outputs) {
        joined += (joined.empty() ? "" : ",") + o;
    }
    out << "outputs = " << joined << "\n";
    out << settings_ini(s);
    return out.str();
}

// ---------------------------------------------------------------------------
// Subcommands. Each returns an exit code; configuration problems throw
// ConfigError before any output file is touched.

inline int cmd_sweep(const Settings& s, const std::filesystem::path& out_dir, std::ostream& out)
{
    const auto cfgs = sweep_configs(s, worker_count());
    for (const auto& c : cfgs) {
        LinkSimulator probe(c); // surfaces codebook configuration errors up front
    }

    const std::vector<std::string> outputs = cfgs.size() > 1
                                                 ? std::vector<std::string>{"sweep.csv", "ri_hist.csv", "cqi_hist.csv", "compare.csv"}
                                                 : std::vector<std::string>{"sweep.csv", "ri_hist.csv", "cqi_hist.csv"};
    std::filesystem::create_directories(out_dir);
    write_atomic(out_dir / "manifest.ini", manifest_text(s, "sweep", outputs));

    const ComparisonTable table = compare_modes(cfgs);

    std::ostringstream sweep_csv;
    std::ostringstream ri_csv;
    std::ostringstream cqi_csv;
    sweep_csv << "snr_db,mode,mean_se,mean_mbps,mean_overhead_bits,fail_frac\n";
    ri_csv << "snr_db,mode,ri,fraction\n";
    cqi_csv << "snr_db,mode,cqi,fraction\n";
    for (const auto& res : table.results) {
        const std::string mode = to_string(res.mode);
        for (const auto& p : res.points) {
            sweep_csv << fmt(p.snr_db) << ',' << mode << ',' << fmt(p.mean_se) << ',' << fmt(p.mean_mbps) << ','
                      << fmt(p.mean_overhead_bits) << ',' << fmt(p.slots_failed) << '\n';
            for (std::size_t r = 0; r < p.ri_histogram.size(); ++r) {
                ri_csv << fmt(p.snr_db) << ',' << mode << ',' << r + 1 << ',' << fmt(p.ri_histogram[r]) << '\n';
            }
            for (std::size_t c = 0; c < p.cqi_histogram.size(); ++c) {
                cqi_csv << fmt(p.snr_db) << ',' << mode << ',' << c << ',' << fmt(p.cqi_histogram[c]) << '\n';
            }
        }
    }
    write_atomic(out_dir / "sweep.csv", sweep_csv.str());
    write_atomic(out_dir / "ri_hist.csv", ri_csv.str());
    write_atomic(out_dir / "cqi_hist.csv", cqi_csv.str());

    auto winner_name = [&](int w) { return w < 0 ? std::string("tie") : to_string(table.results[static_cast<std::size_t>(w)].mode); };
    if (table.results.size() > 1) {
        std::ostringstream cmp;
        cmp << "snr_db";
        for (const auto& r : table.results) {
            cmp << ',' << to_string(r.mode) << "_se";
        }
        cmp << ",winner\n";
        for (const auto& row : table.rows) {
            cmp << fmt(row.snr_db);
            for (double v : row.mean_se) {
                cmp << ',' << fmt(v);
            }
            cmp << ',' << winner_name(row.winner) << '\n';
        }
        write_atomic(out_dir / "compare.csv", cmp.str());
    }

    out << std::setw(8) << "snr_db";
    for (const auto& r : table.results) {
        out << std::setw(12) << to_string(r.mode);
    }
    out << "   winner\n";
    out << std::fixed << std::setprecision(3);
    for (const auto& row : table.rows) {
        out << std::setw(8) << row.snr_db;
        for (double v : row.mean_se) {
            out << std::setw(12) << v;
        }
        out << "   " << winner_name(row.winner) << '\n';
    }
    if (table.results.size() > 1) {
        out << "regions:\n";
        for (const auto& reg : table.regions()) {
            out << "  " << std::setw(7) << reg.snr_from_db << " .. " << std::setw(7) << reg.snr_to_db << " dB  "
                << winner_name(reg.winner) << '\n';
        }
    }
    out.unsetf(std::ios::floatfield);
    out << "results written to " << out_dir.string() << '\n';
    return 0;
}

inline int cmd_overhead(const Settings& s, const std::string& out_dir, std::ostream& out)
{
    const AntennaConfig a = antenna_of(s);
    const Oversampling ov = oversampling_factors(a);
    OverheadBreakdown b;
    if (s.report_codebook == "type1") {
        b = type1_overhead_bits(a, ov, s.rank, s.subbands);
    } else {
        b = type2_overhead_bits(a, ov, type2_of(s), s.rank, s.subbands);
    }
    out << s.report_codebook << " PMI report: n1=" << a.n1 << " n2=" << a.n2 << " o1=" << ov.o1 << " o2=" << ov.o2
        << " rank=" << s.rank << " subbands=" << s.subbands;
    if (s.report_codebook == "type2") {
        out << " beams=" << s.beams << " n_psk=" << s.n_psk;
    }
    out << '\n';
    for (const auto& [name, bits] : b.per_index_bits) {
        out << "  " << std::left << std::setw(6) << name << std::right << std::setw(4) << bits << " bits\n";
    }
    out << "  " << std::left << std::setw(6) << "total" << std::right << std::setw(4) << b.total_bits << " bits\n";

    std::ostringstream csv;
    csv << "index,bits\n";
    for (const auto& [name, bits] : b.per_index_bits) {
        csv << name << ',' << bits << '\n';
    }
    csv << "total," << b.total_bits << '\n';
    out << '\n' << csv.str();
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_atomic(std::filesystem::path(out_dir) / "overhead.csv", csv.str());
    }
    return 0;
}

inline int cmd_codebook_dump(const Settings& s, const std::string& out_dir, std::ostream& out)
{
    const AntennaConfig a = antenna_of(s);
    const Oversampling ov = oversampling_factors(a);
    std::ostringstream csv;
    if (s.report_codebook == "type1") {
        const Type1Codebook book(a, ov, s.rank);
        csv << "type,rank,i11,i12,i13,i2,row,col,re,im\n";
        for (const auto& e : book.entries()) {
            for (Eigen::Index c = 0; c < e.w.cols(); ++c) {
                for (Eigen::Index r = 0; r < e.w.rows(); ++r) {
                    csv << "type1," << s.rank << ',' << e.i11 << ',' << e.i12 << ',' << e.i13 << ',' << e.i2 << ','
                        << r << ',' << c << ',' << fmt(e.w(r, c).real()) << ',' << fmt(e.w(r, c).imag()) << '\n';
                }
            }
        }
    } else {
        const Type2CodebookSpace space(a, type2_of(s), ov);
        csv << "type,q1,q2,i12,beam,row,re,im\n";
        for (int q1 = 0; q1 < ov.o1; ++q1) {
            for (int q2 = 0; q2 < ov.o2; ++q2) {
                for (int i12 = 0; i12 < space.num_beam_combinations(); ++i12) {
                    const CMatrix beams = space.beam_matrix(q1, q2, i12);
                    for (Eigen::Index b = 0; b < beams.cols(); ++b) {
                        for (Eigen::Index r = 0; r < beams.rows(); ++r) {
                            csv << "type2," << q1 << ',' << q2 << ',' << i12 << ',' << b << ',' << r << ','
                                << fmt(beams(r, b).real()) << ',' << fmt(beams(r, b).imag()) << '\n';
                        }
                    }
                }
            }
        }
    }
    if (out_dir.empty()) {
        out << csv.str();
    } else {
        std::filesystem::create_directories(out_dir);
        write_atomic(std::filesystem::path(out_dir) / "codebook.csv", csv.str());
        out << "codebook written to " << (std::filesystem::path(out_dir) / "codebook.csv").string() << '\n';
    }
    return 0;
}

/// Statistics self-test of the configured channel: ensemble tap powers and
/// frequency-response power over independent drops, and the lag-1 tap
/// autocorrelation of one long run against the Clarke coefficient.
inline int cmd_channel_probe(const Settings& s, const std::string& out_dir, std::ostream& out)
{
    ChannelConfig cfg = scenario_of(s).channel;
    cfg.num_tx_ports = antenna_of(s).num_ports();
    cfg.num_rx_ports = s.rx;
    cfg.validate();
    const int drops = s.slots;
    const double entries = static_cast<double>(cfg.num_tx_ports) * cfg.num_rx_ports;
    const auto pdp = normalize_pdp(cfg.pdp);

    std::vector<double> tap_power(pdp.size(), 0.0);
    double freq_power = 0.0;
    for (int d = 0; d < drops; ++d) {
        ChannelConfig c = cfg;
        c.seed = s.seed + static_cast<std::uint64_t>(d);
        const auto taps = generate_taps(c, 1);
        for (std::size_t t = 0; t < pdp.size(); ++t) {
            tap_power[t] += taps[0][t].squaredNorm() / entries / drops;
        }
        const auto ch = generate_channel(c, 1);
        for (int k = 0; k < ch.num_subbands(); ++k) {
            freq_power += ch.at(0, k).squaredNorm() / entries / ch.num_subbands() / drops;
        }
    }

    const int run = std::max(drops, 10000);
    ChannelConfig c = cfg;
    c.seed = s.seed;
    const auto taps = generate_taps(c, run);
    cdouble num = 0.0;
    double den = 0.0;
    for (int t = 0; t + 1 < run; ++t) {
        for (std::size_t p = 0; p < pdp.size(); ++p) {
            const CMatrix& a = taps[static_cast<std::size_t>(t)][p];
            const CMatrix& b = taps[static_cast<std::size_t>(t + 1)][p];
            num += (b.array() * a.array().conjugate()).sum();
            den += a.squaredNorm();
        }
    }
    const double rho = num.real() / den;

    struct Check {
        std::string name;
        double measured;
        double expected;
        double tol;
        bool relative;
    };
    std::vector<Check> checks;
    checks.push_back({"freq_power", freq_power, 1.0, 0.03, true});
    for (std::size_t t = 0; t < pdp.size(); ++t) {
        if (pdp[t].power_linear > 0.0) {
            checks.push_back({"tap" + std::to_string(t) + "_power", tap_power[t], pdp[t].power_linear, 0.03, true});
        }
    }
    checks.push_back({"lag1_autocorr", rho, cfg.slot_correlation(), 0.02, false});

    std::ostringstream csv;
    csv << "check,measured,expected,tolerance,pass\n";
    bool all_ok = true;
    out << std::left << std::setw(16) << "check" << std::right << std::setw(14) << "measured" << std::setw(14)
        << "expected" << std::setw(8) << "tol" << "  result\n";
    for (const auto& ch : checks) {
        const double err = ch.relative ? std::abs(ch.measured / ch.expected - 1.0) : std::abs(ch.measured - ch.expected);
        const bool ok = err <= ch.tol;
        all_ok = all_ok && ok;
        out << std::left << std::setw(16) << ch.name << std::right << std::setw(14) << std::setprecision(6)
            << ch.measured << std::setw(14) << ch.expected << std::setw(8) << ch.tol << "  " << (ok ? "ok" : "FAIL")
            << '\n';
        csv << ch.name << ',' << fmt(ch.measured) << ',' << fmt(ch.expected) << ',' << fmt(ch.tol) << ','
            << (ok ? 1 : 0) << '\n';
    }
    out << (all_ok ? "channel probe passed" : "channel probe FAILED") << " (" << drops << " drops, " << run
        << " slots)\n";
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_atomic(std::filesystem::path(out_dir) / "probe.csv", csv.str());
    }
    return all_ok ? 0 : 1;
}

// ---------------------------------------------------------------------------

/// Entry point; returns the process exit code (0 ok, 1 runtime error, 2
/// configuration or usage error).
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"nrsim: CSI feedback link-level simulator (Type I / Type II codebooks)", "nrsim"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    // option -> config key; values are applied after the config file
    std::vector<std::pair<CLI::Option*, std::string>> bound;

    auto add_flag = [&](CLI::App* cmd, const std::string& flag, const std::string& key, const std::string& help) {
        bound.emplace_back(cmd->add_option(flag)->description(help + " [" + key + "]")->type_name("TEXT")->expected(1), key);
    };
    auto add_scenario = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "INI config file");
        add_flag(cmd, "--n1", "scenario.n1", "horizontal ports per polarization");
        add_flag(cmd, "--n2", "scenario.n2", "vertical ports per polarization");
    };

    auto* sweep = app.add_subcommand("sweep", "SNR sweep over codebook modes on a shared channel");
    add_scenario(sweep);
    add_flag(sweep, "--snr", "sweep.snr", "SNR grid min:step:max or list");
    add_flag(sweep, "--slots", "sweep.slots", "slots per SNR point");
    add_flag(sweep, "--codebook", "sweep.codebook", "type1|type2|svd|all or a comma list");
    add_flag(sweep, "--rx", "scenario.rx", "receive antennas");
    add_flag(sweep, "--seed", "sweep.seed", "channel seed");
    add_flag(sweep, "--delay", "sweep.feedback_delay", "feedback delay in slots");
    add_flag(sweep, "--doppler", "channel.doppler_hz", "maximum Doppler in Hz");
    add_flag(sweep, "--subbands", "channel.num_subbands", "number of subbands");
    add_flag(sweep, "--beams", "type2.beams", "Type II beam count");
    add_flag(sweep, "--npsk", "type2.n_psk", "Type II phase alphabet");
    sweep->add_option("--out", out_dir, "output directory")->default_str("nrsim-out");

    auto* overhead = app.add_subcommand("overhead", "PMI report size breakdown");
    add_scenario(overhead);
    add_flag(overhead, "--codebook", "overhead.codebook", "type1|type2");
    add_flag(overhead, "--rank", "overhead.rank", "rank / layers");
    add_flag(overhead, "--subbands", "overhead.subbands", "subbands carrying subband indices");
    add_flag(overhead, "--beams", "type2.beams", "Type II beam count");
    add_flag(overhead, "--npsk", "type2.n_psk", "Type II phase alphabet");
    overhead->add_option("--out", out_dir, "also write overhead.csv here");

    auto* codebook = app.add_subcommand("codebook", "codebook utilities");
    codebook->require_subcommand(1);
    auto* dump = codebook->add_subcommand("dump", "write every codebook matrix as CSV");
    add_scenario(dump);
    add_flag(dump, "--codebook", "overhead.codebook", "type1|type2");
    add_flag(dump, "--rank", "overhead.rank", "Type I rank");
    add_flag(dump, "--beams", "type2.beams", "Type II beam count");
    add_flag(dump, "--npsk", "type2.n_psk", "Type II phase alphabet");
    dump->add_option("--out", out_dir, "write codebook.csv here instead of stdout");

    auto* channel = app.add_subcommand("channel", "channel utilities");
    channel->require_subcommand(1);
    auto* probe = channel->add_subcommand("probe", "statistics self-test of the channel model");
    add_scenario(probe);
    add_flag(probe, "--rx", "scenario.rx", "receive antennas");
    add_flag(probe, "--slots", "sweep.slots", "independent drops");
    add_flag(probe, "--seed", "sweep.seed", "first seed");
    add_flag(probe, "--doppler", "channel.doppler_hz", "maximum Doppler in Hz");
    add_flag(probe, "--subbands", "channel.num_subbands", "number of subbands");
    probe->add_option("--out", out_dir, "also write probe.csv here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    Settings s;
    try {
        if (!config_path.empty()) {
            apply_config_file(s, config_path);
        }
        for (const auto& [opt, key] : bound) {
            if (opt->count() > 0) {
                find_key(key).set(s, opt->as<std::string>());
            }
        }
    } catch (const std::invalid_argument& e) {
        err << "config error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (sweep->parsed()) {
            return cmd_sweep(s, out_dir.empty() ? "nrsim-out" : out_dir, out);
        }
        if (overhead->parsed()) {
            return cmd_overhead(s, out_dir, out);
        }
        if (dump->parsed()) {
            return cmd_codebook_dump(s, out_dir, out);
        }
        if (probe->parsed()) {
            return cmd_channel_probe(s, out_dir, out);
        }
    } catch (const std::invalid_argument& e) {
        // invalid combinations only surface once the pieces are assembled
        err << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    err << "error: no subcommand\n" << app.help();
    return 2;
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    std::vector<const char*> argv{"nrsim"};
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

} // namespace nrsim::cli
