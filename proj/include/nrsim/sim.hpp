#pragma once

// SNR sweeps over a shared channel realization. Per slot the UE reports CSI
// on slot s; the base station applies it on slot s + feedback_delay, and the
// transmission succeeds when the realized effective SINR still clears the
// reported CQI's threshold.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "nrsim/channel.hpp"
#include "nrsim/codebook.hpp"
#include "nrsim/common.hpp"
#include "nrsim/csi.hpp"
#include "nrsim/overhead.hpp"

namespace nrsim {

enum class CodebookMode { TypeI, TypeII, SvdIdeal };

inline std::string to_string(CodebookMode m)
{
    switch (m) {
    case CodebookMode::TypeI:
        return "type1";
    case CodebookMode::TypeII:
        return "type2";
    case CodebookMode::SvdIdeal:
        return "svd";
    }
    return "unknown";
}

inline CodebookMode parse_codebook_mode(const std::string& s)
{
    if (s == "type1") {
        return CodebookMode::TypeI;
    }
    if (s == "type2") {
        return CodebookMode::TypeII;
    }
    if (s == "svd") {
        return CodebookMode::SvdIdeal;
    }
    throw ConfigError("codebook: expected type1, type2 or svd, got '" + s + "'");
}

struct Scenario {
    AntennaConfig antenna;
    int num_rx = 4;
    ChannelConfig channel;
    Type2Config type2;
    CqiTable cqi = CqiTable::standard();

    int max_rank(CodebookMode mode) const
    {
        const int cap = std::min(num_rx, antenna.num_ports());
        switch (mode) {
        case CodebookMode::TypeI:
            return std::min(cap, Type1Codebook::kMaxRank);
        case CodebookMode::TypeII:
            return std::min(cap, Type2Config::kMaxRank);
        case CodebookMode::SvdIdeal:
            return cap;
        }
        return cap;
    }
};

struct SweepConfig {
    std::vector<double> snr_points_db;
    int num_slots = 1000;
    int feedback_delay_slots = 1;
    CodebookMode codebook_mode = CodebookMode::TypeI;
    Scenario scenario;
    std::uint64_t seed = 1;
    int threads = 1;

    /// Channel configuration with port counts and seed taken from the sweep.
    ChannelConfig channel_config() const
    {
        ChannelConfig c = scenario.channel;
        c.num_tx_ports = scenario.antenna.num_ports();
        c.num_rx_ports = scenario.num_rx;
        c.seed = seed;
        return c;
    }

    void validate() const
    {
        if (snr_points_db.empty()) {
            throw ConfigError("snr: sweep needs at least one SNR point");
        }
        if (!std::is_sorted(snr_points_db.begin(), snr_points_db.end())) {
            throw ConfigError("snr: points must be sorted ascending");
        }
        if (num_slots < 1) {
            throw ConfigError("slots: must be a positive integer");
        }
        if (feedback_delay_slots < 0) {
            throw ConfigError("feedback_delay: must be non-negative");
        }
        if (scenario.num_rx < 1) {
            throw ConfigError("rx: must be a positive integer");
        }
        scenario.antenna.validate();
        if (codebook_mode == CodebookMode::TypeII) {
            scenario.type2.validate(scenario.antenna);
        }
        scenario.cqi.validate();
        channel_config().validate();
    }
};

struct SnrPointResult {
    double snr_db = 0.0;
    double mean_se = 0.0;   // bits/s/Hz
    double se_stderr = 0.0; // standard error of mean_se over slots
    double mean_mbps = 0.0;
    std::vector<double> ri_histogram;  // index r - 1 -> fraction of slots with rank r
    std::vector<double> cqi_histogram; // index c -> fraction of slots with CQI c
    double mean_overhead_bits = 0.0;
    double slots_failed = 0.0;
};

struct SweepResult {
    CodebookMode mode = CodebookMode::TypeI;
    double bandwidth_hz = 0.0;
    std::vector<int> per_rank_bits; // Q_r for r = 1..max_rank
    std::vector<SnrPointResult> points;
};

/// Shared per-sweep state: codebooks and report sizes.
class LinkSimulator {
public:
    explicit LinkSimulator(const SweepConfig& cfg) : cfg_(cfg)
    {
        cfg.validate();
        const auto& sc = cfg.scenario;
        max_rank_ = sc.max_rank(cfg.codebook_mode);
        const int num_sb = sc.channel.num_subbands;
        switch (cfg.codebook_mode) {
        case CodebookMode::TypeI: {
            ov_ = oversampling_factors(sc.antenna);
            for (int r = 1; r <= max_rank_; ++r) {
                type1_.emplace_back(sc.antenna, ov_, r);
            }
            per_rank_bits_ = type1_per_rank_bits(sc.antenna, ov_, max_rank_, num_sb);
            break;
        }
        case CodebookMode::TypeII:
            ov_ = oversampling_factors(sc.antenna);
            type2_.emplace(sc.antenna, sc.type2, ov_);
            per_rank_bits_ = type2_per_rank_bits(sc.antenna, ov_, sc.type2, max_rank_, num_sb);
            break;
        case CodebookMode::SvdIdeal:
            // unquantized precoder: no finite report exists
            per_rank_bits_.assign(static_cast<std::size_t>(max_rank_), 0);
            break;
        }
    }

    int max_rank() const { return max_rank_; }
    const std::vector<int>& per_rank_bits() const { return per_rank_bits_; }

    SnrPointResult run_point(const ChannelRealization& ch, double snr_db) const
    {
        const auto& sc = cfg_.scenario;
        const double noise_var = db_to_linear(-snr_db);
        const int n = cfg_.num_slots;
        const int delay = cfg_.feedback_delay_slots;
        require(ch.num_slots() >= n + delay, "sweep: channel realization too short");

        std::vector<long> ri_count(static_cast<std::size_t>(max_rank_), 0);
        std::vector<long> cqi_count(static_cast<std::size_t>(sc.cqi.max_cqi() + 1), 0);
        long failed = 0;
        double sum = 0.0;
        double sum_sq = 0.0;

        for (int s = 0; s < n; ++s) {
            const auto applied = ch.slot(s + delay);
            double tput = 0.0;
            int ri = 1;
            int cqi = 0;
            if (cfg_.codebook_mode == CodebookMode::SvdIdeal) {
                std::vector<double> layer_sinr;
                double cap = 0.0;
                for (const auto& hk : applied) {
                    const SvdResult svd = svd_precode(hk);
                    cap += mimo_capacity(svd.sigma, noise_var);
                    ri = std::max(1, svd.rank);
                    for (int i = 0; i < svd.rank; ++i) {
                        layer_sinr.push_back(svd.sigma(i) * svd.sigma(i) / noise_var);
                    }
                }
                tput = cap / static_cast<double>(applied.size());
                cqi = layer_sinr.empty() ? 0 : map_cqi(effective_sinr(layer_sinr), sc.cqi);
            } else {
                const CsiReport rep = report(ch.slot(s), noise_var);
                ri = rep.ri;
                cqi = rep.cqi;
                if (rep.cqi > 0) {
                    const LinkQuality realized =
                        evaluate_precoder(applied, rep.precoder.w_per_subband, sc.cqi, noise_var);
                    if (realized.effective_sinr >= sc.cqi.threshold(rep.cqi)) {
                        tput = rep.predicted_throughput;
                    } else {
                        ++failed;
                    }
                }
            }
            ++ri_count[static_cast<std::size_t>(std::min(ri, max_rank_) - 1)];
            ++cqi_count[static_cast<std::size_t>(cqi)];
            sum += tput;
            sum_sq += tput * tput;
        }

        SnrPointResult out;
        out.snr_db = snr_db;
        out.mean_se = sum / n;
        const double var = n > 1 ? std::max(0.0, (sum_sq - sum * sum / n) / (n - 1)) : 0.0;
        out.se_stderr = std::sqrt(var / n);
        out.mean_mbps = out.mean_se * sc.channel.bandwidth_hz() / 1e6;
        for (long c : ri_count) {
            out.ri_histogram.push_back(static_cast<double>(c) / n);
        }
        for (long c : cqi_count) {
            out.cqi_histogram.push_back(static_cast<double>(c) / n);
        }
        out.slots_failed = static_cast<double>(failed) / n;
        out.mean_overhead_bits = expected_overhead(out.ri_histogram, per_rank_bits_);
        return out;
    }

    CsiReport report(std::span<const CMatrix> h, double noise_var) const
    {
        if (cfg_.codebook_mode == CodebookMode::TypeI) {
            return select_csi(h, std::span<const Type1Codebook>(type1_), cfg_.scenario.cqi, noise_var);
        }
        require(type2_.has_value(), "sweep: no codebook for this mode");
        return select_csi(h, *type2_, cfg_.scenario.cqi, noise_var);
    }

private:
    SweepConfig cfg_;
    int max_rank_ = 1;
    Oversampling ov_;
    std::vector<Type1Codebook> type1_;
    std::optional<Type2CodebookSpace> type2_;
    std::vector<int> per_rank_bits_;
};

inline ChannelRealization generate_sweep_channel(const SweepConfig& cfg)
{
    cfg.validate();
    return generate_channel(cfg.channel_config(), cfg.num_slots + cfg.feedback_delay_slots);
}

/// Runs every SNR point on `channel`. Points are distributed over
/// cfg.threads workers; results do not depend on the worker count.
inline SweepResult run_sweep(const SweepConfig& cfg, const ChannelRealization& channel)
{
    const LinkSimulator sim(cfg);
    require(channel.num_rx() == cfg.scenario.num_rx && channel.num_tx() == cfg.scenario.antenna.num_ports(),
            "sweep: channel shape does not match scenario");

    SweepResult res;
    res.mode = cfg.codebook_mode;
    res.bandwidth_hz = cfg.scenario.channel.bandwidth_hz();
    res.per_rank_bits = sim.per_rank_bits();
    res.points.resize(cfg.snr_points_db.size());

    const int workers = std::clamp(cfg.threads, 1, static_cast<int>(cfg.snr_points_db.size()));
    if (workers == 1) {
        for (std::size_t i = 0; i < cfg.snr_points_db.size(); ++i) {
            res.points[i] = sim.run_point(channel, cfg.snr_points_db[i]);
        }
        return res;
    }

    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = next++; i < cfg.snr_points_db.size(); i = next++) {
                    res.points[i] = sim.run_point(channel, cfg.snr_points_db[i]);
                }
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return res;
}

inline SweepResult run_sweep(const SweepConfig& cfg)
{
    const ChannelRealization channel = generate_sweep_channel(cfg);
    return run_sweep(cfg, channel);
}

struct ComparisonRow {
    double snr_db = 0.0;
    std::vector<double> mean_se; // per mode, in input order
    int winner = -1;             // index of the strictly best mode, -1 on a tie
};

struct Region {
    int winner = -1;
    double snr_from_db = 0.0;
    double snr_to_db = 0.0;
};

struct ComparisonTable {
    std::vector<SweepResult> results;
    std::vector<ComparisonRow> rows;

    /// Maximal runs of adjacent SNR points sharing the same winner.
    std::vector<Region> regions() const
    {
        std::vector<Region> out;
        for (const auto& row : rows) {
            if (!out.empty() && out.back().winner == row.winner) {
                out.back().snr_to_db = row.snr_db;
            } else {
                out.push_back({row.winner, row.snr_db, row.snr_db});
            }
        }
        return out;
    }
};

/// Runs each configuration on one shared channel realization so differences
/// between modes are not masked by channel noise.
inline ComparisonTable compare_modes(const std::vector<SweepConfig>& cfgs)
{
    require(!cfgs.empty(), "compare_modes: no configurations");
    const SweepConfig& ref = cfgs.front();
    for (const auto& c : cfgs) {
        const bool same = c.snr_points_db == ref.snr_points_db && c.num_slots == ref.num_slots
                          && c.feedback_delay_slots == ref.feedback_delay_slots && c.seed == ref.seed
                          && c.scenario.num_rx == ref.scenario.num_rx && c.scenario.antenna == ref.scenario.antenna
                          && c.scenario.channel.num_subbands == ref.scenario.channel.num_subbands
                          && c.scenario.channel.doppler_hz == ref.scenario.channel.doppler_hz
                          && c.scenario.channel.delay_spread_ns == ref.scenario.channel.delay_spread_ns
                          && c.scenario.channel.subband_spacing_hz == ref.scenario.channel.subband_spacing_hz
                          && c.scenario.channel.slot_duration_s == ref.scenario.channel.slot_duration_s
                          && c.scenario.channel.pdp.size() == ref.scenario.channel.pdp.size();
        require(same, "compare_modes: mismatched scenario shapes or seeds");
    }

    const ChannelRealization channel = generate_sweep_channel(ref);
    ComparisonTable table;
    for (const auto& c : cfgs) {
        table.results.push_back(run_sweep(c, channel));
    }
    for (std::size_t i = 0; i < ref.snr_points_db.size(); ++i) {
        ComparisonRow row;
        row.snr_db = ref.snr_points_db[i];
        for (const auto& r : table.results) {
            row.mean_se.push_back(r.points[i].mean_se);
        }
        const auto best = std::max_element(row.mean_se.begin(), row.mean_se.end());
        const auto ties = std::count(row.mean_se.begin(), row.mean_se.end(), *best);
        row.winner = ties > 1 ? -1 : static_cast<int>(std::distance(row.mean_se.begin(), best));
        table.rows.push_back(std::move(row));
    }
    return table;
}

} // namespace nrsim
