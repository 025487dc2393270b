#pragma once

// Tapped-delay-line MIMO fading channel with a clustered power-delay profile.
//
// Each tap is an i.i.d. complex Gaussian matrix (rx x tx) evolving in time as
// a first-order autoregressive process whose lag-1 coefficient follows the
// Clarke autocorrelation J0(2 pi fd T). The frequency response is sampled at
// the centers of an equally spaced subband grid.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "nrsim/common.hpp"

namespace nrsim {

struct PdpTap {
    double normalized_delay = 0.0;
    double power_linear = 0.0;
};

using PowerDelayProfile = std::vector<PdpTap>;

/// Shifts delays so the earliest tap sits at 0 and scales powers to unit sum.
inline PowerDelayProfile normalize_pdp(PowerDelayProfile pdp)
{
    require(!pdp.empty(), "pdp: profile is empty");
    double min_delay = pdp.front().normalized_delay;
    double total = 0.0;
    for (const auto& t : pdp) {
        require(std::isfinite(t.normalized_delay) && std::isfinite(t.power_linear),
                "pdp: non-finite entry");
        require(t.power_linear >= 0.0, "pdp: negative tap power");
        min_delay = std::min(min_delay, t.normalized_delay);
        total += t.power_linear;
    }
    require(total > 0.0, "pdp: total power must be positive");
    for (auto& t : pdp) {
        t.normalized_delay -= min_delay;
        t.power_linear /= total;
    }
    return pdp;
}

/// CDL-A clusters (TR 38.901 Table 7.7.1-1): normalized delay, power in dB.
inline PowerDelayProfile cdl_a_pdp()
{
    static constexpr double kTable[23][2] = {
        {0.0000, -13.4}, {0.3819, 0.0},   {0.4025, -2.2},  {0.5868, -4.0},
        {0.4610, -6.0},  {0.5375, -8.2},  {0.6708, -9.9},  {0.5750, -10.5},
        {0.7618, -7.5},  {1.5375, -15.9}, {1.8978, -6.6},  {2.2242, -16.7},
        {2.1718, -12.4}, {2.4942, -15.2}, {2.5119, -10.8}, {3.0582, -11.3},
        {4.0810, -12.6}, {4.4579, -9.1},  {4.5695, -12.0}, {4.7966, -16.8},
        {5.0066, -18.6}, {5.3043, -11.1}, {9.6586, -19.1},
    };
    PowerDelayProfile pdp;
    pdp.reserve(23);
    for (const auto& row : kTable) {
        pdp.push_back({row[0], db_to_linear(row[1])});
    }
    return normalize_pdp(std::move(pdp));
}

/// Reads a two-column text profile (delay_ns, power_db). Columns may be
/// separated by whitespace or a comma; '#' starts a comment. Delays are
/// divided by `delay_spread_ns` so that the generator's scaling restores them.
inline PowerDelayProfile load_pdp_file(const std::string& path, double delay_spread_ns)
{
    require(delay_spread_ns > 0.0, "pdp file: delay spread must be positive");
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("pdp_file: cannot open '" + path + "'");
    }
    PowerDelayProfile pdp;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double delay_ns = 0.0;
        double power_db = 0.0;
        if (!(ss >> delay_ns)) {
            continue;
        }
        if (!(ss >> power_db)) {
            throw ConfigError("pdp_file: line " + std::to_string(line_no) + " needs two columns");
        }
        if (delay_ns < 0.0) {
            throw ConfigError("pdp_file: line " + std::to_string(line_no) + " has a negative delay");
        }
        pdp.push_back({delay_ns / delay_spread_ns, db_to_linear(power_db)});
    }
    if (pdp.empty()) {
        throw ConfigError("pdp_file: '" + path + "' contains no taps");
    }
    return normalize_pdp(std::move(pdp));
}

struct ChannelConfig {
    int num_tx_ports = 8;
    int num_rx_ports = 4;
    double doppler_hz = 5.0;
    double delay_spread_ns = 100.0;
    // 52 PRBs at 15 kHz grouped into 13 subbands of 4 PRBs.
    int num_subbands = 13;
    double subband_spacing_hz = 4 * 12 * 15e3;
    double slot_duration_s = 1e-3;
    PowerDelayProfile pdp = cdl_a_pdp();
    std::uint64_t seed = 1;

    double bandwidth_hz() const { return num_subbands * subband_spacing_hz; }

    void validate() const
    {
        require(num_tx_ports >= 1, "channel: num_tx_ports must be positive");
        require(num_rx_ports >= 1, "channel: num_rx_ports must be positive");
        require(doppler_hz >= 0.0 && std::isfinite(doppler_hz), "channel: doppler_hz must be non-negative");
        require(delay_spread_ns > 0.0, "channel: delay_spread_ns must be positive");
        require(num_subbands >= 1, "channel: num_subbands must be >= 1");
        require(subband_spacing_hz > 0.0, "channel: subband_spacing_hz must be positive");
        require(slot_duration_s > 0.0, "channel: slot_duration_s must be positive");
        require(!pdp.empty(), "channel: pdp is empty");
        for (const auto& t : pdp) {
            require(t.normalized_delay >= 0.0, "channel: pdp delays must be >= 0");
        }
    }

    /// Center frequency offset of subband k relative to the carrier.
    double subband_center_hz(int k) const
    {
        return (k + 0.5) * subband_spacing_hz - 0.5 * bandwidth_hz();
    }

    /// Lag-1 tap correlation across one slot.
    double slot_correlation() const
    {
        return std::cyl_bessel_j(0.0, 2.0 * kPi * doppler_hz * slot_duration_s);
    }
};

/// Frequency-domain channel: one rx x tx matrix per (slot, subband).
class ChannelRealization {
public:
    ChannelRealization() = default;
    ChannelRealization(int num_slots, int num_subbands, int num_rx, int num_tx)
        : num_slots_(num_slots), num_subbands_(num_subbands), num_rx_(num_rx), num_tx_(num_tx),
          h_(static_cast<std::size_t>(num_slots) * num_subbands, CMatrix::Zero(num_rx, num_tx))
    {
    }

    int num_slots() const { return num_slots_; }
    int num_subbands() const { return num_subbands_; }
    int num_rx() const { return num_rx_; }
    int num_tx() const { return num_tx_; }

    const CMatrix& at(int slot, int subband) const { return h_[index(slot, subband)]; }
    CMatrix& at(int slot, int subband) { return h_[index(slot, subband)]; }

    /// All subband matrices of one slot, contiguous.
    std::span<const CMatrix> slot(int s) const
    {
        return {h_.data() + index(s, 0), static_cast<std::size_t>(num_subbands_)};
    }

    // sigma_n^2 at the 0 dB reference; sweeps substitute their own value.
    double noise_var = 1.0;

private:
    std::size_t index(int slot, int subband) const
    {
        return static_cast<std::size_t>(slot) * num_subbands_ + subband;
    }

    int num_slots_ = 0;
    int num_subbands_ = 0;
    int num_rx_ = 0;
    int num_tx_ = 0;
    std::vector<CMatrix> h_;
};

/// Stateful AR(1) generator of the per-tap gain matrices.
class TapProcess {
public:
    explicit TapProcess(const ChannelConfig& cfg)
        : rho_(cfg.slot_correlation()), rng_(cfg.seed)
    {
        cfg.validate();
        const auto pdp = normalize_pdp(cfg.pdp);
        amplitude_.reserve(pdp.size());
        for (const auto& t : pdp) {
            amplitude_.push_back(std::sqrt(t.power_linear));
        }
        innovation_ = std::sqrt(std::max(0.0, 1.0 - rho_ * rho_));
        taps_.reserve(pdp.size());
        for (double a : amplitude_) {
            taps_.push_back(a * gaussian(cfg.num_rx_ports, cfg.num_tx_ports));
        }
    }

    const std::vector<CMatrix>& taps() const { return taps_; }

    void advance()
    {
        for (std::size_t t = 0; t < taps_.size(); ++t) {
            if (innovation_ == 0.0) {
                continue;
            }
            taps_[t] = rho_ * taps_[t]
                       + (innovation_ * amplitude_[t]) * gaussian(taps_[t].rows(), taps_[t].cols());
        }
    }

private:
    CMatrix gaussian(Eigen::Index rows, Eigen::Index cols)
    {
        CMatrix m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            const double re = normal_(rng_);
            const double im = normal_(rng_);
            m.data()[i] = cdouble(re, im) * std::sqrt(0.5);
        }
        return m;
    }

    double rho_;
    double innovation_ = 0.0;
    std::vector<double> amplitude_;
    std::vector<CMatrix> taps_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Per-slot tap gain matrices, [slot][tap].
inline std::vector<std::vector<CMatrix>> generate_taps(const ChannelConfig& cfg, int num_slots)
{
    require(num_slots >= 1, "generate_taps: num_slots must be >= 1");
    TapProcess proc(cfg);
    std::vector<std::vector<CMatrix>> out;
    out.reserve(static_cast<std::size_t>(num_slots));
    for (int s = 0; s < num_slots; ++s) {
        if (s > 0) {
            proc.advance();
        }
        out.push_back(proc.taps());
    }
    return out;
}

inline ChannelRealization generate_channel(const ChannelConfig& cfg, int num_slots)
{
    require(num_slots >= 1, "generate_channel: num_slots must be >= 1");
    require(!cfg.pdp.empty(), "generate_channel: pdp is empty");
    TapProcess proc(cfg);
    const auto pdp = normalize_pdp(cfg.pdp);

    // exp(-j 2 pi f_k tau_t), [subband][tap]
    std::vector<std::vector<cdouble>> phase(static_cast<std::size_t>(cfg.num_subbands));
    for (int k = 0; k < cfg.num_subbands; ++k) {
        const double f = cfg.subband_center_hz(k);
        for (const auto& t : pdp) {
            const double tau = t.normalized_delay * cfg.delay_spread_ns * 1e-9;
            phase[k].push_back(std::polar(1.0, -2.0 * kPi * f * tau));
        }
    }

    ChannelRealization out(num_slots, cfg.num_subbands, cfg.num_rx_ports, cfg.num_tx_ports);
    for (int s = 0; s < num_slots; ++s) {
        if (s > 0) {
            proc.advance();
        }
        const auto& taps = proc.taps();
        for (int k = 0; k < cfg.num_subbands; ++k) {
            CMatrix& h = out.at(s, k);
            for (std::size_t t = 0; t < taps.size(); ++t) {
                h.noalias() += phase[k][t] * taps[t];
            }
        }
    }
    return out;
}

} // namespace nrsim
