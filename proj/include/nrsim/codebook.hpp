#pragma once

// DFT grid of beams plus the Type I (single-panel, ranks 1-4) and Type II
// (ranks 1-2) downlink codebooks. Every precoder is W = W1 * W2: the wideband
// part picks beams from the oversampled grid, the subband part co-phases the
// two polarizations (Type I) or combines a beam group with quantized
// amplitudes and phases (Type II).

#include <array>
#include <cmath>
#include <compare>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nrsim/common.hpp"

namespace nrsim {

/// Single-panel cross-polarized array: n1 x n2 elements per polarization.
struct AntennaConfig {
    int n1 = 4;
    int n2 = 1;
    int ng = 1;
    bool cross_polarized = true;

    int num_ports() const { return 2 * n1 * n2 * ng; }
    int beam_length() const { return n1 * n2; }

    void validate() const
    {
        if (n1 < 1 || n2 < 1) {
            throw ConfigError("antenna: n1 and n2 must be positive");
        }
        if (ng != 1) {
            throw ConfigError("antenna: only single-panel arrays (ng = 1) are supported");
        }
        if (!cross_polarized) {
            throw ConfigError("antenna: only cross-polarized arrays are supported");
        }
    }

    bool operator==(const AntennaConfig&) const = default;
};

struct Oversampling {
    int o1 = 4;
    int o2 = 1;

    bool operator==(const Oversampling&) const = default;
};

/// (O1, O2) for the supported single-panel layouts (TS 38.214 Table 5.2.2.2.1-2).
inline Oversampling oversampling_factors(const AntennaConfig& cfg)
{
    cfg.validate();
    static constexpr std::array<std::pair<int, int>, 13> kSupported = {{
        {2, 1}, {2, 2}, {4, 1}, {3, 2}, {6, 1}, {4, 2}, {8, 1},
        {4, 3}, {6, 2}, {12, 1}, {4, 4}, {8, 2}, {16, 1},
    }};
    for (const auto& [n1, n2] : kSupported) {
        if (cfg.n1 == n1 && cfg.n2 == n2) {
            return {4, n2 == 1 ? 1 : 4};
        }
    }
    throw ConfigError("antenna: unsupported (n1, n2) = (" + std::to_string(cfg.n1) + ", "
                      + std::to_string(cfg.n2) + ")");
}

/// Unnormalized 2-D DFT beam v_{l,m} = u_l (x) u_m of length n1*n2.
inline CVector dft_beam(int l, int m, const AntennaConfig& cfg, const Oversampling& ov)
{
    const int len1 = cfg.n1 * ov.o1;
    const int len2 = cfg.n2 * ov.o2;
    require(l >= 0 && l < len1, "dft_beam: l out of range");
    require(m >= 0 && m < len2, "dft_beam: m out of range");
    CVector v(cfg.n1 * cfg.n2);
    for (int a = 0; a < cfg.n1; ++a) {
        const cdouble ul = std::polar(1.0, 2.0 * kPi * a * l / len1);
        for (int b = 0; b < cfg.n2; ++b) {
            const cdouble um = std::polar(1.0, 2.0 * kPi * b * m / len2);
            v(a * cfg.n2 + b) = ul * um;
        }
    }
    return v;
}

struct TypeIPmi {
    int i11 = 0;
    int i12 = 0;
    int i13 = 0;
    std::vector<int> i2;  // one per subband

    auto operator<=>(const TypeIPmi&) const = default;
};

struct TypeIIPmi {
    int q1 = 0;  // i11 rotation pair
    int q2 = 0;
    int i12 = 0; // beam combination
    std::vector<int> strongest;                                // [layer]
    std::vector<std::vector<int>> wideband_amplitude;          // [layer][2B]
    std::vector<std::vector<std::vector<int>>> subband_cophase;   // [subband][layer][2B]
    std::vector<std::vector<std::vector<int>>> subband_amplitude; // [subband][layer][2B]

    int rank() const { return static_cast<int>(wideband_amplitude.size()); }
    int num_subbands() const { return static_cast<int>(subband_cophase.size()); }

    auto operator<=>(const TypeIIPmi&) const = default;
};

using PmiIndex = std::variant<TypeIPmi, TypeIIPmi>;

struct PrecoderEntry {
    PmiIndex pmi;
    std::vector<CMatrix> w_per_subband;

    int rank() const { return w_per_subband.empty() ? 0 : static_cast<int>(w_per_subband.front().cols()); }
};

// ---------------------------------------------------------------------------
// Type I

/// (k1, k2) beam offsets selected by i13.
using BeamOffset = std::pair<int, int>;

/// Offsets for the second beam of a rank-2 precoder (TS 38.214 Table 5.2.2.2.1-3).
inline std::vector<BeamOffset> type1_rank2_offsets(const AntennaConfig& cfg, const Oversampling& ov)
{
    const int o1 = ov.o1;
    const int o2 = ov.o2;
    if (cfg.n2 == 1) {
        if (cfg.n1 == 2) {
            return {{0, 0}, {o1, 0}};
        }
        return {{0, 0}, {o1, 0}, {2 * o1, 0}, {3 * o1, 0}};
    }
    if (cfg.n1 == cfg.n2) {
        return {{0, 0}, {o1, 0}, {0, o2}, {o1, o2}};
    }
    return {{0, 0}, {o1, 0}, {0, o2}, {2 * o1, 0}};
}

/// Offsets for ranks 3-4 with fewer than 16 ports (TS 38.214 Table 5.2.2.2.1-4).
inline std::vector<BeamOffset> type1_rank34_offsets(const AntennaConfig& cfg, const Oversampling& ov)
{
    const int o1 = ov.o1;
    const int o2 = ov.o2;
    if (cfg.n1 == 2 && cfg.n2 == 1) {
        return {{o1, 0}};
    }
    if (cfg.n1 == 2 && cfg.n2 == 2) {
        return {{o1, 0}, {0, o2}, {o1, o2}};
    }
    if (cfg.n1 == 3 && cfg.n2 == 2) {
        return {{o1, 0}, {0, o2}, {o1, o2}, {2 * o1, 0}};
    }
    if (cfg.n1 == 4 && cfg.n2 == 1) {
        return {{o1, 0}, {2 * o1, 0}, {3 * o1, 0}};
    }
    if (cfg.n1 == 6 && cfg.n2 == 1) {
        return {{o1, 0}, {2 * o1, 0}, {3 * o1, 0}, {4 * o1, 0}};
    }
    throw ConfigError("type1: ranks 3-4 need fewer than 16 ports, got " + std::to_string(cfg.num_ports()));
}

struct Type1Entry {
    int i11 = 0;
    int i12 = 0;
    int i13 = 0;
    int i2 = 0;
    CMatrix w;
};

/// Fully materialized Type I codebook for one rank. Entries are stored in
/// lexicographic (i11, i12, i13, i2) order.
class Type1Codebook {
public:
    static constexpr int kMaxRank = 4;

    Type1Codebook(const AntennaConfig& cfg, const Oversampling& ov, int rank)
        : cfg_(cfg), ov_(ov), rank_(rank)
    {
        cfg.validate();
        if (rank < 1 || rank > std::min(kMaxRank, cfg.num_ports())) {
            throw ConfigError("type1: rank " + std::to_string(rank) + " not supported for "
                              + std::to_string(cfg.num_ports()) + " ports");
        }
        if (ov.o1 < 1 || ov.o2 < 1 || (cfg.n2 == 1 && ov.o2 != 1)) {
            throw ConfigError("type1: invalid oversampling factors");
        }
        if (rank == 1) {
            offsets_ = {{0, 0}};
        } else if (rank == 2) {
            offsets_ = type1_rank2_offsets(cfg, ov);
        } else {
            offsets_ = type1_rank34_offsets(cfg, ov);
        }
        range_i2_ = rank == 1 ? 4 : 2;

        entries_.reserve(static_cast<std::size_t>(range_i11() * range_i12() * range_i13() * range_i2()));
        for (int i11 = 0; i11 < range_i11(); ++i11) {
            for (int i12 = 0; i12 < range_i12(); ++i12) {
                for (int i13 = 0; i13 < range_i13(); ++i13) {
                    for (int i2 = 0; i2 < range_i2(); ++i2) {
                        entries_.push_back({i11, i12, i13, i2, make_matrix(i11, i12, i13, i2)});
                    }
                }
            }
        }
    }

    const AntennaConfig& antenna() const { return cfg_; }
    const Oversampling& oversampling() const { return ov_; }
    int rank() const { return rank_; }
    int num_ports() const { return cfg_.num_ports(); }

    int range_i11() const { return cfg_.n1 * ov_.o1; }
    int range_i12() const { return cfg_.n2 * ov_.o2; }
    int range_i13() const { return static_cast<int>(offsets_.size()); }
    int range_i2() const { return range_i2_; }
    /// Number of wideband (i11, i12, i13) combinations.
    int num_wideband() const { return range_i11() * range_i12() * range_i13(); }

    std::size_t size() const { return entries_.size(); }
    const std::vector<Type1Entry>& entries() const { return entries_; }

    BeamOffset beam_offset(int i13) const { return offsets_.at(static_cast<std::size_t>(i13)); }

    std::size_t index_of(int i11, int i12, int i13, int i2) const
    {
        require(i11 >= 0 && i11 < range_i11(), "type1: i11 out of range");
        require(i12 >= 0 && i12 < range_i12(), "type1: i12 out of range");
        require(i13 >= 0 && i13 < range_i13(), "type1: i13 out of range");
        require(i2 >= 0 && i2 < range_i2(), "type1: i2 out of range");
        return static_cast<std::size_t>(((i11 * range_i12() + i12) * range_i13() + i13) * range_i2() + i2);
    }

    const Type1Entry& entry(int i11, int i12, int i13, int i2) const
    {
        return entries_[index_of(i11, i12, i13, i2)];
    }

    /// Exact enumeration lookup: first entry within `tol` (max-abs) of `w`.
    std::optional<TypeIPmi> lookup(const CMatrix& w, double tol = 1e-12) const
    {
        if (w.rows() != num_ports() || w.cols() != rank_) {
            return std::nullopt;
        }
        for (const auto& e : entries_) {
            if ((e.w - w).cwiseAbs().maxCoeff() <= tol) {
                return TypeIPmi{e.i11, e.i12, e.i13, {e.i2}};
            }
        }
        return std::nullopt;
    }

    /// Per-subband matrices for a report with one i2 per subband.
    PrecoderEntry realize(const TypeIPmi& pmi) const
    {
        require(!pmi.i2.empty(), "type1: PMI carries no subband indices");
        PrecoderEntry out{pmi, {}};
        out.w_per_subband.reserve(pmi.i2.size());
        for (int i2 : pmi.i2) {
            out.w_per_subband.push_back(entry(pmi.i11, pmi.i12, pmi.i13, i2).w);
        }
        return out;
    }

private:
    CMatrix make_matrix(int i11, int i12, int i13, int i2) const
    {
        const int half = cfg_.beam_length();
        const int p = cfg_.num_ports();
        const auto [k1, k2] = offsets_[static_cast<std::size_t>(i13)];
        const CVector v = dft_beam(i11, i12, cfg_, ov_);
        const CVector vp = dft_beam((i11 + k1) % range_i11(), (i12 + k2) % range_i12(), cfg_, ov_);
        const cdouble phi = std::polar(1.0, kPi * i2 / 2.0);

        CMatrix w(p, rank_);
        auto column = [&](int c, const CVector& beam, cdouble cophase) {
            w.col(c).head(half) = beam;
            w.col(c).tail(half) = cophase * beam;
        };
        switch (rank_) {
        case 1:
            column(0, v, phi);
            break;
        case 2:
            column(0, v, phi);
            column(1, vp, -phi);
            break;
        case 3:
            column(0, v, phi);
            column(1, vp, phi);
            column(2, v, -phi);
            break;
        default:
            column(0, v, phi);
            column(1, vp, phi);
            column(2, v, -phi);
            column(3, vp, -phi);
            break;
        }
        return w / std::sqrt(static_cast<double>(rank_ * p));
    }

    AntennaConfig cfg_;
    Oversampling ov_;
    int rank_;
    int range_i2_ = 4;
    std::vector<BeamOffset> offsets_;
    std::vector<Type1Entry> entries_;
};

inline Type1Codebook build_type1_codebook(const AntennaConfig& cfg, int rank, const Oversampling& ov)
{
    return Type1Codebook(cfg, ov, rank);
}

// ---------------------------------------------------------------------------
// Type II

struct Type2Config {
    int num_beams = 4;
    int n_psk = 8;
    static constexpr int kMaxRank = 2;

    void validate(const AntennaConfig& cfg) const
    {
        if (num_beams < 2 || num_beams > 4) {
            throw ConfigError("type2: beams must be in {2, 3, 4}");
        }
        if (n_psk != 4 && n_psk != 8) {
            throw ConfigError("type2: n_psk must be 4 or 8");
        }
        if (num_beams > cfg.n1 * cfg.n2) {
            throw ConfigError("type2: beams (" + std::to_string(num_beams) + ") exceeds n1*n2 ("
                              + std::to_string(cfg.n1 * cfg.n2) + ")");
        }
    }
};

/// Wideband amplitude levels, index 0..7.
inline const std::array<double, 8>& type2_wideband_levels()
{
    static const std::array<double, 8> kLevels = {
        0.0,
        std::sqrt(1.0 / 64), std::sqrt(1.0 / 32), std::sqrt(1.0 / 16), std::sqrt(1.0 / 8),
        std::sqrt(1.0 / 4), std::sqrt(1.0 / 2), 1.0,
    };
    return kLevels;
}

/// Subband amplitude for the 1-bit index.
inline double type2_subband_level(int bit) { return bit == 0 ? std::sqrt(0.5) : 1.0; }

inline cdouble psk_point(int index, int n_psk)
{
    return std::polar(1.0, 2.0 * kPi * index / n_psk);
}

/// Lexicographic list of all k-subsets of {0..n-1}.
inline std::vector<std::vector<int>> combinations(int n, int k)
{
    std::vector<std::vector<int>> out;
    std::vector<int> cur(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        cur[static_cast<std::size_t>(i)] = i;
    }
    if (k > n) {
        return out;
    }
    while (true) {
        out.push_back(cur);
        int i = k - 1;
        while (i >= 0 && cur[static_cast<std::size_t>(i)] == n - k + i) {
            --i;
        }
        if (i < 0) {
            break;
        }
        ++cur[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < k; ++j) {
            cur[static_cast<std::size_t>(j)] = cur[static_cast<std::size_t>(j - 1)] + 1;
        }
    }
    return out;
}

/// Enumerable Type II structure. Precoders are realized on demand.
class Type2CodebookSpace {
public:
    Type2CodebookSpace(const AntennaConfig& cfg, const Type2Config& t2, const Oversampling& ov)
        : cfg_(cfg), t2_(t2), ov_(ov)
    {
        cfg.validate();
        t2.validate(cfg);
        combos_ = combinations(cfg.n1 * cfg.n2, t2.num_beams);
    }

    const AntennaConfig& antenna() const { return cfg_; }
    const Type2Config& config() const { return t2_; }
    const Oversampling& oversampling() const { return ov_; }
    int num_beams() const { return t2_.num_beams; }
    int num_coefficients() const { return 2 * t2_.num_beams; }
    int num_ports() const { return cfg_.num_ports(); }

    int num_rotations() const { return ov_.o1 * ov_.o2; }
    int num_beam_combinations() const { return static_cast<int>(combos_.size()); }
    const std::vector<int>& beam_combination(int i12) const
    {
        require(i12 >= 0 && i12 < num_beam_combinations(), "type2: i12 out of range");
        return combos_[static_cast<std::size_t>(i12)];
    }

    /// Orthogonal beam b (0 <= b < n1*n2) of the grid rotated by (q1, q2).
    CVector orthogonal_beam(int q1, int q2, int b) const
    {
        require(q1 >= 0 && q1 < ov_.o1 && q2 >= 0 && q2 < ov_.o2, "type2: rotation out of range");
        require(b >= 0 && b < cfg_.n1 * cfg_.n2, "type2: beam out of range");
        const int n1_idx = b / cfg_.n2;
        const int n2_idx = b % cfg_.n2;
        return dft_beam(ov_.o1 * n1_idx + q1, ov_.o2 * n2_idx + q2, cfg_, ov_);
    }

    /// The B selected beams as columns (n1*n2 x B).
    CMatrix beam_matrix(int q1, int q2, int i12) const
    {
        const auto& combo = beam_combination(i12);
        CMatrix m(cfg_.n1 * cfg_.n2, static_cast<Eigen::Index>(combo.size()));
        for (std::size_t i = 0; i < combo.size(); ++i) {
            m.col(static_cast<Eigen::Index>(i)) = orthogonal_beam(q1, q2, combo[i]);
        }
        return m;
    }

    void validate(const TypeIIPmi& pmi, int subband) const
    {
        const int n = num_coefficients();
        require(pmi.rank() >= 1 && pmi.rank() <= Type2Config::kMaxRank, "type2: rank must be 1 or 2");
        require(pmi.q1 >= 0 && pmi.q1 < ov_.o1 && pmi.q2 >= 0 && pmi.q2 < ov_.o2, "type2: rotation out of range");
        require(pmi.i12 >= 0 && pmi.i12 < num_beam_combinations(), "type2: i12 out of range");
        require(subband >= 0 && subband < pmi.num_subbands(), "type2: subband out of range");
        require(static_cast<int>(pmi.subband_amplitude.size()) == pmi.num_subbands(),
                "type2: subband amplitude count mismatch");
        for (int l = 0; l < pmi.rank(); ++l) {
            const auto& wb = pmi.wideband_amplitude[static_cast<std::size_t>(l)];
            const auto& ph = pmi.subband_cophase[static_cast<std::size_t>(subband)].at(static_cast<std::size_t>(l));
            const auto& sa = pmi.subband_amplitude[static_cast<std::size_t>(subband)].at(static_cast<std::size_t>(l));
            require(static_cast<int>(wb.size()) == n && static_cast<int>(ph.size()) == n
                        && static_cast<int>(sa.size()) == n,
                    "type2: coefficient count must be 2B");
            for (int i = 0; i < n; ++i) {
                require(wb[static_cast<std::size_t>(i)] >= 0 && wb[static_cast<std::size_t>(i)] < 8,
                        "type2: wideband amplitude index out of range");
                require(ph[static_cast<std::size_t>(i)] >= 0 && ph[static_cast<std::size_t>(i)] < t2_.n_psk,
                        "type2: co-phase index out of range");
                require(sa[static_cast<std::size_t>(i)] == 0 || sa[static_cast<std::size_t>(i)] == 1,
                        "type2: subband amplitude index out of range");
            }
        }
    }

    /// Combines the selected beams for every layer; coefficient i addresses
    /// beam i % B on polarization i / B. Columns are normalized, then the
    /// matrix is scaled to unit Frobenius norm.
    CMatrix realize(const TypeIIPmi& pmi, int subband) const
    {
        validate(pmi, subband);
        const CMatrix beams = beam_matrix(pmi.q1, pmi.q2, pmi.i12);
        const int b_count = num_beams();
        const int half = cfg_.n1 * cfg_.n2;
        const auto& levels = type2_wideband_levels();

        CMatrix w = CMatrix::Zero(num_ports(), pmi.rank());
        for (int l = 0; l < pmi.rank(); ++l) {
            const auto& wb = pmi.wideband_amplitude[static_cast<std::size_t>(l)];
            const auto& ph = pmi.subband_cophase[static_cast<std::size_t>(subband)][static_cast<std::size_t>(l)];
            const auto& sa = pmi.subband_amplitude[static_cast<std::size_t>(subband)][static_cast<std::size_t>(l)];
            for (int pol = 0; pol < 2; ++pol) {
                for (int b = 0; b < b_count; ++b) {
                    const auto i = static_cast<std::size_t>(pol * b_count + b);
                    const double amp = levels[static_cast<std::size_t>(wb[i])] * type2_subband_level(sa[i]);
                    if (amp == 0.0) {
                        continue;
                    }
                    w.col(l).segment(pol * half, half) += amp * psk_point(ph[i], t2_.n_psk) * beams.col(b);
                }
            }
            const double norm = w.col(l).norm();
            require(norm > 0.0, "type2: layer has no nonzero coefficient");
            w.col(l) /= norm;
        }
        return w / std::sqrt(static_cast<double>(pmi.rank()));
    }

    PrecoderEntry realize_all(const TypeIIPmi& pmi) const
    {
        PrecoderEntry out{pmi, {}};
        out.w_per_subband.reserve(static_cast<std::size_t>(pmi.num_subbands()));
        for (int k = 0; k < pmi.num_subbands(); ++k) {
            out.w_per_subband.push_back(realize(pmi, k));
        }
        return out;
    }

private:
    AntennaConfig cfg_;
    Type2Config t2_;
    Oversampling ov_;
    std::vector<std::vector<int>> combos_;
};

inline Type2CodebookSpace build_type2_structure(const AntennaConfig& cfg, const Type2Config& t2,
                                                const Oversampling& ov)
{
    return Type2CodebookSpace(cfg, t2, ov);
}

inline CMatrix realize_type2_precoder(const Type2CodebookSpace& space, const TypeIIPmi& pmi, int subband)
{
    return space.realize(pmi, subband);
}

} // namespace nrsim
