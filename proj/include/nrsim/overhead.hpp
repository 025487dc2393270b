#pragma once

// PMI report bit-widths and the expected report size over a rank distribution.
// Every log2 term is rounded up to whole bits. Indices that are reported per
// subband are multiplied by the subband count; num_subbands = 1 is the
// wideband-only accounting.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nrsim/codebook.hpp"
#include "nrsim/common.hpp"

namespace nrsim {

struct OverheadBreakdown {
    std::vector<std::pair<std::string, int>> per_index_bits;
    int total_bits = 0;

    void add(std::string name, int bits)
    {
        per_index_bits.emplace_back(std::move(name), bits);
        total_bits += bits;
    }

    int bits(const std::string& name) const
    {
        for (const auto& [n, b] : per_index_bits) {
            if (n == name) {
                return b;
            }
        }
        throw std::out_of_range("overhead: no index named " + name);
    }
};

inline OverheadBreakdown type1_overhead_bits(const AntennaConfig& cfg, const Oversampling& ov, int rank,
                                             int num_subbands)
{
    if (rank < 1 || rank > 4) {
        throw ConfigError("overhead: type1 rank must be in 1..4, got " + std::to_string(rank));
    }
    require(num_subbands >= 1, "overhead: num_subbands must be >= 1");
    require(ov.o1 >= 1 && ov.o2 >= 1 && cfg.n1 >= 1 && cfg.n2 >= 1, "overhead: invalid geometry");

    OverheadBreakdown out;
    out.add("i11", ceil_log2(static_cast<unsigned long long>(cfg.n1 * ov.o1)));
    out.add("i12", ceil_log2(static_cast<unsigned long long>(cfg.n2 * ov.o2)));
    out.add("i13", rank == 1 ? 0 : ceil_log2(4));
    out.add("i2", num_subbands * (rank == 1 ? ceil_log2(4) : ceil_log2(2)));
    return out;
}

inline OverheadBreakdown type2_overhead_bits(const AntennaConfig& cfg, const Oversampling& ov,
                                             const Type2Config& t2, int layers, int num_subbands)
{
    if (layers < 1 || layers > Type2Config::kMaxRank) {
        throw ConfigError("overhead: type2 layers must be 1 or 2, got " + std::to_string(layers));
    }
    require(num_subbands >= 1, "overhead: num_subbands must be >= 1");
    t2.validate(cfg);

    const int b = t2.num_beams;
    OverheadBreakdown out;
    out.add("i11", ceil_log2(static_cast<unsigned long long>(ov.o1))
                       + ceil_log2(static_cast<unsigned long long>(ov.o2)));
    out.add("i12", ceil_log2(binomial(cfg.n1 * cfg.n2, b)));
    for (int l = 1; l <= layers; ++l) {
        const std::string suffix = std::to_string(l);
        out.add("i13" + suffix, ceil_log2(static_cast<unsigned long long>(b)));
        out.add("i14" + suffix, 2 * b * ceil_log2(8));
        out.add("i21" + suffix, num_subbands * 2 * b * ceil_log2(static_cast<unsigned long long>(t2.n_psk)));
        out.add("i22" + suffix, num_subbands * 2 * b * ceil_log2(2));
    }
    return out;
}

/// Sum_i p_i * Q_i over ranks 1..L.
inline double expected_overhead(std::span<const double> rank_probs, std::span<const int> per_rank_bits)
{
    require(rank_probs.size() == per_rank_bits.size(), "expected_overhead: length mismatch");
    require(!rank_probs.empty(), "expected_overhead: empty distribution");
    double sum = 0.0;
    for (double p : rank_probs) {
        require(p >= 0.0, "expected_overhead: negative probability");
        sum += p;
    }
    require(std::abs(sum - 1.0) <= 1e-9, "expected_overhead: probabilities must sum to 1");
    double e = 0.0;
    for (std::size_t i = 0; i < rank_probs.size(); ++i) {
        e += rank_probs[i] * per_rank_bits[i];
    }
    return e;
}

/// Worst-case Q_i per rank 1..max_rank. Each rank has a single report
/// variant here (Type I codebook mode 1, Type II with all 2B coefficients),
/// so the maximum runs over that one layout.
inline std::vector<int> type1_per_rank_bits(const AntennaConfig& cfg, const Oversampling& ov, int max_rank,
                                            int num_subbands)
{
    std::vector<int> q;
    for (int r = 1; r <= max_rank; ++r) {
        q.push_back(type1_overhead_bits(cfg, ov, r, num_subbands).total_bits);
    }
    return q;
}

inline std::vector<int> type2_per_rank_bits(const AntennaConfig& cfg, const Oversampling& ov,
                                            const Type2Config& t2, int max_rank, int num_subbands)
{
    std::vector<int> q;
    for (int r = 1; r <= max_rank; ++r) {
        q.push_back(type2_overhead_bits(cfg, ov, t2, r, num_subbands).total_bits);
    }
    return q;
}

} // namespace nrsim
