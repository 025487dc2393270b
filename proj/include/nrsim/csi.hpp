#pragma once

// CSI computation at the UE: SVD reference, linear-MMSE layer SINRs, the
// capacity-domain effective SINR, CQI mapping and PMI/RI/CQI selection.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "nrsim/codebook.hpp"
#include "nrsim/common.hpp"
#include "nrsim/overhead.hpp"

namespace nrsim {

// ---------------------------------------------------------------------------
// SVD and capacity

struct SvdResult {
    CMatrix u;             // num_rx x num_rx
    Eigen::VectorXd sigma; // min(num_rx, num_tx), non-increasing
    CMatrix v;             // num_tx x num_tx
    int rank = 0;          // singular values above the numerical floor
};

inline SvdResult svd_precode(const CMatrix& h)
{
    require(h.size() > 0, "svd_precode: empty matrix");
    require(all_finite(h), "svd_precode: non-finite entry");
    Eigen::JacobiSVD<CMatrix> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    SvdResult out{svd.matrixU(), svd.singularValues(), svd.matrixV(), 0};
    const double floor = out.sigma.size() > 0
                             ? std::max(h.rows(), h.cols()) * out.sigma(0) * std::numeric_limits<double>::epsilon()
                             : 0.0;
    for (Eigen::Index i = 0; i < out.sigma.size(); ++i) {
        if (out.sigma(i) > floor) {
            ++out.rank;
        }
    }
    return out;
}

/// Sum_i log2(1 + sigma_i^2 / noise_var), unit power per layer.
inline double mimo_capacity(std::span<const double> sigma, double noise_var)
{
    require(noise_var > 0.0, "mimo_capacity: noise_var must be positive");
    double c = 0.0;
    for (double s : sigma) {
        require(s >= 0.0, "mimo_capacity: negative singular value");
        c += std::log2(1.0 + s * s / noise_var);
    }
    return c;
}

inline double mimo_capacity(const Eigen::VectorXd& sigma, double noise_var)
{
    return mimo_capacity(std::span<const double>(sigma.data(), static_cast<std::size_t>(sigma.size())), noise_var);
}

// ---------------------------------------------------------------------------
// Link abstraction

/// Per-layer post-equalization SINR of a linear MMSE receiver for G = h * w.
inline Eigen::VectorXd layer_sinr_mmse(const CMatrix& h, const CMatrix& w, double noise_var)
{
    require(noise_var > 0.0, "layer_sinr_mmse: noise_var must be positive");
    require(h.cols() == w.rows(), "layer_sinr_mmse: w must have num_tx rows");
    require(w.cols() >= 1, "layer_sinr_mmse: w has no columns");
    const CMatrix g = h * w;
    const Eigen::Index r = w.cols();
    CMatrix a = g.adjoint() * g / noise_var;
    a.diagonal().array() += 1.0;
    const CMatrix inv = a.llt().solve(CMatrix::Identity(r, r));
    Eigen::VectorXd sinr(r);
    for (Eigen::Index i = 0; i < r; ++i) {
        sinr(i) = std::max(0.0, 1.0 / inv(i, i).real() - 1.0);
    }
    return sinr;
}

/// MIESM with Shannon mutual information: 2^(mean log2(1 + s)) - 1.
inline double effective_sinr(std::span<const double> sinr)
{
    require(!sinr.empty(), "effective_sinr: empty input");
    double acc = 0.0;
    for (double s : sinr) {
        require(s >= 0.0, "effective_sinr: negative SINR");
        acc += std::log2(1.0 + s);
    }
    return std::exp2(acc / static_cast<double>(sinr.size())) - 1.0;
}

inline double effective_sinr(const Eigen::MatrixXd& per_layer_per_subband)
{
    return effective_sinr(std::span<const double>(per_layer_per_subband.data(),
                                                  static_cast<std::size_t>(per_layer_per_subband.size())));
}

struct CqiRow {
    int cqi_index = 0;
    double spectral_efficiency = 0.0;
    double threshold_linear = 0.0;

    double threshold_db() const { return linear_to_db(threshold_linear); }
};

/// CQI index -> (spectral efficiency, minimum effective SINR).
class CqiTable {
public:
    CqiTable() = default;
    explicit CqiTable(std::vector<CqiRow> rows, double target_bler = 0.1)
        : rows_(std::move(rows)), target_bler_(target_bler)
    {
        validate();
    }

    /// 4-bit CQI efficiencies (TS 38.214 Table 5.2.2.1-2, 64QAM) with
    /// thresholds gap * (2^SE - 1).
    static CqiTable standard(double gap_db = 2.0, double target_bler = 0.1)
    {
        static constexpr std::array<double, 15> kEfficiency = {
            0.1523, 0.2344, 0.3770, 0.6016, 0.8770, 1.1758, 1.4766, 1.9141,
            2.4063, 2.7305, 3.3223, 3.9023, 4.5234, 5.1152, 5.5547,
        };
        const double gap = db_to_linear(gap_db);
        std::vector<CqiRow> rows;
        for (std::size_t i = 0; i < kEfficiency.size(); ++i) {
            rows.push_back({static_cast<int>(i) + 1, kEfficiency[i], gap * (std::exp2(kEfficiency[i]) - 1.0)});
        }
        CqiTable t(std::move(rows), target_bler);
        t.gap_db_ = gap_db;
        return t;
    }

    /// CSV with columns cqi_index, efficiency, threshold_db. A header line is allowed.
    static CqiTable from_csv(const std::string& path, double target_bler = 0.1)
    {
        std::ifstream in(path);
        if (!in) {
            throw ConfigError("cqi_table: cannot open '" + path + "'");
        }
        std::vector<CqiRow> rows;
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            std::replace(line.begin(), line.end(), ',', ' ');
            std::istringstream ss(line);
            int idx = 0;
            double se = 0.0;
            double thr_db = 0.0;
            if (!(ss >> idx)) {
                continue; // header or blank
            }
            if (!(ss >> se >> thr_db)) {
                throw ConfigError("cqi_table: line " + std::to_string(line_no) + " needs three columns");
            }
            rows.push_back({idx, se, db_to_linear(thr_db)});
        }
        try {
            return CqiTable(std::move(rows), target_bler);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("cqi_table: ") + e.what());
        }
    }

    void validate() const
    {
        require(!rows_.empty(), "cqi table is empty");
        require(target_bler_ > 0.0 && target_bler_ < 1.0, "cqi table: target_bler must be in (0, 1)");
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            require(rows_[i].cqi_index == static_cast<int>(i) + 1, "cqi table: indices must run 1..n");
            require(rows_[i].spectral_efficiency > 0.0 && rows_[i].threshold_linear > 0.0,
                    "cqi table: efficiencies and thresholds must be positive");
            if (i > 0) {
                require(rows_[i].spectral_efficiency > rows_[i - 1].spectral_efficiency,
                        "cqi table: efficiency must increase strictly");
                require(rows_[i].threshold_linear > rows_[i - 1].threshold_linear,
                        "cqi table: thresholds must increase strictly");
            }
        }
    }

    const std::vector<CqiRow>& rows() const { return rows_; }
    int max_cqi() const { return static_cast<int>(rows_.size()); }
    double target_bler() const { return target_bler_; }
    double gap_db() const { return gap_db_; }

    /// 0 for CQI 0 (out of range).
    double efficiency(int cqi) const
    {
        require(cqi >= 0 && cqi <= max_cqi(), "cqi out of range");
        return cqi == 0 ? 0.0 : rows_[static_cast<std::size_t>(cqi - 1)].spectral_efficiency;
    }

    double threshold(int cqi) const
    {
        require(cqi >= 1 && cqi <= max_cqi(), "cqi out of range");
        return rows_[static_cast<std::size_t>(cqi - 1)].threshold_linear;
    }

private:
    std::vector<CqiRow> rows_;
    double target_bler_ = 0.1;
    double gap_db_ = 0.0;
};

/// Largest CQI whose threshold is <= eff_sinr (inclusive), 0 if none.
inline int map_cqi(double eff_sinr, const CqiTable& table)
{
    int cqi = 0;
    for (const auto& row : table.rows()) {
        if (row.threshold_linear <= eff_sinr) {
            cqi = row.cqi_index;
        } else {
            break;
        }
    }
    return cqi;
}

// ---------------------------------------------------------------------------
// Report selection

struct CsiReport {
    int ri = 1;
    PmiIndex pmi;
    int cqi = 0;
    double predicted_throughput = 0.0; // bits/s/Hz, rank * SE(cqi)
    double effective_sinr = 0.0;
    int overhead_bits = 0;
    PrecoderEntry precoder;
};

/// Realized link quality of a precoder over all subbands.
struct LinkQuality {
    double effective_sinr = 0.0;
    int cqi = 0;
    double throughput = 0.0;
};

inline LinkQuality evaluate_precoder(std::span<const CMatrix> h, std::span<const CMatrix> w, const CqiTable& table,
                                     double noise_var)
{
    require(!h.empty() && h.size() == w.size(), "evaluate_precoder: subband count mismatch");
    const Eigen::Index rank = w.front().cols();
    Eigen::MatrixXd sinr(rank, static_cast<Eigen::Index>(h.size()));
    for (std::size_t k = 0; k < h.size(); ++k) {
        sinr.col(static_cast<Eigen::Index>(k)) = layer_sinr_mmse(h[k], w[k], noise_var);
    }
    LinkQuality q;
    q.effective_sinr = effective_sinr(sinr);
    q.cqi = map_cqi(q.effective_sinr, table);
    q.throughput = static_cast<double>(rank) * table.efficiency(q.cqi);
    return q;
}

namespace detail {

inline constexpr double kRelTol = 1e-12;

inline bool strictly_greater(double a, double b)
{
    return a > b + kRelTol * std::max({1.0, std::abs(a), std::abs(b)});
}

/// Ordering of candidates: throughput first, then effective SINR.
inline bool better(const LinkQuality& a, const LinkQuality& b)
{
    if (strictly_greater(a.throughput, b.throughput)) {
        return true;
    }
    if (strictly_greater(b.throughput, a.throughput)) {
        return false;
    }
    return strictly_greater(a.effective_sinr, b.effective_sinr);
}

} // namespace detail

/// Exhaustive Type I search. `codebooks[r - 1]` holds rank r; ranks above
/// min(num_rx, num_tx) are skipped. For a fixed rank and wideband index the
/// effective SINR is separable over subbands, so the best i2 is chosen per
/// subband (first maximizer on ties). Candidates are ranked by predicted
/// throughput, then effective SINR, then lower rank, then lexicographic PMI.
inline CsiReport select_csi(std::span<const CMatrix> h, std::span<const Type1Codebook> codebooks,
                            const CqiTable& table, double noise_var)
{
    require(!h.empty(), "select_csi: no subbands");
    require(!codebooks.empty(), "select_csi: empty codebook");
    const int num_sb = static_cast<int>(h.size());
    const int max_rank = static_cast<int>(std::min(h.front().rows(), h.front().cols()));

    bool have = false;
    LinkQuality best_q;
    int best_rank = 0;
    TypeIPmi best_pmi;
    const Type1Codebook* best_book = nullptr;

    for (const auto& book : codebooks) {
        const int rank = book.rank();
        if (rank > max_rank) {
            continue;
        }
        require(book.num_ports() == h.front().cols(), "select_csi: codebook port count does not match channel");
        require(book.size() > 0, "select_csi: empty codebook");
        for (int i11 = 0; i11 < book.range_i11(); ++i11) {
            for (int i12 = 0; i12 < book.range_i12(); ++i12) {
                for (int i13 = 0; i13 < book.range_i13(); ++i13) {
                    TypeIPmi pmi{i11, i12, i13, std::vector<int>(static_cast<std::size_t>(num_sb), 0)};
                    Eigen::MatrixXd sinr(rank, num_sb);
                    for (int k = 0; k < num_sb; ++k) {
                        double best_cap = -1.0;
                        for (int i2 = 0; i2 < book.range_i2(); ++i2) {
                            const Eigen::VectorXd s = layer_sinr_mmse(h[static_cast<std::size_t>(k)],
                                                                      book.entry(i11, i12, i13, i2).w, noise_var);
                            const double cap = (1.0 + s.array()).log().sum();
                            if (best_cap < 0.0 || detail::strictly_greater(cap, best_cap)) {
                                best_cap = cap;
                                pmi.i2[static_cast<std::size_t>(k)] = i2;
                                sinr.col(k) = s;
                            }
                        }
                    }
                    LinkQuality q;
                    q.effective_sinr = effective_sinr(sinr);
                    q.cqi = map_cqi(q.effective_sinr, table);
                    q.throughput = rank * table.efficiency(q.cqi);
                    if (!have || detail::better(q, best_q)) {
                        have = true;
                        best_q = q;
                        best_rank = rank;
                        best_pmi = std::move(pmi);
                        best_book = &book;
                    }
                }
            }
        }
    }
    require(have, "select_csi: no codebook supports the channel rank");

    CsiReport rep;
    rep.ri = best_rank;
    rep.pmi = best_pmi;
    rep.cqi = best_q.cqi;
    rep.predicted_throughput = best_q.throughput;
    rep.effective_sinr = best_q.effective_sinr;
    rep.precoder = best_book->realize(best_pmi);
    rep.overhead_bits =
        type1_overhead_bits(best_book->antenna(), best_book->oversampling(), best_rank, num_sb).total_bits;
    return rep;
}

/// Phase indices maximizing |sum_i y_i exp(-j 2 pi t_i / n_psk)|. Starts from
/// nearest-phase rounding and, for n_psk = 8, also from the 4-PSK solution
/// embedded in the finer grid; each start is refined by coordinate ascent.
/// The finer grid therefore never does worse than the coarser one.
inline std::vector<int> quantize_cophase(std::span<const cdouble> y, int n_psk)
{
    require(n_psk == 4 || n_psk == 8, "quantize_cophase: n_psk must be 4 or 8");
    const std::size_t n = y.size();

    auto objective = [&](const std::vector<int>& t) {
        cdouble s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s += y[i] * std::conj(psk_point(t[i], n_psk));
        }
        return std::abs(s);
    };

    auto ascend = [&](std::vector<int> t) {
        cdouble s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s += y[i] * std::conj(psk_point(t[i], n_psk));
        }
        for (int sweep = 0; sweep < 32; ++sweep) {
            bool changed = false;
            for (std::size_t i = 0; i < n; ++i) {
                if (y[i] == 0.0) {
                    continue;
                }
                const cdouble rest = s - y[i] * std::conj(psk_point(t[i], n_psk));
                int best_t = t[i];
                double best = std::abs(s);
                for (int c = 0; c < n_psk; ++c) {
                    const double val = std::abs(rest + y[i] * std::conj(psk_point(c, n_psk)));
                    if (detail::strictly_greater(val, best)) {
                        best = val;
                        best_t = c;
                    }
                }
                if (best_t != t[i]) {
                    t[i] = best_t;
                    s = rest + y[i] * std::conj(psk_point(best_t, n_psk));
                    changed = true;
                }
            }
            if (!changed) {
                break;
            }
        }
        return t;
    };

    std::vector<int> nearest(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (y[i] == 0.0) {
            continue;
        }
        const double turns = std::arg(y[i]) / (2.0 * kPi);
        nearest[i] = static_cast<int>(std::lround(turns * n_psk)) % n_psk;
        if (nearest[i] < 0) {
            nearest[i] += n_psk;
        }
    }
    std::vector<int> best = ascend(std::move(nearest));
    if (n_psk == 8) {
        std::vector<int> coarse = quantize_cophase(y, 4);
        for (int& t : coarse) {
            t *= 2;
        }
        std::vector<int> refined = ascend(std::move(coarse));
        if (detail::strictly_greater(objective(refined), objective(best))) {
            best = std::move(refined);
        }
    }
    return best;
}

/// Beam-basis coefficients of a port-domain vector: c[pol * B + b] = v_b^H x_pol / |v_b|^2.
inline CVector type2_coefficients(const CMatrix& beams, const CVector& x)
{
    const Eigen::Index half = beams.rows();
    const Eigen::Index b_count = beams.cols();
    CVector c(2 * b_count);
    for (Eigen::Index pol = 0; pol < 2; ++pol) {
        for (Eigen::Index b = 0; b < b_count; ++b) {
            c(pol * b_count + b) = beams.col(b).dot(x.segment(pol * half, half)) / beams.col(b).squaredNorm();
        }
    }
    return c;
}

/// Quantizes per-subband target vectors ([subband][layer]) onto the Type II
/// grid for the given beam group: wideband amplitude from the mean magnitude
/// over subbands (relative to the strongest coefficient), one subband
/// amplitude bit (above/below that mean) and correlation-maximizing phases.
inline TypeIIPmi quantize_type2(const Type2CodebookSpace& space, int q1, int q2, int i12,
                                const std::vector<std::vector<CVector>>& targets)
{
    require(!targets.empty(), "quantize_type2: no subbands");
    const std::size_t num_sb = targets.size();
    const std::size_t rank = targets.front().size();
    require(rank >= 1 && rank <= static_cast<std::size_t>(Type2Config::kMaxRank), "quantize_type2: rank must be 1 or 2");
    const CMatrix beams = space.beam_matrix(q1, q2, i12);
    const auto n = static_cast<std::size_t>(space.num_coefficients());
    const auto& levels = type2_wideband_levels();

    TypeIIPmi pmi;
    pmi.q1 = q1;
    pmi.q2 = q2;
    pmi.i12 = i12;
    pmi.strongest.assign(rank, 0);
    pmi.wideband_amplitude.assign(rank, std::vector<int>(n, 0));
    pmi.subband_cophase.assign(num_sb, std::vector<std::vector<int>>(rank, std::vector<int>(n, 0)));
    pmi.subband_amplitude.assign(num_sb, std::vector<std::vector<int>>(rank, std::vector<int>(n, 0)));

    // coeffs[k][l]
    std::vector<std::vector<CVector>> coeffs(num_sb);
    for (std::size_t k = 0; k < num_sb; ++k) {
        require(targets[k].size() == rank, "quantize_type2: layer count differs across subbands");
        for (std::size_t l = 0; l < rank; ++l) {
            coeffs[k].push_back(type2_coefficients(beams, targets[k][l]));
        }
    }

    for (std::size_t l = 0; l < rank; ++l) {
        std::vector<double> mean_mag(n, 0.0);
        for (std::size_t k = 0; k < num_sb; ++k) {
            for (std::size_t i = 0; i < n; ++i) {
                mean_mag[i] += std::abs(coeffs[k][l](static_cast<Eigen::Index>(i))) / static_cast<double>(num_sb);
            }
        }
        const auto strongest = static_cast<std::size_t>(
            std::distance(mean_mag.begin(), std::max_element(mean_mag.begin(), mean_mag.end())));
        pmi.strongest[l] = static_cast<int>(strongest);
        const double ref = mean_mag[strongest];
        for (std::size_t i = 0; i < n; ++i) {
            if (ref <= 0.0) {
                pmi.wideband_amplitude[l][i] = i == strongest ? 7 : 0;
                continue;
            }
            const double ratio = mean_mag[i] / ref;
            int best_idx = 0;
            for (int li = 1; li < 8; ++li) {
                if (std::abs(levels[static_cast<std::size_t>(li)] - ratio)
                    < std::abs(levels[static_cast<std::size_t>(best_idx)] - ratio)) {
                    best_idx = li;
                }
            }
            pmi.wideband_amplitude[l][i] = best_idx;
        }
        pmi.wideband_amplitude[l][strongest] = 7;

        for (std::size_t k = 0; k < num_sb; ++k) {
            std::vector<cdouble> y(n);
            for (std::size_t i = 0; i < n; ++i) {
                const cdouble c = coeffs[k][l](static_cast<Eigen::Index>(i));
                const int bit = std::abs(c) >= mean_mag[i] ? 1 : 0;
                pmi.subband_amplitude[k][l][i] = bit;
                const double amp = levels[static_cast<std::size_t>(pmi.wideband_amplitude[l][i])] * type2_subband_level(bit);
                y[i] = amp * c;
            }
            pmi.subband_cophase[k][l] = quantize_cophase(y, space.config().n_psk);
        }
    }
    return pmi;
}

/// Type II two-stage selection: (1) rotation and beam group maximizing the
/// channel energy captured over all subbands; (2) per-subband dominant right
/// singular vectors quantized onto that group. Rank 1 and 2 are compared on
/// predicted throughput (then effective SINR, then lower rank).
inline CsiReport select_csi(std::span<const CMatrix> h, const Type2CodebookSpace& space, const CqiTable& table,
                            double noise_var)
{
    require(!h.empty(), "select_csi: no subbands");
    require(h.front().cols() == space.num_ports(), "select_csi: codebook port count does not match channel");
    const int num_sb = static_cast<int>(h.size());
    const Eigen::Index half = space.antenna().n1 * space.antenna().n2;
    const int max_rank = static_cast<int>(
        std::min<Eigen::Index>({Type2Config::kMaxRank, h.front().rows(), h.front().cols()}));

    int best_q1 = 0;
    int best_q2 = 0;
    int best_i12 = 0;
    double best_power = -1.0;
    for (int q1 = 0; q1 < space.oversampling().o1; ++q1) {
        for (int q2 = 0; q2 < space.oversampling().o2; ++q2) {
            // energy per orthogonal beam, then summed over each combination
            std::vector<double> beam_power(static_cast<std::size_t>(half), 0.0);
            for (Eigen::Index b = 0; b < half; ++b) {
                const CVector v = space.orthogonal_beam(q1, q2, static_cast<int>(b));
                for (const auto& hk : h) {
                    beam_power[static_cast<std::size_t>(b)] +=
                        (hk.leftCols(half) * v).squaredNorm() + (hk.rightCols(half) * v).squaredNorm();
                }
            }
            for (int i12 = 0; i12 < space.num_beam_combinations(); ++i12) {
                double p = 0.0;
                for (int b : space.beam_combination(i12)) {
                    p += beam_power[static_cast<std::size_t>(b)];
                }
                if (best_power < 0.0 || detail::strictly_greater(p, best_power)) {
                    best_power = p;
                    best_q1 = q1;
                    best_q2 = q2;
                    best_i12 = i12;
                }
            }
        }
    }

    std::vector<std::vector<CVector>> targets(static_cast<std::size_t>(num_sb));
    for (int k = 0; k < num_sb; ++k) {
        const SvdResult svd = svd_precode(h[static_cast<std::size_t>(k)]);
        for (int l = 0; l < max_rank; ++l) {
            targets[static_cast<std::size_t>(k)].push_back(svd.v.col(l));
        }
    }
    const TypeIIPmi full = quantize_type2(space, best_q1, best_q2, best_i12, targets);

    bool have = false;
    LinkQuality best_q;
    TypeIIPmi best_pmi;
    PrecoderEntry best_entry;
    for (int rank = 1; rank <= max_rank; ++rank) {
        TypeIIPmi pmi = full;
        pmi.strongest.resize(static_cast<std::size_t>(rank));
        pmi.wideband_amplitude.resize(static_cast<std::size_t>(rank));
        for (int k = 0; k < num_sb; ++k) {
            pmi.subband_cophase[static_cast<std::size_t>(k)].resize(static_cast<std::size_t>(rank));
            pmi.subband_amplitude[static_cast<std::size_t>(k)].resize(static_cast<std::size_t>(rank));
        }
        PrecoderEntry entry = space.realize_all(pmi);
        const LinkQuality q = evaluate_precoder(h, entry.w_per_subband, table, noise_var);
        if (!have || detail::better(q, best_q)) {
            have = true;
            best_q = q;
            best_pmi = std::move(pmi);
            best_entry = std::move(entry);
        }
    }

    CsiReport rep;
    rep.ri = best_pmi.rank();
    rep.cqi = best_q.cqi;
    rep.predicted_throughput = best_q.throughput;
    rep.effective_sinr = best_q.effective_sinr;
    rep.overhead_bits =
        type2_overhead_bits(space.antenna(), space.oversampling(), space.config(), rep.ri, num_sb).total_bits;
    rep.pmi = std::move(best_pmi);
    rep.precoder = std::move(best_entry);
    return rep;
}

} // namespace nrsim
